"""Uniform epsilon-equilibrium synthesis for strongly controllable games.

Each block of the sibling partition gets its own restricted game (every
outside state frozen at its uniform min-max payoff) and a modified game on
it. Tracing stationary equilibria of that modified game as lam -> 1 tells us
whether the play stays in the block (branch A1, handled by a cycling
automaton over the irreducible classes of the limit profile) or leaves it
(branch A2, handled by a slow exit through the controlling player's exit
action). A dispatcher switches between block automata on every block entry.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .chain import ChainTooLarge, build_chain
from .game_model import (
    AutomatonStrategy,
    StationaryProfile,
    StationaryStrategy,
    StochasticGame,
    build_game,
    profile_to_json,
)
from .modified import ModifiedSpec, Partition, PlayerSpec
from .occupancy import block_breakdown, occupation_stationary
from .structure import (
    ClassificationReport,
    Witness,
    almost_sure_reach,
    check_property_sufficient,
    classify,
    controllability,
)
from .values import DEFAULT_GRID, SolverError, coalition_profile, discounted_minmax, trace_equilibria, uniform_value

log = logging.getLogger(__name__)

BRANCH_TOL = 1e-3
SNAP_TOL = 1e-4
DETECT_DELAY = 50  # nominal stages needed to notice a blatant deviation from a mixed action
K_START, K_MAX = 8, 4096


class PipelineError(RuntimeError):
    pass


# ---------------------------------------------------------------------------------
# restricted game and its modified game


@dataclass(eq=False)
class RestrictedGame:
    game: StochasticGame
    block: frozenset[int]
    values: np.ndarray  # players x states, the frozen payoffs outside the block


def restrict(game: StochasticGame, D, vbar) -> RestrictedGame:
    """Copy of ``game`` where every state outside D loops on itself paying
    ``vbar[:, s]``. Action sets are kept so strategies transfer unchanged."""
    D = frozenset(game.state_index(s) for s in D)
    if not D:
        raise ValueError("D must be nonempty")
    vbar = np.atleast_2d(np.asarray(vbar, dtype=float))
    if vbar.shape != (game.n_players, game.n_states):
        raise ValueError("need one value per (player, state)")
    payoff, transition = {}, {}
    for s, name in enumerate(game.states):
        if s in D:
            payoff[name] = dict(game.payoff[name])
            transition[name] = dict(game.transition[name])
        else:
            keys = list(game.payoff[name])
            payoff[name] = {k: list(vbar[:, s]) for k in keys}
            transition[name] = {k: {name: 1.0} for k in keys}
    actions = {s: dict(game.actions[s]) for s in game.states}
    sub = build_game(game.players, game.states, actions, payoff, transition, name=f"{game.name}|restricted")
    return RestrictedGame(sub, D, vbar)


def block_anchor(game: StochasticGame, D) -> tuple[int, Witness | None]:
    """(s_D, witness): the exit state of a strongly controllable block, or the
    smallest state of a closed block."""
    tag, w = controllability(game, D)
    if tag == "neither":
        raise PipelineError("block is neither closed nor strongly controllable")
    return (w.state if w is not None else min(D)), w


def step1_spec(game: StochasticGame, D, vbar, lam: float = 0.9) -> ModifiedSpec:
    """Partition {D} plus singletons, cutoffs v̄(s_D) on D and v̄(s) elsewhere,
    started at s_D."""
    D = frozenset(game.state_index(s) for s in D)
    sD, _ = block_anchor(game, D)
    vbar = np.atleast_2d(np.asarray(vbar, dtype=float))
    blocks = (D,) + tuple(frozenset([s]) for s in range(game.n_states) if s not in D)
    part = Partition(blocks)
    per = []
    for i in range(game.n_players):
        cut = np.array([vbar[i, sD]] + [vbar[i, s] for s in range(game.n_states) if s not in D])
        per.append(PlayerSpec(part, cut))
    return ModifiedSpec(sD, lam, tuple(per))


# ---------------------------------------------------------------------------------
# dichotomy


@dataclass(eq=False)
class DichotomyResult:
    block: frozenset[int]
    anchor: int
    witness: Witness | None
    branch: str  # "A1" or "A2"
    limit_time: float
    grid: tuple[float, ...]
    times: np.ndarray  # t_lam(s_D, x_lam; D) per grid point
    in_block: np.ndarray  # grid x players: U(D) / t(D)
    exit_values: np.ndarray | None  # grid x players, expected frozen value on exit (A2 data)
    profiles: list[StationaryProfile]
    state_times: np.ndarray  # discounted state times at the last grid point
    payoff_ok: np.ndarray  # per player, the branch's payoff condition
    lam0_index: int | None = None

    @property
    def limit_profile(self) -> StationaryProfile:
        return snap_profile(self.profiles[-1])

    def to_json(self, game: StochasticGame) -> dict:
        out = {
            "block": [game.states[s] for s in sorted(self.block)],
            "anchor": game.states[self.anchor],
            "branch": self.branch,
            "limit_time": self.limit_time,
            "table": [
                {"lambda": lam, "t_block": float(t), "in_block": [float(x) for x in u]}
                for lam, t, u in zip(self.grid, self.times, self.in_block)
            ],
            "payoff_condition": [bool(x) for x in self.payoff_ok],
        }
        if self.exit_values is not None:
            for row, ev in zip(out["table"], self.exit_values):
                row["exit_value"] = [float(x) for x in ev]
        if self.lam0_index is not None:
            out["lambda0"] = self.grid[self.lam0_index]
        return out


def snap_profile(profile: StationaryProfile, tol: float = SNAP_TOL) -> StationaryProfile:
    """Zero out probabilities below ``tol`` and renormalize."""
    strategies = []
    for strat in profile.strategies:
        probs = []
        for p in strat.probs:
            q = np.where(p < tol, 0.0, p)
            probs.append(q / q.sum())
        strategies.append(StationaryStrategy(tuple(probs)))
    return StationaryProfile(tuple(strategies))


def exit_value(game: StochasticGame, D, witness: Witness, profile: StationaryProfile, vbar) -> tuple[np.ndarray, float]:
    """Expected frozen value of the exit state when the witness plays its exit
    action at s_D and the others follow ``profile``; also the exit
    probability of one such stage."""
    i, s = witness.player, witness.state
    others = np.ones(game.n_pairs)
    for j in range(game.n_players):
        if j != i:
            others *= profile[j].flat()[game._flat_index[:, j]]
    outside = np.array([t not in D for t in range(game.n_states)])
    val = np.zeros(game.n_players)
    q = 0.0
    for row in game.rows(s):
        if game.pair_actions[row, i] != witness.action:
            continue
        w = others[row]
        mass = game.Q[row] * outside
        q += w * mass.sum()
        val += w * (vbar @ mass)
    if q <= 0.0:
        return np.full(game.n_players, -np.inf), 0.0
    return val / q, q


def dichotomy(
    rgame: RestrictedGame,
    spec: ModifiedSpec,
    grid=DEFAULT_GRID,
    delta: float = 0.025,
    eps: float = 1e-4,
    seed: int = 0,
) -> DichotomyResult:
    """Trace equilibria of the block's modified game and decide the branch.

    A1 iff the discounted time spent in D from s_D at the last grid point is
    at least 1 - BRANCH_TOL. The payoff condition recorded for A1 is
    U(D)/t(D) >= v̄(s_D) - delta per player; for A2 it is the exit-value
    inequality at the chosen lam0 (largest grid point where it holds).
    """
    game, D, vbar = rgame.game, rgame.block, rgame.values
    sD, witness = block_anchor(game, D)
    grid = tuple(float(x) for x in grid)
    trace = trace_equilibria(game, spec.with_start(sD), grid, eps=eps, seed=seed)
    bad = [r.lam for r in trace if not r.certified]
    if bad:
        raise SolverError(f"equilibrium trace not certified at lambda {bad}")
    times, in_block, exits = [], [], []
    for r in trace:
        occ = occupation_stationary(game, sD, r.lam, r.profile)
        bd = block_breakdown(game, occ, spec.per_player[0].partition.blocks)
        t = float(bd.times[0])
        times.append(t)
        in_block.append(bd.payoffs[0] / t if t > 0 else np.zeros(game.n_players))
        if witness is not None:
            exits.append(exit_value(game, D, witness, r.profile, vbar)[0])
    times = np.array(times)
    in_block = np.array(in_block)
    last = occupation_stationary(game, sD, trace[-1].lam, trace[-1].profile).state_times()
    branch = "A1" if times[-1] >= 1.0 - BRANCH_TOL else "A2"
    target = vbar[:, sD]
    lam0 = None
    ev = np.array(exits) if exits else None
    if branch == "A1":
        ok = in_block[-1] >= target - delta
    else:
        ok_rows = [k for k in range(len(grid)) if np.all(ev[k] >= target - delta)]
        lam0 = ok_rows[-1] if ok_rows else None
        ok = ev[lam0] >= target - delta if lam0 is not None else np.zeros(game.n_players, dtype=bool)
    return DichotomyResult(
        D, sD, witness, branch, float(times[-1]), grid, times, in_block, ev,
        [r.profile for r in trace], last, np.asarray(ok), lam0,
    )


# ---------------------------------------------------------------------------------
# irreducible classes


def recurrent_classes(P: np.ndarray) -> list[frozenset[int]]:
    n = P.shape[0]
    k, labels = connected_components(P > 0.0, directed=True, connection="strong")
    out = []
    for c in range(k):
        members = np.nonzero(labels == c)[0]
        leaves = (P[np.ix_(members, np.setdiff1d(np.arange(n), members))] > 0.0).any()
        if not leaves:
            out.append(frozenset(int(s) for s in members))
    return sorted(out, key=min)


def absorption_probabilities(P: np.ndarray, start: int, classes: list[frozenset[int]]) -> np.ndarray:
    """Probability of ending in each recurrent class from ``start``."""
    n = P.shape[0]
    rec = set().union(*classes) if classes else set()
    trans = [s for s in range(n) if s not in rec]
    out = np.zeros(len(classes))
    if start in rec:
        for k, C in enumerate(classes):
            out[k] = float(start in C)
        return out
    idx = {s: k for k, s in enumerate(trans)}
    A = np.eye(len(trans)) - P[np.ix_(trans, trans)]
    for k, C in enumerate(classes):
        b = P[np.ix_(trans, sorted(C))].sum(axis=1)
        out[k] = np.linalg.solve(A, b)[idx[start]]
    return out


def irreducible_sets(
    game: StochasticGame, D, x1: StationaryProfile, start=None, state_times: np.ndarray | None = None
) -> list[tuple[frozenset[int], float]]:
    """Recurrent classes of the chain induced by ``x1`` that lie inside D,
    with weights beta. With ``state_times`` beta is the discounted time spent
    in each class; otherwise it is the absorption probability from ``start``
    (default: the smallest state of D)."""
    D = frozenset(game.state_index(s) for s in D)
    _, P, _ = game.kernel(x1)
    classes = [C for C in recurrent_classes(P) if C <= D]
    if state_times is not None:
        betas = [float(state_times[list(C)].sum()) for C in classes]
    else:
        s = min(D) if start is None else game.state_index(start)
        allc = recurrent_classes(P)
        probs = absorption_probabilities(P, s, allc)
        betas = [float(probs[allc.index(C)]) for C in classes]
    if sum(betas) > 1.0 + 1e-6:
        raise PipelineError("class weights exceed one")
    return list(zip(classes, betas))


def class_average(game: StochasticGame, x1: StationaryProfile, C) -> np.ndarray:
    """Long-run average payoff of x1 inside the recurrent class C (stationary
    distribution of the chain restricted to C)."""
    pi, P, r = game.kernel(x1)
    idx = sorted(C)
    Pc = P[np.ix_(idx, idx)]
    n = len(idx)
    A = np.vstack([Pc.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    mu, *_ = np.linalg.lstsq(A, b, rcond=None)
    return mu @ r[idx]


# ---------------------------------------------------------------------------------
# reaching a target state


def reach_choices(game: StochasticGame, D, target) -> dict[int, int]:
    """Pure joint action (as a row) per state of D from which ``target`` is
    reached almost surely without leaving D. Built layer by layer on the
    almost-sure region, so every chosen row stays in the region and moves
    closer to the target with positive probability."""
    D = frozenset(game.state_index(s) for s in D)
    tgt = game.state_index(target)
    region = almost_sure_reach(game, D, [tgt])
    inside = np.zeros(game.n_states, dtype=bool)
    inside[list(region)] = True
    support = game.Q > 0.0
    safe = ~(support & ~inside[None, :]).any(axis=1)
    won = {tgt}
    choice: dict[int, int] = {}
    while True:
        added = False
        mask = np.zeros(game.n_states, dtype=bool)
        mask[list(won)] = True
        for s in sorted(region - won):
            for row in game.rows(s):
                if safe[row] and support[row, mask].any():
                    choice[s] = row
                    break
        new = set(choice) - won
        if new:
            won |= new
            added = True
        if not added:
            break
    return choice


def profile_from_rows(game: StochasticGame, rows: dict[int, int], base: StationaryProfile) -> StationaryProfile:
    """``base`` with the pure joint actions ``rows`` substituted at their states."""
    strategies = []
    for i in range(game.n_players):
        probs = list(base[i].probs)
        for s, row in rows.items():
            v = np.zeros(game.n_actions(s, i))
            v[game.pair_actions[row, i]] = 1.0
            probs[s] = v
        strategies.append(StationaryStrategy(tuple(probs)))
    return StationaryProfile(tuple(strategies))


def mix_profiles(a: StationaryProfile, b: StationaryProfile, w: float) -> StationaryProfile:
    """(1-w) a + w b state by state."""
    return StationaryProfile(
        tuple(
            StationaryStrategy(tuple((1.0 - w) * p + w * q for p, q in zip(sa.probs, sb.probs)))
            for sa, sb in zip(a.strategies, b.strategies)
        )
    )


def reach_probability(game: StochasticGame, profile: StationaryProfile, D, target) -> np.ndarray:
    """Per state of D, probability of hitting ``target`` before leaving D."""
    D = sorted(game.state_index(s) for s in D)
    tgt = game.state_index(target)
    _, P, _ = game.kernel(profile)
    others = [s for s in D if s != tgt]
    out = np.zeros(game.n_states)
    out[tgt] = 1.0
    if others:
        A = np.eye(len(others)) - P[np.ix_(others, others)]
        b = P[others, tgt]
        out[others] = np.linalg.lstsq(A, b, rcond=None)[0]
    return out


# ---------------------------------------------------------------------------------
# block automata


@dataclass(eq=False)
class SigmaK:
    """Cycle over irreducible classes: travel to class l, play x1 there for
    n_l stages, move on. Memory (l, mode, counter) with mode 0 = travel."""

    block: frozenset[int]
    classes: list[frozenset[int]]
    betas: np.ndarray
    K: int
    lengths: list[int]
    x1: StationaryProfile
    travel: list[StationaryProfile]
    target: np.ndarray  # sum_l beta_l * gamma(C_l, x1), normalized by sum beta

    def profile_for(self, memory, s: int) -> StationaryProfile:
        l, mode, _ = memory
        if mode == 1 or s in self.classes[l]:
            return self.x1
        return self.travel[l]

    def step(self, memory, s: int, t: int):
        l, mode, c = memory
        L = len(self.classes)
        if mode == 0 and s not in self.classes[l]:
            return memory
        c += 1
        if c >= self.lengths[l]:
            return ((l + 1) % L, 0, 0)
        return (l, 1, c)

    initial = (0, 0, 0)

    def automata(self) -> tuple[AutomatonStrategy, ...]:
        def make(i):
            return AutomatonStrategy(
                self.initial,
                lambda m, s: self.profile_for(m, s)[i].probs[s],
                lambda m, s, a, t: self.step(m, s, t),
                label=f"sigma_K[{i}]",
            )

        return tuple(make(i) for i in range(len(self.x1.strategies)))


def build_sigma_K(
    game: StochasticGame,
    D,
    classes,
    betas,
    x1: StationaryProfile,
    K: int,
    delta: float = 1.0,
) -> SigmaK:
    """Cycle automaton for branch A1. Travel to class l uses
    y = (1 - delta) x1 + delta * rho_l, where rho_l is a pure profile that
    reaches the class entry almost surely inside D (delta = 1 travels by
    rho_l alone)."""
    D = frozenset(game.state_index(s) for s in D)
    keep = [(frozenset(C), float(b)) for C, b in zip(classes, betas) if b > 1e-12]
    if not keep:
        raise PipelineError("no irreducible class with positive weight")
    classes = [C for C, _ in keep]
    betas = np.array([b for _, b in keep])
    travel = []
    for C in classes:
        entry = min(C)
        rows = reach_choices(game, D, entry)
        rho = profile_from_rows(game, rows, x1)
        y = mix_profiles(x1, rho, delta)
        reach = reach_probability(game, y, D, entry)
        if np.any(reach[sorted(D)] < 1.0 - 1e-9):
            raise PipelineError(f"no travel profile reaches state {game.states[entry]} from all of the block")
        travel.append(y)
    if len(classes) == 1:
        lengths = [1]
    else:
        lengths = [max(1, math.ceil(b * K)) for b in betas]
    gammas = np.array([class_average(game, x1, C) for C in classes])
    target = betas @ gammas / betas.sum()
    return SigmaK(D, classes, betas, int(K), lengths, x1, travel, target)


@dataclass(eq=False)
class ExitAutomaton:
    """Branch A2: reach s_D with a pure profile; at s_D the witness exits with
    probability eta per visit while the others follow x_{lam0}; after
    ``limit`` visits without an exit the witness is punished."""

    block: frozenset[int]
    witness: Witness
    eta: float
    limit: int
    reach: StationaryProfile  # pure, used inside D away from s_D
    anchor_profile: StationaryProfile  # prescription at s_D
    exit_q: float  # exit probability of one exit-action stage at s_D
    punish: StationaryProfile  # stub continuation after giving up
    lam0: float

    initial = 0

    def profile_for(self, memory, s: int) -> StationaryProfile:
        if memory == "give_up":
            return self.punish
        return self.anchor_profile if s == self.witness.state else self.reach

    def step(self, memory, s: int, t: int):
        if memory == "give_up":
            return memory
        if s == self.witness.state and t in self.block:
            memory += 1
            if memory >= self.limit:
                return "give_up"
        return memory

    def automata(self) -> tuple[AutomatonStrategy, ...]:
        def make(i):
            return AutomatonStrategy(
                self.initial,
                lambda m, s: self.profile_for(m, s)[i].probs[s],
                lambda m, s, a, t: self.step(m, s, t),
                label=f"exit[{i}]",
            )

        return tuple(make(i) for i in range(len(self.reach.strategies)))

    def closed_form_exit(self) -> float:
        """P(exit within ``limit`` visits) = 1 - (1 - eta q)^limit."""
        return 1.0 - (1.0 - self.eta * self.exit_q) ** self.limit


def choose_eta(q: float, delta: float, monitored: bool, max_power: int = 30) -> float:
    """Largest eta = 2^-k with (1 - eta q)^ceil(1/eta^2) <= delta, and, when the
    others mix at s_D (so deviations there are caught only statistically),
    eta <= delta / DETECT_DELAY."""
    for k in range(max_power + 1):
        eta = 2.0 ** (-k)
        if monitored and eta > delta / DETECT_DELAY:
            continue
        if eta * q >= 1.0:
            return eta
        limit = math.ceil(1.0 / eta**2)
        if limit * math.log1p(-eta * q) <= math.log(delta):
            return eta
    raise PipelineError("no admissible eta: exit probability too small")


def build_exit_strategy(
    game: StochasticGame,
    D,
    witness: Witness | None,
    x_lam0: StationaryProfile,
    eta: float | None = None,
    delta: float = 0.025,
    lam0: float = float("nan"),
    punish: StationaryProfile | None = None,
) -> ExitAutomaton:
    if witness is None:
        raise PipelineError("exit strategy needs a strongly controllable block with a witness")
    D = frozenset(game.state_index(s) for s in D)
    i, sD, exit_a = witness.player, witness.state, witness.action
    rows = reach_choices(game, D, sD)
    missing = [game.states[s] for s in D if s != sD and s not in rows]
    if missing:
        raise PipelineError(f"s_D is not reached almost surely from {missing}")
    reach = profile_from_rows(game, rows, x_lam0)
    _, q = exit_value(game, D, witness, x_lam0, np.zeros((game.n_players, game.n_states)))
    if q <= 0.0:
        raise PipelineError("exit action never leaves the block against x_lam0")
    monitored = any(not np.isclose(x_lam0[j].probs[sD].max(), 1.0) for j in range(game.n_players) if j != i)
    if eta is None:
        eta = choose_eta(q, delta, monitored)
    if not 0.0 < eta <= 1.0:
        raise ValueError("eta must lie in (0, 1]")
    own = x_lam0[i].probs[sD].copy()
    own[exit_a] = 0.0
    n = own.size
    if own.sum() <= 0.0:
        own = np.ones(n)
        own[exit_a] = 0.0
    if own.sum() <= 0.0:
        mixed = np.eye(n)[exit_a]
    else:
        mixed = (1.0 - eta) * own / own.sum() + eta * np.eye(n)[exit_a]
    strategies = list(x_lam0.strategies)
    probs = list(strategies[i].probs)
    probs[sD] = mixed
    strategies[i] = StationaryStrategy(tuple(probs))
    anchor = StationaryProfile(tuple(strategies))
    limit = math.ceil(1.0 / eta**2)
    return ExitAutomaton(D, witness, float(eta), limit, reach, anchor, q, punish if punish is not None else x_lam0, lam0)


def exit_probability(game: StochasticGame, auto: ExitAutomaton, start=None) -> float:
    """Exact probability that the exit automaton leaves D before giving up,
    from the product chain of the automata with D's outside made absorbing."""
    s0 = auto.witness.state if start is None else game.state_index(start)
    chain = build_chain(game, auto.automata(), s0)
    n = chain.size
    P = chain.P.tocsr()
    outside = np.array([s not in auto.block for s in chain.node_state])
    gave_up = np.array([mem[0] == "give_up" for mem, _ in chain.nodes])
    done = outside | gave_up
    trans = np.nonzero(~done)[0]
    if trans.size == 0:
        return float(outside[0])
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    A = sp.identity(trans.size, format="csc") - P[trans][:, trans].tocsc()
    b = np.asarray(P[trans][:, np.nonzero(outside)[0]].sum(axis=1)).ravel()
    x = spla.spsolve(A, b) if trans.size > 1 else b / A.toarray()[0, 0]
    x = np.atleast_1d(x)
    pos = {int(k): j for j, k in enumerate(trans)}
    return float(x[pos[0]]) if 0 in pos else float(outside[0])


# ---------------------------------------------------------------------------------
# assembly


@dataclass(eq=False)
class BlockPlan:
    block: frozenset[int]
    dichotomy: DichotomyResult | None
    artifact: SigmaK | ExitAutomaton

    @property
    def branch(self) -> str:
        return "A1" if isinstance(self.artifact, SigmaK) else "A2"


@dataclass(eq=False)
class SigmaStar:
    game: StochasticGame
    partition: Partition
    plans: list[BlockPlan]
    values: np.ndarray  # uniform min-max values, players x states
    eps: float
    classification: ClassificationReport | None = None
    notes: list[str] = field(default_factory=list)

    def plan_of(self, s: int) -> BlockPlan:
        for p in self.plans:
            if s in p.block:
                return p
        raise KeyError(s)

    def memory_bound(self) -> int:
        """Product of the block automata memory sizes (on-path part only)."""
        total = 1
        for p in self.plans:
            a = p.artifact
            if isinstance(a, SigmaK):
                total *= max(1, sum(a.lengths)) * 2 * len(a.classes)
            else:
                total *= a.limit + 1
        return total

    def on_path_automata(self) -> tuple[AutomatonStrategy, ...]:
        """Dispatcher without monitoring: memory (block index, block memory),
        reset to the block's initial memory on every block entry."""
        index = self.partition.index()
        arts = [self.plan_of(min(b)).artifact for b in self.partition.blocks]

        def local(m, s):
            k = index[s]
            return m[1] if m[0] == k else arts[k].initial

        def make(i):
            def emit(m, s):
                return arts[index[s]].profile_for(local(m, s), s)[i].probs[s]

            def update(m, s, a, t):
                k = index[s]
                nxt = arts[k].step(local(m, s), s, t)
                if index[t] != k:
                    return (index[t], arts[index[t]].initial)
                return (k, nxt)

            return AutomatonStrategy((-1, None), emit, update, label=f"sigma*[{i}]")

        return tuple(make(i) for i in range(self.game.n_players))

    def constants(self) -> list[dict]:
        g = self.game
        out = []
        for p in self.plans:
            a = p.artifact
            entry = {"block": [g.states[s] for s in sorted(p.block)], "branch": p.branch}
            if isinstance(a, SigmaK):
                entry.update(
                    K0=a.K,
                    classes=[[g.states[s] for s in sorted(C)] for C in a.classes],
                    beta=[float(b) for b in a.betas],
                    lengths=a.lengths,
                    target=[float(x) for x in a.target],
                    x1=profile_to_json(g, a.x1),
                )
            else:
                pl, st, ac = a.witness.names(g)
                entry.update(
                    eta=a.eta,
                    give_up_after=a.limit,
                    lambda0=a.lam0,
                    witness={"player": pl, "state": st, "action": ac},
                    exit_q=float(a.exit_q),
                    anchor_profile=profile_to_json(g, a.anchor_profile),
                )
            if p.dichotomy is not None:
                entry["dichotomy"] = p.dichotomy.to_json(g)
            out.append(entry)
        return out


def _tune_K(rgame: RestrictedGame, plan: SigmaK, anchor: int, eps: float, delta: float) -> SigmaK:
    """Double K until the exact long-run average of sigma_K from s_D is within
    eps * R of its target."""
    if len(plan.classes) == 1:
        return plan
    g = rgame.game
    R = g.payoff_bound
    K = plan.K
    while True:
        cand = build_sigma_K(g, plan.block, plan.classes, plan.betas, plan.x1, K, delta)
        cycle = sum(cand.lengths) + 4 * g.n_states * len(cand.classes)
        N = 20 * cycle
        try:
            avg = build_chain(g, cand.automata(), anchor).average_payoffs([N])[N]
        except ChainTooLarge:
            return cand
        if np.abs(avg - cand.target).max() <= eps * R or K >= K_MAX:
            return cand
        K *= 2


def assemble_sigma_star(game: StochasticGame, plans: list[BlockPlan], values, eps: float, classification=None) -> SigmaStar:
    blocks = tuple(p.block for p in plans)
    covered = set().union(*blocks) if blocks else set()
    if covered != set(range(game.n_states)):
        missing = [game.states[s] for s in range(game.n_states) if s not in covered]
        raise PipelineError(f"no block automaton for states {missing}")
    part = Partition(blocks)
    return SigmaStar(game, part, plans, np.asarray(values), eps, classification)


def uniform_minmax_values(game: StochasticGame, grid=DEFAULT_GRID) -> np.ndarray:
    return np.array([uniform_value(game, i, "minmax", grid).values for i in range(game.n_players)])


def synthesize(
    game: StochasticGame,
    eps: float = 0.1,
    grid=DEFAULT_GRID,
    seed: int = 0,
    values: np.ndarray | None = None,
    delta: float | None = None,
) -> SigmaStar:
    """Run the whole pipeline. Raises PipelineError for games that fail the
    strongly-controllable test."""
    delta = eps / 4.0 if delta is None else delta
    vbar = uniform_minmax_values(game, grid) if values is None else np.asarray(values, dtype=float)
    report = classify(game, vbar)
    if not report.strongly_controllable:
        bad = [[game.states[s] for s in sorted(D)] for D, tag, _ in report.tags if tag == "neither"]
        raise PipelineError(f"game is not strongly controllable; offending blocks {bad}")
    plans = []
    for D, tag, witness in report.tags:
        rg = restrict(game, D, vbar)
        spec = step1_spec(rg.game, D, vbar, lam=grid[-1])
        if not check_property_sufficient(rg.game, spec.per_player[0].partition):
            raise PipelineError("restricted game fails the bounded-switching check")
        dich = dichotomy(rg, spec, grid, delta=delta, seed=seed)
        if dich.branch == "A1":
            x1 = dich.limit_profile
            pairs = irreducible_sets(rg.game, D, x1, state_times=dich.state_times)
            if not pairs:
                raise PipelineError("A1 block without an irreducible class inside it")
            art = build_sigma_K(rg.game, D, [c for c, _ in pairs], [b for _, b in pairs], x1, K_START)
            art = _tune_K(rg, art, dich.anchor, eps, 1.0)
        else:
            if dich.lam0_index is None:
                raise PipelineError("no grid point satisfies the exit-value inequality")
            x0 = dich.profiles[dich.lam0_index]
            i = witness.player
            punish = coalition_profile(rg.game, discounted_minmax(rg.game, i, grid[-1]), base=x0)
            art = build_exit_strategy(rg.game, D, witness, x0, delta=delta, lam0=dich.grid[dich.lam0_index], punish=punish)
        plans.append(BlockPlan(D, dich, art))
    return assemble_sigma_star(game, plans, vbar, eps, report)


def verify_uniform_eq(sigma: SigmaStar, eps: float | None = None, **kwargs):
    """See :func:`modgame.playout.verify_uniform_eq`."""
    from .playout import verify_uniform_eq as _verify

    return _verify(sigma, eps, **kwargs)
