"""Best responses, stationary equilibria of modified games, and min-max values."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .game_model import (
    StationaryProfile,
    StationaryStrategy,
    StochasticGame,
    pure_strategy,
    uniform_profile,
    uniform_strategy,
)
from .lp import LPError, linprog_max, matrix_game
from .modified import ModifiedSpec, modified_payoff, modified_payoff_profile
from .occupancy import OccupationVector, equivalent_stationary, mixture_stationary, occupation_stationary

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(1.0 - 2.0 ** (-k) for k in range(4, 12))


class SolverError(RuntimeError):
    pass


# ---------------------------------------------------------------------------------
# induced single-controller problems


@dataclass(eq=False)
class InducedMDP:
    """Player ``player``'s decision problem when everybody else is fixed.

    Rows are the player's (state, action) pairs in the flat layout of the game.
    """

    player: int
    state_of: np.ndarray
    R: np.ndarray  # rows x players: expected stage payoffs
    Q: np.ndarray  # rows x states
    offsets: np.ndarray  # offsets[s]..offsets[s+1] are the rows of state s

    def rows(self, s: int) -> range:
        return range(int(self.offsets[s]), int(self.offsets[s + 1]))


def induced_mdp(game: StochasticGame, player, profile: StationaryProfile) -> InducedMDP:
    i = game.player_index(player)
    w = np.ones(game.n_pairs)
    for j, strat in enumerate(profile.strategies):
        if j != i:
            w *= strat.flat()[game._flat_index[:, j]]
    idx = game._flat_index[:, i]
    off = game._action_offsets[i]
    n = int(off[-1])
    R = np.zeros((n, game.n_players))
    Q = np.zeros((n, game.n_states))
    np.add.at(R, idx, w[:, None] * game.U)
    np.add.at(Q, idx, w[:, None] * game.Q)
    state_of = np.repeat(np.arange(game.n_states), np.diff(off))
    return InducedMDP(i, state_of, R, Q, off.copy())


def _evaluate_policy(mdp: InducedMDP, choice: np.ndarray, reward: np.ndarray, lam: float) -> np.ndarray:
    rows = mdp.offsets[:-1] + choice
    n = choice.size
    A = np.eye(n) - lam * mdp.Q[rows]
    return np.linalg.solve(A, (1.0 - lam) * reward[rows])


def solve_mdp(mdp: InducedMDP, reward: np.ndarray, lam: float, maximize: bool = True, max_iter: int = 1000):
    """Policy iteration. Returns (values per state, chosen action index per state)."""
    sign = 1.0 if maximize else -1.0
    r = sign * reward
    n = mdp.offsets.size - 1
    choice = np.zeros(n, dtype=int)
    v = _evaluate_policy(mdp, choice, r, lam)
    for _ in range(max_iter):
        qv = (1.0 - lam) * r + lam * (mdp.Q @ v)
        improved = False
        for s in range(n):
            lo, hi = int(mdp.offsets[s]), int(mdp.offsets[s + 1])
            best = lo + int(np.argmax(qv[lo:hi]))
            if qv[best] > qv[lo + choice[s]] + 1e-12 * (1.0 + abs(qv[best])):
                choice[s] = best - lo
                improved = True
        if not improved:
            break
        v = _evaluate_policy(mdp, choice, r, lam)
    return sign * v, choice


def mdp_best_response(game: StochasticGame, player, profile: StationaryProfile, lam: float):
    """Classical discounted best response: (pure strategy, values per state)."""
    i = game.player_index(player)
    mdp = induced_mdp(game, i, profile)
    v, choice = solve_mdp(mdp, mdp.R[:, i], lam)
    return pure_strategy(game, i, list(choice)), v


# ---------------------------------------------------------------------------------
# modified best response


def _strategy_from_times(game: StochasticGame, i: int, mdp: InducedMDP, t: np.ndarray) -> StationaryStrategy:
    probs = []
    for s in range(game.n_states):
        seg = np.clip(t[mdp.rows(s).start:mdp.rows(s).stop], 0.0, None)
        total = seg.sum()
        if total <= 1e-15:
            probs.append(np.full(seg.size, 1.0 / seg.size))
        else:
            probs.append(seg / total)
    return StationaryStrategy(tuple(probs))


def modified_best_response_lp(game: StochasticGame, spec: ModifiedSpec, player, opponents: StationaryProfile):
    """Solve the best-response LP. Returns (strategy, LP value, player times)."""
    i = game.player_index(player)
    lam = spec.discount(i)
    ps = spec.per_player[i]
    mdp = induced_mdp(game, i, opponents)
    n_rows = mdp.R.shape[0]
    blocks = ps.partition.blocks
    nb = len(blocks)
    nvar = n_rows + nb
    # balance: sum_a t(s,a) - lam sum_rows t(row) Q(row, s) = (1-lam) 1{s = s0}
    A_eq = np.zeros((game.n_states, nvar))
    A_eq[mdp.state_of, np.arange(n_rows)] += 1.0
    A_eq[:, :n_rows] -= lam * mdp.Q.T
    b_eq = np.zeros(game.n_states)
    b_eq[spec.s0] = 1.0 - lam
    A_ub = np.zeros((2 * nb, nvar))
    b_ub = np.zeros(2 * nb)
    r = mdp.R[:, i]
    for k, b in enumerate(blocks):
        mask = np.isin(mdp.state_of, list(b)).astype(float)
        A_ub[2 * k, n_rows + k] = 1.0
        A_ub[2 * k, :n_rows] = -r * mask
        A_ub[2 * k + 1, n_rows + k] = 1.0
        A_ub[2 * k + 1, :n_rows] = -ps.cutoffs[k] * mask
    c = np.zeros(nvar)
    c[n_rows:] = 1.0
    res = linprog_max(c, A_ub, b_ub, A_eq, b_eq, free=range(n_rows, nvar))
    if not res.ok:
        raise SolverError(f"best-response LP for player {game.players[i]} is {res.status}")
    t = np.clip(res.x[:n_rows], 0.0, None)
    return _strategy_from_times(game, i, mdp, t), res.value, t


def modified_best_response(game: StochasticGame, spec: ModifiedSpec, player, opponents: StationaryProfile):
    """Best stationary reply in the modified game: (strategy, value).

    The returned value is what the recovered strategy earns (it agrees with
    the LP optimum up to solver round-off).
    """
    i = game.player_index(player)
    strat, value, _ = modified_best_response_lp(game, spec, i, opponents)
    achieved = modified_payoff(
        game, spec, occupation_stationary(game, spec.s0, spec.discount(i), opponents.replace(i, strat)), i
    )
    if abs(achieved - value) > 1e-6 * game.payoff_bound:
        raise SolverError(f"recovered strategy earns {achieved}, LP promised {value}")
    return strat, achieved


def best_response_gaps(game: StochasticGame, spec: ModifiedSpec, profile: StationaryProfile):
    """(modified payoffs, best-response values, best responses, gaps) at ``profile``."""
    pay = modified_payoff_profile(game, spec, profile)
    values = np.zeros(game.n_players)
    brs = []
    for i in range(game.n_players):
        strat, val, _ = modified_best_response_lp(game, spec, i, profile)
        brs.append(strat)
        values[i] = val
    return pay, values, brs, np.maximum(values - pay, 0.0)


# ---------------------------------------------------------------------------------
# search over products of simplices


def _moves(blocks: list[np.ndarray], frozen: set[int]):
    for k, p in enumerate(blocks):
        if k in frozen or p.size < 2:
            continue
        for a in range(p.size):
            for b in range(p.size):
                if a != b:
                    yield k, a, b


def _shift(blocks: list[np.ndarray], k: int, a: int, b: int, step: float):
    d = min(step, blocks[k][b])
    if d <= 0.0:
        return None
    new = [p.copy() for p in blocks]
    new[k][a] += d
    new[k][b] -= d
    return new


def pattern_search(f, blocks: list[np.ndarray], step: float = 0.25, min_step: float = 1e-10, budget: int = 5000, frozen=()):
    """Minimize ``f(blocks)`` over a product of probability simplices by moving
    probability mass between pairs of coordinates with halving step sizes."""
    frozen = set(frozen)
    best = [np.asarray(p, dtype=float).copy() for p in blocks]
    fbest = f(best)
    evals = 1
    while step >= min_step and evals < budget:
        improved = False
        for k, a, b in _moves(best, frozen):
            cand = _shift(best, k, a, b, step)
            if cand is None:
                continue
            fc = f(cand)
            evals += 1
            if fc < fbest - 1e-15:
                best, fbest, improved = cand, fc, True
                # keep going in the same direction while it helps
                while evals < budget:
                    nxt = _shift(best, k, a, b, step)
                    if nxt is None:
                        break
                    fn = f(nxt)
                    evals += 1
                    if fn < fbest - 1e-15:
                        best, fbest = nxt, fn
                    else:
                        break
            if evals >= budget:
                break
        if not improved:
            step /= 2.0
    return best, fbest, evals


def golden_refine(f, blocks: list[np.ndarray], rounds: int = 2, tol: float = 1e-12, frozen=()):
    """Golden-section line search along every pairwise mass transfer direction."""
    frozen = set(frozen)
    best = [p.copy() for p in blocks]
    fbest = f(best)
    g = (np.sqrt(5.0) - 1.0) / 2.0
    for _ in range(rounds):
        for k, a, b in list(_moves(best, frozen)):
            if a > b:
                continue
            total = best[k][a] + best[k][b]
            if total <= tol:
                continue

            def line(u, k=k, a=a, b=b, total=total):
                cand = [p.copy() for p in best]
                cand[k][a] = u
                cand[k][b] = total - u
                return f(cand), cand

            lo, hi = 0.0, total
            x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
            f1, c1 = line(x1)
            f2, c2 = line(x2)
            while hi - lo > tol * max(1.0, total):
                if f1 <= f2:
                    hi, x2, f2, c2 = x2, x1, f1, c1
                    x1 = hi - g * (hi - lo)
                    f1, c1 = line(x1)
                else:
                    lo, x1, f1, c1 = x1, x2, f2, c2
                    x2 = lo + g * (hi - lo)
                    f2, c2 = line(x2)
            for fc, cand in ((f1, c1), (f2, c2), line(lo), line(hi)):
                if fc < fbest - 1e-15:
                    best, fbest = cand, fc
    return best, fbest


def _profile_blocks(profile: StationaryProfile, players) -> list[np.ndarray]:
    return [p.copy() for i in players for p in profile[i].probs]


def _blocks_to_profile(game: StochasticGame, base: StationaryProfile, players, blocks) -> StationaryProfile:
    prof = base
    n = game.n_states
    for k, i in enumerate(players):
        probs = tuple(np.clip(b, 0.0, None) / np.clip(b, 0.0, None).sum() for b in blocks[k * n:(k + 1) * n])
        prof = prof.replace(i, StationaryStrategy(probs))
    return prof


def pure_profiles(game: StochasticGame, players) -> list[StationaryProfile]:
    """Every pure stationary profile of ``players`` (others uniform)."""
    base = uniform_profile(game)
    choices = [range(game.n_actions(s, i)) for i in players for s in range(game.n_states)]
    out = []
    for combo in itertools.product(*choices):
        prof = base
        for k, i in enumerate(players):
            prof = prof.replace(i, pure_strategy(game, i, list(combo[k * game.n_states:(k + 1) * game.n_states])))
        out.append(prof)
    return out


def pure_profile_count(game: StochasticGame, players) -> int:
    n = 1
    for i in players:
        for s in range(game.n_states):
            n *= game.n_actions(s, i)
    return n


# ---------------------------------------------------------------------------------
# stationary equilibria of modified games


@dataclass(eq=False)
class EquilibriumResult:
    profile: StationaryProfile
    payoffs: np.ndarray
    gaps: np.ndarray
    eps: float
    certified: bool
    restarts: int
    lam: float
    s0: int

    def to_json(self, game: StochasticGame) -> dict:
        from .game_model import profile_to_json

        return {
            "lambda": self.lam,
            "s0": game.states[self.s0],
            "certified": self.certified,
            "eps": self.eps,
            "payoffs": [float(x) for x in self.payoffs],
            "gaps": [float(x) for x in self.gaps],
            "restarts": self.restarts,
            "profile": profile_to_json(game, self.profile),
        }


def _lex_key(profile: StationaryProfile) -> tuple:
    return tuple(np.round(profile.flat(), 12))


def _damped_br(game, spec, profile, iters, tol):
    best_prof, best_gap = profile, np.inf
    for k in range(iters):
        pay, vals, brs, gaps = best_response_gaps(game, spec, profile)
        g = float(gaps.max())
        if g < best_gap:
            best_prof, best_gap = profile, g
        if g <= tol:
            break
        weight = 1.0 / (k + 2.0)
        nxt = profile
        for i in range(game.n_players):
            mixed = mixture_stationary(
                game, spec.s0, spec.discount(i), profile[i], brs[i], 1.0 - weight, player=i, opponents=profile
            )
            nxt = nxt.replace(i, mixed)
        profile = nxt
    return best_prof, best_gap


def _polish(game, spec, profile, budget):
    players = list(range(game.n_players))

    def f(blocks):
        prof = _blocks_to_profile(game, profile, players, blocks)
        return float(best_response_gaps(game, spec, prof)[3].max())

    blocks, fval, _ = pattern_search(f, _profile_blocks(profile, players), step=0.125, min_step=1e-9, budget=budget)
    return _blocks_to_profile(game, profile, players, blocks), fval


def stationary_equilibrium(
    game: StochasticGame,
    spec: ModifiedSpec,
    eps: float = 1e-4,
    restarts: int = 4,
    seed: int = 0,
    init: StationaryProfile | None = None,
    br_iters: int = 200,
    polish_budget: int = 4000,
    pure_limit: int = 256,
) -> EquilibriumResult:
    """Search for a stationary equilibrium of the modified game.

    Pure profiles are screened first; then damped best-response iteration in
    occupation space (fictitious-play weights) from up to ``restarts`` starts,
    each followed by a pattern search on the largest best-response gap; the
    search stops at the first start that certifies. A warm-start ``init`` is
    tried as is before any search. Every candidate is certified by the
    best-response LPs; the lexicographically smallest certified profile wins.
    If nothing certifies, the profile with the smallest gap is returned with
    ``certified=False``.
    """
    tol = eps * game.payoff_bound
    players = list(range(game.n_players))
    certified: list[StationaryProfile] = []
    fallback, fallback_gap = None, np.inf

    def consider(prof):
        nonlocal fallback, fallback_gap
        pay, vals, brs, gaps = best_response_gaps(game, spec, prof)
        g = float(gaps.max())
        if g <= tol:
            certified.append(prof)
        if g < fallback_gap:
            fallback, fallback_gap = prof, g
        return g

    if pure_profile_count(game, players) <= pure_limit:
        for prof in pure_profiles(game, players):
            consider(prof)
    used = 0
    if not certified and init is not None:
        consider(init)
    if not certified:
        rng = np.random.default_rng(seed)
        for r in range(max(1, restarts)):
            if certified:
                break
            used += 1
            if r == 0:
                start = init if init is not None else uniform_profile(game)
            else:
                start = StationaryProfile(
                    tuple(
                        StationaryStrategy(tuple(rng.dirichlet(np.ones(game.n_actions(s, i))) for s in range(game.n_states)))
                        for i in players
                    )
                )
            prof, g = _damped_br(game, spec, start, br_iters, tol)
            if g > tol:
                prof, g = _polish(game, spec, prof, polish_budget)
            consider(prof)
    if certified:
        best = min(certified, key=_lex_key)
    else:
        best = fallback
        log.warning("no certified equilibrium; best gap %.3g", fallback_gap)
    pay, _, _, gaps = best_response_gaps(game, spec, best)
    return EquilibriumResult(best, pay, gaps, eps, bool(gaps.max() <= tol), used, spec.lam, spec.s0)


def trace_equilibria(
    game: StochasticGame, spec: ModifiedSpec, grid=DEFAULT_GRID, eps: float = 1e-4, restarts: int = 4, seed: int = 0
) -> list[EquilibriumResult]:
    """Stationary equilibria along an increasing discount grid, warm-started
    from the previous point. Results are tied to ``spec.s0``."""
    grid = list(grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    out: list[EquilibriumResult] = []
    prev = None
    for lam in grid:
        res = stationary_equilibrium(game, spec.with_lambda(lam), eps, restarts, seed, init=prev)
        out.append(res)
        prev = res.profile
    return out


# ---------------------------------------------------------------------------------
# zero-sum values (player against the coordinated coalition of the others)


@dataclass(eq=False)
class ValueReport:
    values: np.ndarray
    lam: float
    iterations: int
    residual: float
    tol: float
    kind: str
    player: int
    strategy: StationaryStrategy | None = None  # player's max-min stationary strategy
    coalition: list[np.ndarray] = field(default_factory=list)  # per state, joint mixed action

    def to_json(self, game: StochasticGame) -> dict:
        return {
            "kind": self.kind,
            "player": game.players[self.player],
            "lambda": self.lam,
            "values": {s: float(v) for s, v in zip(game.states, self.values)},
            "iterations": self.iterations,
            "residual": self.residual,
            "tol": self.tol,
        }


def _state_matrices(game: StochasticGame, i: int):
    """Per state: payoff matrix R[a_i, b] and transitions Q[a_i, b, :] where b
    enumerates the other players' joint profiles."""
    mats = []
    others = [j for j in range(game.n_players) if j != i]
    for s in range(game.n_states):
        na = game.n_actions(s, i)
        sizes = [game.n_actions(s, j) for j in others]
        nb = int(np.prod(sizes)) if sizes else 1
        R = np.zeros((na, nb))
        Q = np.zeros((na, nb, game.n_states))
        for row in game.rows(s):
            acts = game.pair_actions[row]
            b = 0
            for j, size in zip(others, sizes):
                b = b * size + int(acts[j])
            R[acts[i], b] = game.U[row, i]
            Q[acts[i], b] = game.Q[row]
        mats.append((R, Q))
    return mats


def _solve_matrix(M: np.ndarray):
    if M.shape[1] == 1:
        k = int(np.argmax(M[:, 0]))
        x = np.zeros(M.shape[0])
        x[k] = 1.0
        return float(M[k, 0]), x, np.ones(1)
    if M.shape[0] == 1:
        k = int(np.argmin(M[0]))
        y = np.zeros(M.shape[1])
        y[k] = 1.0
        return float(M[0, k]), np.ones(1), y
    return matrix_game(M)


def _shapley(mats, v, lam):
    Tv = np.zeros(len(mats))
    X, Y = [], []
    for s, (R, Q) in enumerate(mats):
        M = (1.0 - lam) * R + lam * (Q @ v)
        Tv[s], x, y = _solve_matrix(M)
        X.append(x)
        Y.append(y)
    return Tv, X, Y


def _coalition_value(mats, X, lam):
    """Value of the coalition's minimization problem against fixed row mixtures."""
    n = len(mats)
    rs = [x @ R for x, (R, Q) in zip(X, mats)]
    qs = [np.einsum("a,abt->bt", x, Q) for x, (R, Q) in zip(X, mats)]
    choice = np.zeros(n, dtype=int)

    def evaluate(choice):
        P = np.array([qs[s][choice[s]] for s in range(n)])
        r = np.array([rs[s][choice[s]] for s in range(n)])
        return np.linalg.solve(np.eye(n) - lam * P, (1.0 - lam) * r)

    v = evaluate(choice)
    for _ in range(1000):
        changed = False
        for s in range(n):
            qv = (1.0 - lam) * rs[s] + lam * (qs[s] @ v)
            b = int(np.argmin(qv))
            if qv[b] < qv[choice[s]] - 1e-13 * (1.0 + abs(qv[b])):
                choice[s] = b
                changed = True
        if not changed:
            break
        v = evaluate(choice)
    return v


def _zero_sum(game: StochasticGame, player, lam: float, tol: float, max_iter: int, kind: str) -> ValueReport:
    if not 0.0 <= lam < 1.0:
        raise ValueError("discount factor must lie in [0, 1)")
    i = game.player_index(player)
    mats = _state_matrices(game, i)
    target = tol * (1.0 - lam) / (2.0 * lam) if lam > 0 else np.inf
    X = [np.full(R.shape[0], 1.0 / R.shape[0]) for R, _ in mats]
    v = _coalition_value(mats, X, lam)
    residual = np.inf
    it = 0
    try:
        for it in range(1, max_iter + 1):
            Tv, X, Y = _shapley(mats, v, lam)
            residual = float(np.abs(Tv - v).max())
            if residual <= target:
                v = Tv
                break
            # policy step (Hoffman-Karp): the coalition's best reply to the current mixtures
            w = _coalition_value(mats, X, lam)
            v = w if float((w - v).min()) >= -1e-12 else Tv
    except LPError as exc:
        raise SolverError(f"matrix game LP failed: {exc}") from None
    _, X, Y = _shapley(mats, v, lam)
    strategy = StationaryStrategy(tuple(np.clip(x, 0, None) / np.clip(x, 0, None).sum() for x in X))
    return ValueReport(v, lam, it, residual, tol, kind, i, strategy, Y)


def discounted_maxmin(game: StochasticGame, player, lam: float, tol: float = 1e-6, max_iter: int = 10_000) -> ValueReport:
    """Max-min value of ``player`` against the others acting as one adversary."""
    return _zero_sum(game, player, lam, tol, max_iter, "maxmin")


def discounted_minmax(game: StochasticGame, player, lam: float, tol: float = 1e-6, max_iter: int = 10_000) -> ValueReport:
    """Min-max value of ``player``. With the others coordinated the one-shot
    games are zero-sum, so this coincides with the max-min value."""
    return _zero_sum(game, player, lam, tol, max_iter, "minmax")


def coalition_profile(game: StochasticGame, report: ValueReport, base: StationaryProfile | None = None) -> StationaryProfile:
    """Product profile of the others built from the coalition's per-state
    marginals (exact when there is a single opponent)."""
    i = report.player
    others = [j for j in range(game.n_players) if j != i]
    prof = base if base is not None else uniform_profile(game)
    marg = {j: [] for j in others}
    for s, y in enumerate(report.coalition):
        sizes = [game.n_actions(s, j) for j in others]
        grid = np.asarray(y).reshape(sizes) if sizes else np.asarray(y)
        for k, j in enumerate(others):
            axes = tuple(a for a in range(len(sizes)) if a != k)
            m = grid.sum(axis=axes) if axes else grid
            m = np.clip(m, 0.0, None)
            marg[j].append(m / m.sum())
    for j in others:
        prof = prof.replace(j, StationaryStrategy(tuple(marg[j])))
    return prof


# ---------------------------------------------------------------------------------
# uniform values


@dataclass(eq=False)
class UniformValueEstimate:
    values: np.ndarray
    residuals: np.ndarray
    fallback: np.ndarray
    grid: tuple[float, ...]
    raw: np.ndarray  # grid x states
    kind: str
    player: int

    def to_json(self, game: StochasticGame) -> dict:
        return {
            "kind": self.kind,
            "player": game.players[self.player],
            "grid": list(self.grid),
            "values": {s: float(v) for s, v in zip(game.states, self.values)},
            "fit_residual": {s: float(v) for s, v in zip(game.states, self.residuals)},
            "fallback": {s: bool(v) for s, v in zip(game.states, self.fallback)},
            "discounted": [[float(x) for x in row] for row in self.raw],
        }


def extrapolate(grid, samples: np.ndarray, bound: float):
    """Weighted fit of c0 + c1 sqrt(1-lam) + c2 (1-lam) to each column of ``samples``.

    Returns (limits, max abs residual, fallback flags); columns whose fit is
    worse than 1e-2 * bound fall back to the last grid value.
    """
    h = 1.0 - np.asarray(grid, dtype=float)
    X = np.column_stack([np.ones_like(h), np.sqrt(h), h])
    # weight 1/(1-lam) so the points nearest to 1 dominate the intercept
    w = 1.0 / h
    coef, *_ = np.linalg.lstsq(X * w[:, None], samples * w[:, None], rcond=None)
    resid = np.abs(X @ coef - samples).max(axis=0)
    limits = coef[0].copy()
    fallback = resid > 1e-2 * bound
    limits[fallback] = samples[-1, fallback]
    return limits, resid, fallback


def uniform_value(game: StochasticGame, player, kind: str = "minmax", grid=DEFAULT_GRID, tol: float = 1e-6) -> UniformValueEstimate:
    if kind not in ("minmax", "maxmin"):
        raise ValueError("kind must be 'minmax' or 'maxmin'")
    grid = tuple(float(x) for x in grid)
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("grid must be strictly increasing")
    i = game.player_index(player)
    solver = discounted_minmax if kind == "minmax" else discounted_maxmin
    raw = np.array([solver(game, i, lam, tol).values for lam in grid])
    limits, resid, fallback = extrapolate(grid, raw, game.payoff_bound)
    if fallback.any():
        log.warning("uniform value fit fell back to last grid point for %d state(s)", int(fallback.sum()))
    return UniformValueEstimate(limits, resid, fallback, grid, raw, kind, i)


# ---------------------------------------------------------------------------------
# stationary min-max / max-min of the modified game


@dataclass(eq=False)
class StationaryValue:
    value: float
    profile: StationaryProfile  # minimizing opponents (minmax) or maximizing player (maxmin)
    evaluations: int
    heuristic: bool = True


def modified_minmax_stat(
    game: StochasticGame, spec: ModifiedSpec, player, budget: int = 3000, pure_limit: int = 10_000, seeds: int = 4
) -> StationaryValue:
    """min over the others' stationary profiles of the player's best modified
    payoff. The inner maximum is the exact LP; the outer minimum is a pattern
    search, so the result is an upper bound on the true stationary min-max."""
    i = game.player_index(player)
    others = [j for j in range(game.n_players) if j != i]
    if not others:
        strat, val = modified_best_response(game, spec, i, uniform_profile(game))
        return StationaryValue(val, uniform_profile(game).replace(i, strat), 1, heuristic=False)
    if pure_profile_count(game, others) > pure_limit:
        raise ValueError("too many pure profiles for the opponents")
    base = uniform_profile(game)

    def value_of(prof):
        return modified_best_response_lp(game, spec, i, prof)[1]

    candidates = [(value_of(p), k, p) for k, p in enumerate(pure_profiles(game, others))]
    shap = discounted_minmax(game, i, spec.discount(i))
    sp = coalition_profile(game, shap, base)
    candidates.append((value_of(sp), len(candidates), sp))
    candidates.append((value_of(base), len(candidates), base))
    candidates.sort(key=lambda c: (c[0], c[1]))
    evals = len(candidates)

    def f(blocks):
        return value_of(_blocks_to_profile(game, base, others, blocks))

    best_val, best_prof = candidates[0][0], candidates[0][2]
    for val, _, prof in candidates[:seeds]:
        blocks, fv, n = pattern_search(f, _profile_blocks(prof, others), budget=max(1, budget // seeds))
        evals += n
        if fv < best_val:
            best_val, best_prof = fv, _blocks_to_profile(game, base, others, blocks)
    return StationaryValue(best_val, best_prof, evals)


def modified_maxmin_stat(
    game: StochasticGame, spec: ModifiedSpec, player, budget: int = 3000, pure_limit: int = 10_000, seeds: int = 4
) -> StationaryValue:
    """max over the player's stationary strategies of the minimum modified
    payoff against the others' pure stationary profiles. The outer maximum is
    a pattern search with golden-section refinement, so the result is a lower
    bound on the true stationary max-min (up to search error)."""
    i = game.player_index(player)
    others = [j for j in range(game.n_players) if j != i]
    lam = spec.discount(i)
    if pure_profile_count(game, others) > pure_limit:
        raise ValueError("too many pure profiles for the opponents")
    opp = pure_profiles(game, others) if others else [uniform_profile(game)]

    def worst(prof_i: StationaryStrategy) -> float:
        vals = []
        for o in opp:
            occ = occupation_stationary(game, spec.s0, lam, o.replace(i, prof_i))
            vals.append(modified_payoff(game, spec, occ, i))
        return min(vals)

    def f(blocks):
        return -worst(StationaryStrategy(tuple(np.clip(b, 0, None) / np.clip(b, 0, None).sum() for b in blocks)))

    seeds_list = [p[i] for p in pure_profiles(game, [i])] if pure_profile_count(game, [i]) <= pure_limit else []
    seeds_list.append(uniform_strategy(game, i))
    seeds_list.append(discounted_maxmin(game, i, lam).strategy)
    scored = sorted(((f(list(s.probs)), k, s) for k, s in enumerate(seeds_list)), key=lambda c: (c[0], c[1]))
    evals = len(scored)
    best_f, best_blocks = scored[0][0], [p.copy() for p in scored[0][2].probs]
    for fv0, _, s in scored[:seeds]:
        blocks, fv, n = pattern_search(f, [p.copy() for p in s.probs], budget=max(1, budget // seeds))
        evals += n
        if fv < best_f:
            best_f, best_blocks = fv, blocks
    best_blocks, best_f = golden_refine(f, best_blocks)
    strat = StationaryStrategy(tuple(np.clip(b, 0, None) / np.clip(b, 0, None).sum() for b in best_blocks))
    return StationaryValue(-best_f, uniform_profile(game).replace(i, strat), evals)
