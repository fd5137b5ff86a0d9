"""Vectorized play-out of an assembled sigma* against probe deviators.

sigma* carries statistics that grow with the play (action-frequency monitors
and the punishment phase), so it is simulated rather than expanded into a
product chain. All plays of one call advance together, one stage at a time;
each play may carry its own deviator.

Monitoring. For every (state, player, action) the monitor keeps the sum of
(1{action played} - prescribed probability) and the sum of the prescribed
Bernoulli variances since the current block was entered. A player is flagged
when an action of prescribed probability zero is played, or when
|sum| > MONITOR_Z * sqrt(V log(V + e)) + MONITOR_C for some action.

Punishment. Once a player is flagged the others switch, for the rest of the
play, to a pure stationary coalition strategy that minimizes the flagged
player's PUNISH_LAMBDA-discounted payoff against the flagged player's
observed action frequencies (rounded to multiples of 1/FREQ_GRID), refreshed
every PUNISH_WINDOW stages.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .game_model import StationaryProfile, StationaryStrategy, StochasticGame
from .uniform import ExitAutomaton, SigmaK, SigmaStar
from .values import InducedMDP, solve_mdp

MONITOR_Z = 2.5
MONITOR_C = 3.0
PUNISH_WINDOW = 25
PUNISH_LAMBDA = 0.99
FREQ_GRID = 20


@dataclass(eq=False)
class Deviator:
    """Finite automaton for one player. ``emit[m, s]`` is its mixed action,
    ``follow[m, s]`` means "do what sigma* prescribes", and
    ``update[m, row, t]`` is the next memory after profile row and next state t.
    Player -1 marks the no-deviation baseline."""

    player: int
    label: str
    emit: np.ndarray  # k x S x A
    follow: np.ndarray  # k x S
    update: np.ndarray  # k x rows x S

    @property
    def size(self) -> int:
        return self.emit.shape[0]


def _amax(game: StochasticGame) -> int:
    return max(game.n_actions(s, i) for s in range(game.n_states) for i in range(game.n_players))


def _blank(game: StochasticGame, k: int):
    A = _amax(game)
    emit = np.zeros((k, game.n_states, A))
    emit[..., 0] = 1.0
    follow = np.ones((k, game.n_states), dtype=bool)
    update = np.repeat(np.arange(k)[:, None, None], game.n_pairs, axis=1).repeat(game.n_states, axis=2)
    return emit, follow, update


def baseline(game: StochasticGame) -> Deviator:
    emit, follow, update = _blank(game, 1)
    return Deviator(-1, "none", emit, follow, update)


def stationary_deviator(game: StochasticGame, player: int, strategy: StationaryStrategy, label: str) -> Deviator:
    emit, follow, update = _blank(game, 1)
    for s in range(game.n_states):
        p = strategy.probs[s]
        emit[0, s, :] = 0.0
        emit[0, s, : p.size] = p
    follow[:] = False
    return Deviator(player, label, emit, follow, update)


def one_shot_deviator(game: StochasticGame, player: int, state: int, action: int) -> Deviator:
    """Play ``action`` at the first visit to ``state``, follow sigma* otherwise."""
    emit, follow, update = _blank(game, 2)
    emit[0, state, :] = 0.0
    emit[0, state, action] = 1.0
    follow[0, state] = False
    for row in game.rows(state):
        update[0, row, :] = 1
    a = game.action_list(state, player)[action]
    return Deviator(player, f"one-shot {game.states[state]}:{a}", emit, follow, update)


def random_deviator(game: StochasticGame, player: int, rng: np.random.Generator, k: int, label: str) -> Deviator:
    """Random k-memory automaton: per (memory, state) a pure or Dirichlet-mixed
    action, or (with probability 0.3) deference to sigma*."""
    emit, follow, update = _blank(game, k)
    for m in range(k):
        for s in range(game.n_states):
            n = game.n_actions(s, player)
            emit[m, s, :] = 0.0
            if rng.random() < 0.5:
                emit[m, s, rng.integers(n)] = 1.0
            else:
                emit[m, s, :n] = rng.dirichlet(np.ones(n))
            follow[m, s] = k > 1 and rng.random() < 0.3
    if k > 1:
        update[:] = rng.integers(0, k, size=update.shape)
    return Deviator(player, label, emit, follow, update)


def _coalition_mdp(game: StochasticGame, target: int, freq: list[np.ndarray]):
    """The others' joint decision problem against a fixed stationary ``target``."""
    others = [j for j in range(game.n_players) if j != target]
    R, Q, offsets, combos = [], [], [0], []
    for s in range(game.n_states):
        sizes = [game.n_actions(s, j) for j in others]
        keys = list(itertools.product(*(range(n) for n in sizes)))
        index = {c: k for k, c in enumerate(keys)}
        r = np.zeros(len(keys))
        q = np.zeros((len(keys), game.n_states))
        for row in game.rows(s):
            acts = game.pair_actions[row]
            c = index[tuple(int(acts[j]) for j in others)]
            w = freq[s][acts[target]]
            r[c] += w * game.U[row, target]
            q[c] += w * game.Q[row]
        R.append(r)
        Q.append(q)
        offsets.append(offsets[-1] + len(keys))
        combos.append(keys)
    offs = np.array(offsets)
    mdp = InducedMDP(target, np.repeat(np.arange(game.n_states), np.diff(offs)), np.concatenate(R)[:, None], np.vstack(Q), offs)
    return mdp, others, combos


def punishment_profile(game: StochasticGame, target: int, freq: list[np.ndarray], lam: float = PUNISH_LAMBDA) -> StationaryProfile:
    """Pure stationary coalition strategy minimizing ``target``'s discounted
    payoff when ``target`` plays the stationary strategy ``freq``."""
    mdp, others, combos = _coalition_mdp(game, target, freq)
    _, choice = solve_mdp(mdp, mdp.R[:, 0], lam, maximize=False)
    strategies = []
    for j in range(game.n_players):
        if j == target:
            strategies.append(StationaryStrategy(tuple(np.asarray(f, dtype=float) for f in freq)))
            continue
        k = others.index(j)
        probs = []
        for s in range(game.n_states):
            v = np.zeros(game.n_actions(s, j))
            v[combos[s][choice[s]][k]] = 1.0
            probs.append(v)
        strategies.append(StationaryStrategy(tuple(probs)))
    return StationaryProfile(tuple(strategies))


@dataclass(eq=False)
class PlayoutResult:
    deviator_index: np.ndarray  # per play
    averages: dict[int, np.ndarray]  # horizon -> plays x players
    discounted: dict[float, np.ndarray]  # lambda -> plays x players
    punished: np.ndarray  # per play, flagged player or -1
    punish_stage: np.ndarray  # per play, stage of the flag or -1


class Playout:
    def __init__(self, sigma: SigmaStar):
        self.sigma = sigma
        g = self.game = sigma.game
        self.A = _amax(g)
        self.block_of = np.array([sigma.partition.index()[s] for s in range(g.n_states)])
        self.n_act = np.array([[g.n_actions(s, i) for i in range(g.n_players)] for s in range(g.n_states)])
        stride = np.ones((g.n_states, g.n_players), dtype=int)
        for s in range(g.n_states):
            for i in reversed(range(g.n_players - 1)):
                stride[s, i] = stride[s, i + 1] * self.n_act[s, i + 1]
        self.stride = stride
        self.row_start = np.array([g.rows(s).start for s in range(g.n_states)])
        self.cumQ = np.cumsum(g.Q, axis=1)
        self._profiles: list[np.ndarray] = []
        self._table = None
        self._pun_cache: dict = {}
        self.blocks = []
        for b in sigma.partition.blocks:
            art = sigma.plan_of(min(b)).artifact
            k = len(self.blocks)
            if isinstance(art, SigmaK):
                cls = np.zeros((len(art.classes), g.n_states), dtype=bool)
                for l, C in enumerate(art.classes):
                    cls[l, list(C)] = True
                self.blocks.append(
                    {
                        "kind": "cycle",
                        "x1": self._register(art.x1),
                        "travel": np.array([self._register(y) for y in art.travel]),
                        "classes": cls,
                        "lengths": np.array(art.lengths),
                    }
                )
            elif isinstance(art, ExitAutomaton):
                self.blocks.append(
                    {
                        "kind": "exit",
                        "anchor": art.witness.state,
                        "witness": art.witness.player,
                        "anchor_id": self._register(art.anchor_profile),
                        "reach_id": self._register(art.reach),
                        "limit": art.limit,
                    }
                )
            else:
                raise TypeError(f"unknown block artifact {type(art).__name__}")
            assert len(self.blocks) == k + 1

    def _register(self, profile: StationaryProfile) -> int:
        g = self.game
        arr = np.zeros((g.n_states, g.n_players, self.A))
        for i, strat in enumerate(profile.strategies):
            for s, p in enumerate(strat.probs):
                arr[s, i, : p.size] = p
        self._profiles.append(arr)
        self._table = None
        return len(self._profiles) - 1

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            self._table = np.stack(self._profiles)
        return self._table

    def _punish_ids(self, targets: np.ndarray, counts: np.ndarray) -> np.ndarray:
        """Punishment profile ids for flagged players ``targets`` given their
        action counts (m x S x A)."""
        g = self.game
        valid = np.arange(self.A)[None, None, :] < self.n_act[:, targets].T[:, :, None]
        c = np.where(valid, counts + 0.5, 0.0)
        f = c / c.sum(axis=2, keepdims=True)
        q = np.round(f * FREQ_GRID).astype(int)
        empty = q.sum(axis=2) == 0
        if empty.any():
            top = np.argmax(f, axis=2)
            q[empty, top[empty]] = 1
        keys = np.concatenate([targets[:, None], q.reshape(len(targets), -1)], axis=1)
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        ids = np.empty(len(uniq), dtype=int)
        for k, key in enumerate(uniq):
            tk = tuple(int(x) for x in key)
            pid = self._pun_cache.get(tk)
            if pid is None:
                target = tk[0]
                qq = np.asarray(tk[1:]).reshape(g.n_states, self.A)
                freq = [qq[s, : g.n_actions(s, target)] / qq[s].sum() for s in range(g.n_states)]
                pid = self._register(punishment_profile(g, target, freq))
                self._pun_cache[tk] = pid
            ids[k] = pid
        return ids[np.asarray(inverse).ravel()]

    def run(
        self,
        s0: int,
        deviators: list[Deviator],
        plays_per: list[int],
        horizon: int,
        checkpoints=(),
        lams=(),
        seed: int = 0,
    ) -> PlayoutResult:
        g = self.game
        P, S, A = g.n_players, g.n_states, self.A
        dev_idx = np.repeat(np.arange(len(deviators)), plays_per)
        n = dev_idx.size
        ar = np.arange(n)
        kmax = max(d.size for d in deviators)
        EMIT = np.zeros((len(deviators), kmax, S, A))
        FOLLOW = np.ones((len(deviators), kmax, S), dtype=bool)
        UPD = np.zeros((len(deviators), kmax, g.n_pairs, S), dtype=int)
        for k, d in enumerate(deviators):
            EMIT[k, : d.size] = d.emit
            FOLLOW[k, : d.size] = d.follow
            UPD[k, : d.size] = d.update
        dev_player = np.array([d.player for d in deviators])[dev_idx]
        has_dev = dev_player >= 0
        dp = np.where(has_dev, dev_player, 0)
        dmem = np.zeros(n, dtype=int)

        rng = np.random.default_rng(np.random.SeedSequence(seed))
        s = np.full(n, s0)
        blk = np.full(n, -1)
        l = np.zeros(n, dtype=int)
        mode = np.zeros(n, dtype=int)
        c = np.zeros(n, dtype=int)
        visits = np.zeros(n, dtype=int)
        Ssum = np.zeros((n, S, P, A))
        Vsum = np.zeros((n, S, P, A))
        counts = np.zeros((n, P, S, A))
        pun = np.full(n, -1)
        pun_stage = np.full(n, -1)
        pun_pid = np.zeros(n, dtype=int)

        checkpoints = sorted(set(int(h) for h in checkpoints if h <= horizon))
        averages = {}
        total = np.zeros((n, P))
        disc = {lam: np.zeros((n, P)) for lam in lams}
        weights = {lam: 1.0 - lam for lam in lams}
        onehot = np.eye(A)

        for stage in range(horizon):
            # block entry resets the block-local memory and the monitor
            entering = self.block_of[s] != blk
            if entering.any():
                blk[entering] = self.block_of[s[entering]]
                l[entering] = mode[entering] = c[entering] = visits[entering] = 0
                fresh = entering & (pun < 0)
                Ssum[fresh] = 0.0
                Vsum[fresh] = 0.0
                counts[fresh] = 0.0
            on_path = pun < 0
            pid = np.empty(n, dtype=int)
            playing = np.zeros(n, dtype=bool)
            for k, b in enumerate(self.blocks):
                m = (blk == k) & on_path
                if not m.any():
                    continue
                if b["kind"] == "cycle":
                    inC = b["classes"][l[m], s[m]]
                    pl = (mode[m] == 1) | inC
                    playing[m] = pl
                    pid[m] = np.where(pl, b["x1"], b["travel"][l[m]])
                else:
                    pid[m] = np.where(s[m] == b["anchor"], b["anchor_id"], b["reach_id"])
            pid[~on_path] = pun_pid[~on_path]
            table = self.table
            prescribed = table[pid, s]  # n x P x A
            actual = prescribed.copy()
            own = ~FOLLOW[dev_idx, dmem, s] & has_dev
            if own.any():
                actual[ar[own], dp[own]] = EMIT[dev_idx[own], dmem[own], s[own]]
            u = rng.random((n, P))
            cum = np.cumsum(actual, axis=2)
            a = (cum < u[:, :, None]).sum(axis=2)
            a = np.minimum(a, self.n_act[s] - 1)
            row = self.row_start[s] + (a * self.stride[s]).sum(axis=1)
            pay = g.U[row]
            total += pay
            for lam in lams:
                disc[lam] += weights[lam] * pay
                weights[lam] *= lam
            v = rng.random(n)
            t = (self.cumQ[row] <= v[:, None]).sum(axis=1)
            t = np.minimum(t, S - 1)

            # monitor
            chosen = np.take_along_axis(prescribed, a[:, :, None], axis=2)[:, :, 0]
            flag = chosen < 1e-12
            act_onehot = onehot[a]  # n x P x A
            idx = ar[on_path]
            if idx.size:
                st = s[idx]
                Ssum[idx, st] += act_onehot[idx] - prescribed[idx]
                Vsum[idx, st] += prescribed[idx] * (1.0 - prescribed[idx])
                V = Vsum[idx, st]
                bound = MONITOR_Z * np.sqrt(V * np.log(V + np.e)) + MONITOR_C
                flag[idx] |= (np.abs(Ssum[idx, st]) > bound).any(axis=2)
            counts[ar, :, s] += act_onehot

            # block automata updates for on-path plays
            gave_up = np.zeros(n, dtype=bool)
            for k, b in enumerate(self.blocks):
                m = (blk == k) & on_path
                if not m.any():
                    continue
                if b["kind"] == "cycle":
                    pl = playing[m]
                    cm = c[m] + pl
                    mm = np.where(pl, 1, mode[m])
                    done = pl & (cm >= b["lengths"][l[m]])
                    L = b["classes"].shape[0]
                    l[m] = np.where(done, (l[m] + 1) % L, l[m])
                    mode[m] = np.where(done, 0, mm)
                    c[m] = np.where(done, 0, cm)
                else:
                    stay = (s[m] == b["anchor"]) & (self.block_of[t[m]] == k)
                    visits[m] += stay
                    gu = visits[m] >= b["limit"]
                    if gu.any():
                        sub = np.nonzero(m)[0][gu]
                        gave_up[sub] = True
                        flag[sub] = False
                        flag[sub, b["witness"]] = True

            newly = on_path & flag.any(axis=1)
            if newly.any():
                who = np.argmax(flag, axis=1)
                pun[newly] = who[newly]
                pun_stage[newly] = stage
            refresh = (pun >= 0) & ((stage - pun_stage) % PUNISH_WINDOW == 0)
            if refresh.any():
                j = np.nonzero(refresh)[0]
                pun_pid[j] = self._punish_ids(pun[j], counts[j, pun[j]])

            dmem = UPD[dev_idx, dmem, row, t]
            s = t
            if stage + 1 in checkpoints:
                averages[stage + 1] = total / (stage + 1)
        return PlayoutResult(dev_idx, averages, disc, pun, pun_stage)


# ---------------------------------------------------------------------------------
# verification


Z99 = 2.5758293035489004


@dataclass(eq=False)
class ProbeOutcome:
    label: str
    player: int
    gains: dict[str, float]
    ci: dict[str, float]
    punished_share: float
    ok: bool

    def to_json(self, game: StochasticGame) -> dict:
        return {
            "probe": self.label,
            "player": game.players[self.player],
            "gains": self.gains,
            "ci": self.ci,
            "punished_share": self.punished_share,
            "ok": self.ok,
        }


@dataclass(eq=False)
class VerificationReport:
    eps: float
    bound: float
    s0: int
    floors: list[dict]
    probes: list[ProbeOutcome]
    false_alarm_rate: float
    exact_on_path: dict | None
    passed: bool

    @property
    def max_gain(self) -> float:
        return max((max(p.gains.values()) for p in self.probes), default=0.0)

    def to_json(self, game: StochasticGame) -> dict:
        return {
            "eps": self.eps,
            "payoff_bound": self.bound,
            "s0": game.states[self.s0],
            "passed": self.passed,
            "max_gain": self.max_gain,
            "gain_threshold": self.eps * self.bound,
            "floors": self.floors,
            "false_alarm_rate": self.false_alarm_rate,
            "exact_on_path": self.exact_on_path,
            "probes": [p.to_json(game) for p in self.probes],
        }

    def summary(self, game: StochasticGame) -> str:
        lines = [f"uniform eps-equilibrium check from {game.states[self.s0]} at eps={self.eps}: {'PASS' if self.passed else 'FAIL'}"]
        for f in self.floors:
            lines.append(
                f"  floor player {f['player']} {f['metric']}: {f['mean']:.4f} (floor {f['floor']:.4f}) {'ok' if f['ok'] else 'VIOLATED'}"
            )
        worst = sorted(self.probes, key=lambda p: -max(p.gains.values()))[:5]
        for p in worst:
            metric = max(p.gains, key=p.gains.get)
            lines.append(
                f"  probe {p.label!r} (player {game.players[p.player]}): gain {p.gains[metric]:+.4f} at {metric} "
                f"(ci {p.ci[metric]:.4f}) {'ok' if p.ok else 'TOO PROFITABLE'}"
            )
        lines.append(f"  max gain {self.max_gain:+.4f}, threshold eps*R = {self.eps * self.bound:.4f}")
        return "\n".join(lines)


def main_profile(sigma: SigmaStar) -> StationaryProfile:
    """Stationary profile that agrees with sigma*'s on-path prescription in
    its main mode (x1 in cycling blocks, the exit mixture at s_D and the
    reach profile elsewhere in exit blocks)."""
    g = sigma.game
    strategies = [[None] * g.n_states for _ in range(g.n_players)]
    for plan in sigma.plans:
        art = plan.artifact
        for s in plan.block:
            prof = art.x1 if isinstance(art, SigmaK) else art.profile_for(0, s)
            for i in range(g.n_players):
                strategies[i][s] = prof[i].probs[s]
    return StationaryProfile(tuple(StationaryStrategy(tuple(p)) for p in strategies))


def build_probes(sigma: SigmaStar, lams, random_stationary: int, random_automata: int, seed: int) -> list[Deviator]:
    from .values import mdp_best_response

    g = sigma.game
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(1,)))
    probes: list[Deviator] = []
    x = main_profile(sigma)
    for i in range(g.n_players):
        if all(g.n_actions(s, i) < 2 for s in range(g.n_states)):
            continue
        for s in range(g.n_states):
            for a in range(g.n_actions(s, i)):
                if g.n_actions(s, i) >= 2:
                    probes.append(one_shot_deviator(g, i, s, a))
        seen = set()
        for lam in lams:
            br, _ = mdp_best_response(g, i, x, lam)
            key = tuple(br.flat())
            if key not in seen:
                seen.add(key)
                probes.append(stationary_deviator(g, i, br, f"best response lambda={lam}"))
        for k in range(random_stationary):
            strat = StationaryStrategy(
                tuple(
                    np.eye(g.n_actions(s, i))[rng.integers(g.n_actions(s, i))] if k % 2 == 0 else rng.dirichlet(np.ones(g.n_actions(s, i)))
                    for s in range(g.n_states)
                )
            )
            probes.append(stationary_deviator(g, i, strat, f"random stationary #{k}"))
        for k in range(random_automata):
            probes.append(random_deviator(g, i, rng, 2 + k % 2, f"random automaton #{k}"))
    return probes


def verify_uniform_eq(
    sigma: SigmaStar,
    eps: float | None = None,
    horizons=(1000, 10000),
    plays: int = 300,
    baseline_plays: int = 2000,
    random_stationary: int = 4,
    random_automata: int = 4,
    seed: int = 0,
    s0=None,
    lams=None,
) -> VerificationReport:
    """Monte Carlo check of sigma* from ``s0``: payoff floors v̄(s0) - 3 eps R for
    every player at every horizon, and no probe deviation gaining more than
    eps R plus the 99% confidence half-width, for the N-stage averages at
    ``horizons`` and the discounted payoffs at ``lams`` (default 1 - 10/N)."""
    g = sigma.game
    eps = sigma.eps if eps is None else eps
    R = g.payoff_bound
    s0 = g.state_index(0 if s0 is None else s0)
    horizons = sorted(int(h) for h in horizons)
    lams = tuple(1.0 - 10.0 / h for h in horizons) if lams is None else tuple(lams)
    probes = build_probes(sigma, lams, random_stationary, random_automata, seed)
    devs = [baseline(g)] + probes
    counts = [baseline_plays] + [plays] * len(probes)
    engine = Playout(sigma)
    res = engine.run(s0, devs, counts, horizons[-1], horizons, lams, seed)

    metrics = {f"N={h}": res.averages[h] for h in horizons}
    metrics.update({f"lambda={lam:g}": res.discounted[lam] for lam in lams})
    base = res.deviator_index == 0

    floors = []
    for i in range(g.n_players):
        floor = float(sigma.values[i, s0] - 3.0 * eps * R)
        for name, vals in metrics.items():
            if not name.startswith("N="):
                continue
            x = vals[base, i]
            ci = Z99 * x.std(ddof=1) / np.sqrt(x.size)
            floors.append(
                {
                    "player": g.players[i],
                    "metric": name,
                    "mean": float(x.mean()),
                    "ci": float(ci),
                    "floor": floor,
                    "ok": bool(x.mean() + ci >= floor),
                }
            )

    outcomes = []
    for k, d in enumerate(probes, start=1):
        sel = res.deviator_index == k
        gains, cis = {}, {}
        for name, vals in metrics.items():
            x, y = vals[sel, d.player], vals[base, d.player]
            gains[name] = float(x.mean() - y.mean())
            cis[name] = float(Z99 * np.sqrt(x.var(ddof=1) / x.size + y.var(ddof=1) / y.size))
        ok = all(gains[m] <= eps * R + cis[m] for m in gains)
        share = float((res.punished[sel] >= 0).mean())
        outcomes.append(ProbeOutcome(d.label, d.player, gains, cis, share, ok))

    exact = None
    try:
        from .chain import build_chain

        chain = build_chain(g, sigma.on_path_automata(), s0, cap=200_000)
        avg = chain.average_payoffs(horizons)
        exact = {f"N={h}": [float(v) for v in avg[h]] for h in horizons}
    except Exception:  # chain too large; the Monte Carlo baseline stands alone
        exact = None

    alarm = float((res.punished[base] >= 0).mean())
    passed = all(f["ok"] for f in floors) and all(o.ok for o in outcomes)
    return VerificationReport(eps, R, s0, floors, outcomes, alarm, exact, passed)
