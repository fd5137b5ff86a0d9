"""Play simulation, run segmentation, restart wrappers and Monte Carlo estimates.

Random streams: play number k of a call seeded with ``seed`` draws from
``numpy.random.default_rng(SeedSequence(seed, spawn_key=(k,)))``. Within a
play every stage consumes one uniform per player (action draws, in player
order) and then one uniform for the transition, so results are reproducible
across platforms given (inputs, seed).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .game_model import (
    AutomatonStrategy,
    PlayRecord,
    StationaryProfile,
    StochasticGame,
    as_automata,
)
from .modified import Partition


def play_rng(seed: int, play: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(play,)))


def _draw(probs: np.ndarray, u: float) -> int:
    k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(k, probs.size - 1)


def simulate(game: StochasticGame, profile, s0, horizon: int, seed: int = 0, play: int = 0) -> PlayRecord:
    """Simulate ``horizon`` stages from ``s0`` under a stationary profile or a
    tuple of automata (one per player)."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    automata = as_automata(profile)
    rng = play_rng(seed, play)
    s = game.state_index(s0)
    mem = [a.initial for a in automata]
    states, actions = [s], []
    payoffs = np.zeros((horizon, game.n_players))
    for n in range(horizon):
        u = rng.random(game.n_players + 1)
        prof = tuple(_draw(a.emit(m, s), u[i]) for i, (a, m) in enumerate(zip(automata, mem)))
        row = _row_of(game, s, prof)
        payoffs[n] = game.U[row]
        t = _draw(game.Q[row], u[-1])
        mem = [a.update(m, s, prof, t) for a, m in zip(automata, mem)]
        actions.append(prof)
        states.append(t)
        s = t
    return PlayRecord(states, actions, payoffs)


def _row_of(game: StochasticGame, s: int, prof: tuple[int, ...]) -> int:
    row = game.rows(s).start
    stride = 1
    for i in reversed(range(game.n_players)):
        row += prof[i] * stride
        stride *= game.n_actions(s, i)
    return row


def simulate_stationary_batch(
    game: StochasticGame, profile: StationaryProfile, s0, horizon: int, plays: int, seed: int = 0
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized simulation of many plays under a stationary profile.

    Returns (states: plays x (horizon+1), payoffs: plays x horizon x players).
    Uses one generator for the whole batch (a different stream layout from
    ``simulate``; both are reproducible).
    """
    rng = np.random.default_rng(seed)
    s = np.full(plays, game.state_index(s0))
    states = np.zeros((plays, horizon + 1), dtype=int)
    states[:, 0] = s
    pay = np.zeros((plays, horizon, game.n_players))
    pi = game.joint_probs(profile)
    # per state, the cumulative distribution of rows
    starts = np.array([game.rows(k).start for k in range(game.n_states)])
    cum_rows = np.zeros(game.n_pairs)
    for k in range(game.n_states):
        r = game.rows(k)
        cum_rows[r.start:r.stop] = np.cumsum(pi[r.start:r.stop])
    cumQ = np.cumsum(game.Q, axis=1)
    counts = np.array([len(game.rows(k)) for k in range(game.n_states)])
    for n in range(horizon):
        u = rng.random(plays)
        rows = np.empty(plays, dtype=int)
        for k in np.unique(s):
            idx = np.nonzero(s == k)[0]
            seg = cum_rows[starts[k]:starts[k] + counts[k]]
            j = np.minimum(np.searchsorted(seg, u[idx], side="right"), counts[k] - 1)
            rows[idx] = starts[k] + j
        pay[:, n] = game.U[rows]
        v = rng.random(plays)
        nxt = (cumQ[rows] <= v[:, None]).sum(axis=1)
        s = np.minimum(nxt, game.n_states - 1)
        states[:, n + 1] = s
    return states, pay


@dataclass
class RunSegmentation:
    """Block-change times tau_1 < tau_2 < ... (tau_0 = 0), the run index of
    every stage and the number of switches Z."""

    taus: list[int]
    run_index: np.ndarray
    switches: int

    def run_lengths(self, horizon: int) -> list[int]:
        bounds = self.taus + [horizon]
        return [b - a for a, b in zip(bounds, bounds[1:])]

    def to_csv(self, blocks: list[int]) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["stage", "block", "run"])
        for n, (b, k) in enumerate(zip(blocks, self.run_index)):
            w.writerow([n, b, int(k)])
        return buf.getvalue()


def block_sequence(play: PlayRecord, partition: Partition) -> list[int]:
    index = partition.index()
    return [index[s] for s in play.states[: play.horizon]]


def segment_runs(play: PlayRecord, partition: Partition) -> RunSegmentation:
    blocks = block_sequence(play, partition)
    taus = [0]
    run = np.zeros(len(blocks), dtype=int)
    k = 0
    for n in range(1, len(blocks)):
        if blocks[n] != blocks[n - 1]:
            k += 1
            taus.append(n)
        run[n] = k
    return RunSegmentation(taus, run, k)


def restart_wrapper(sigma: AutomatonStrategy, partition: Partition) -> AutomatonStrategy:
    """Automaton that behaves like ``sigma`` but restarts it from its initial
    memory whenever the play moves to a different block."""
    index = partition.index()

    def update(m, s, a, t):
        if index[t] != index[s]:
            return sigma.initial
        return sigma.update(m, s, a, t)

    return AutomatonStrategy(sigma.initial, sigma.emit, update, label=f"restart({sigma.label})")


def run_length_constants(eps: float, N: int, zeta: float) -> tuple[int, int]:
    """M = ceil(2 zeta N / eps) and L0 = ceil(2 zeta M / eps)."""
    if not 0.0 < eps < 1.0 or N < 1 or zeta < 1:
        raise ValueError("need 0 < eps < 1, N >= 1 and zeta >= 1")
    M = math.ceil(2.0 * zeta * N / eps)
    L0 = math.ceil(2.0 * zeta * M / eps)
    return M, L0


@dataclass
class CoinReport:
    p: float
    samples: int
    mean: float
    half_width: float
    candidates: dict[str, float]
    matches: list[str]

    def to_json(self) -> dict:
        return {
            "p": self.p,
            "samples": self.samples,
            "mean": self.mean,
            "ci99": [self.mean - self.half_width, self.mean + self.half_width],
            "candidates": self.candidates,
            "matches": self.matches,
        }


def coin_run_oracle(p: float, samples: int = 100_000, seed: int = 0) -> CoinReport:
    """Empirical mean of k*, the number of heads before the first tail when
    heads has probability p, with a 99% confidence interval.

    Two closed forms are compared: p/(1-p) (k* counts the initial heads) and
    1/(1-p) (k* also counts the stage that ends the run).
    """
    if not 0.0 <= p < 1.0:
        raise ValueError("p must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    k = rng.geometric(1.0 - p, size=samples) - 1
    mean = float(k.mean())
    sd = float(k.std(ddof=1)) if samples > 1 else 0.0
    half = float(stats.norm.ppf(0.995)) * sd / math.sqrt(samples)
    candidates = {"initial_heads p/(1-p)": p / (1.0 - p), "including_first_tail 1/(1-p)": 1.0 / (1.0 - p)}
    matches = [name for name, v in candidates.items() if abs(v - mean) <= max(half, 1e-12)]
    return CoinReport(p, samples, mean, half, candidates, matches)


def truncation_horizon(lam: float, bound: float, target: float) -> int:
    """Smallest T with lam^T * bound <= target / 10."""
    if lam == 0.0:
        return 1
    if bound <= target / 10.0:
        return 1
    return max(1, math.ceil(math.log(target / (10.0 * bound)) / math.log(lam)))


def mc_discounted_payoff(
    game: StochasticGame,
    profile,
    s0,
    lam: float,
    plays: int = 1000,
    seed: int = 0,
    ci_target: float | None = None,
    batches: int = 10,
) -> tuple[np.ndarray, np.ndarray]:
    """Monte Carlo estimate of the normalized discounted payoff.

    Returns (estimate, half-width of a 99% batch-means interval plus the
    truncation tail lam^T R).
    """
    if plays < 100:
        raise ValueError("need at least 100 plays")
    R = game.payoff_bound
    target = 1e-2 * R if ci_target is None else ci_target
    T = truncation_horizon(lam, R, target)
    weights = (1.0 - lam) * lam ** np.arange(T)
    if isinstance(profile, StationaryProfile):
        _, pay = simulate_stationary_batch(game, profile, s0, T, plays, seed)
        values = np.einsum("n,knp->kp", weights, pay)
    else:
        values = np.array([weights @ simulate(game, profile, s0, T, seed, k).payoffs for k in range(plays)])
    est = values.mean(axis=0)
    groups = np.array_split(values, batches)
    means = np.array([g.mean(axis=0) for g in groups])
    sd = means.std(axis=0, ddof=1)
    half = float(stats.t.ppf(0.995, batches - 1)) * sd / math.sqrt(batches)
    return est, half + lam**T * R
