"""Discounted occupation measures and the payoffs computed from them."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .chain import DEFAULT_CAP, build_chain
from .game_model import (
    AutomatonStrategy,
    StationaryProfile,
    StationaryStrategy,
    StochasticGame,
    as_automata,
)

INVARIANT_TOL = 1e-9
ZERO_TIME = 1e-15


@dataclass(eq=False)
class OccupationVector:
    """Normalized discounted time t(s, a) spent at each (state, action-profile)
    row of ``game`` when play starts at ``s0``."""

    game: StochasticGame
    lam: float
    s0: int
    entries: np.ndarray

    def state_times(self) -> np.ndarray:
        t = np.zeros(self.game.n_states)
        np.add.at(t, self.game.pair_state, self.entries)
        return t

    def block_time(self, block) -> float:
        mask = np.isin(self.game.pair_state, list(block))
        return float(self.entries[mask].sum())

    def balance_residual(self) -> float:
        g = self.game
        inflow = self.lam * (self.entries @ g.Q)
        inflow[self.s0] += 1.0 - self.lam
        return float(np.abs(self.state_times() - inflow).max())

    def check(self, tol: float = INVARIANT_TOL) -> None:
        if abs(self.entries.sum() - 1.0) > tol or self.entries.min(initial=0.0) < -tol:
            raise ValueError("occupation vector is not a distribution")
        if self.balance_residual() > tol:
            raise ValueError("occupation vector violates the balance equations")

    def to_json(self) -> dict:
        g = self.game
        out: dict = {}
        for row, v in enumerate(self.entries):
            s, prof = g.pair_label(row)
            out.setdefault(s, {})[prof] = float(v)
        return {"lambda": self.lam, "s0": g.states[self.s0], "entries": out}

    def to_csv(self) -> str:
        g = self.game
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", "profile", "t"] + [f"ut_{p}" for p in g.players])
        for row, v in enumerate(self.entries):
            s, prof = g.pair_label(row)
            w.writerow([s, prof, repr(float(v))] + [repr(float(v * u)) for u in g.U[row]])
        return buf.getvalue()


@dataclass(eq=False)
class BlockBreakdown:
    """Per block D of a partition: the time t(D) and the unnormalized payoff U(D)."""

    blocks: list[frozenset[int]]
    times: np.ndarray  # (blocks,)
    payoffs: np.ndarray  # (blocks, players)

    def to_json(self, game: StochasticGame) -> dict:
        return {
            "blocks": [
                {
                    "states": [game.states[s] for s in sorted(b)],
                    "time": float(t),
                    "payoff": [float(x) for x in u],
                }
                for b, t, u in zip(self.blocks, self.times, self.payoffs)
            ]
        }


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"discount factor must lie in [0, 1), got {lam}")


def state_occupation(P: np.ndarray, s0: int, lam: float) -> np.ndarray:
    """Solve mu = (1-lam) e_s0 + lam P^T mu for the state occupation mu."""
    n = P.shape[0]
    rhs = np.zeros(n)
    rhs[s0] = 1.0 - lam
    A = np.eye(n) - lam * P.T
    mu = np.linalg.solve(A, rhs)
    if np.abs(A @ mu - rhs).max() > 1e-6:
        raise RuntimeError("occupation solve failed to converge")
    return mu


def occupation_stationary(game: StochasticGame, s0, lam: float, profile: StationaryProfile) -> OccupationVector:
    _check_lambda(lam)
    s0 = game.state_index(s0)
    pi, P, _ = game.kernel(profile)
    mu = state_occupation(P, s0, lam)
    t = np.clip(mu[game.pair_state] * pi, 0.0, None)
    return OccupationVector(game, lam, s0, t)


def occupation_automaton(
    game: StochasticGame, s0, lam: float, automata, cap: int = DEFAULT_CAP
) -> OccupationVector:
    _check_lambda(lam)
    s0 = game.state_index(s0)
    chain = build_chain(game, as_automata(automata), s0, cap)
    t = np.clip(chain.row_occupation(lam), 0.0, None)
    return OccupationVector(game, lam, s0, t)


def occupation(game: StochasticGame, s0, lam: float, profile) -> OccupationVector:
    """Dispatch on stationary profile versus tuple of automata."""
    if isinstance(profile, StationaryProfile):
        return occupation_stationary(game, s0, lam, profile)
    return occupation_automaton(game, s0, lam, profile)


def discounted_payoff(game: StochasticGame, occ: OccupationVector) -> np.ndarray:
    if occ.game is not game and occ.entries.size != game.n_pairs:
        raise ValueError("occupation vector belongs to a different game")
    return occ.entries @ game.U


def n_stage_payoff(game: StochasticGame, s0, profile, N: int) -> np.ndarray:
    """Exact expected average payoff over stages 0..N-1."""
    if N < 1:
        raise ValueError("N must be at least 1")
    s0 = game.state_index(s0)
    if isinstance(profile, StationaryProfile):
        _, P, r = game.kernel(profile)
        d = np.zeros(game.n_states)
        d[s0] = 1.0
        total = np.zeros(game.n_players)
        for _ in range(N):
            total += d @ r
            d = d @ P
        return total / N
    chain = build_chain(game, as_automata(profile), s0)
    return chain.average_payoffs([N])[N]


def _partition_blocks(game: StochasticGame, partition) -> list[frozenset[int]]:
    blocks = [game.state_set(b) if not isinstance(b, frozenset) else b for b in partition]
    seen: set[int] = set()
    for b in blocks:
        if not b:
            raise ValueError("partition has an empty block")
        if seen & b:
            raise ValueError("partition blocks overlap")
        seen |= b
    if seen != set(range(game.n_states)):
        raise ValueError("partition does not cover every state")
    return blocks


def block_breakdown(game: StochasticGame, occ: OccupationVector, partition) -> BlockBreakdown:
    blocks = _partition_blocks(game, partition)
    times = np.zeros(len(blocks))
    pay = np.zeros((len(blocks), game.n_players))
    for k, b in enumerate(blocks):
        mask = np.isin(game.pair_state, list(b))
        times[k] = occ.entries[mask].sum()
        pay[k] = occ.entries[mask] @ game.U[mask]
    return BlockBreakdown(blocks, times, pay)


def player_marginal(game: StochasticGame, occ: OccupationVector, player) -> list[np.ndarray]:
    """Per state, the time spent at each of ``player``'s actions."""
    i = game.player_index(player)
    out = [np.zeros(game.n_actions(s, i)) for s in range(game.n_states)]
    for row, v in enumerate(occ.entries):
        out[game.pair_state[row]][game.pair_actions[row, i]] += v
    return out


def equivalent_stationary(game: StochasticGame, occ: OccupationVector, player=0) -> StationaryStrategy:
    """Stationary strategy x(s, a) = t(s, a) / t(s) for ``player``.

    States the play never visits (t(s) <= 1e-15) get the uniform mixed action.
    """
    probs = []
    for m in player_marginal(game, occ, player):
        total = m.sum()
        if total <= ZERO_TIME:
            probs.append(np.full(m.size, 1.0 / m.size))
        else:
            probs.append(np.clip(m, 0.0, None) / total)
    return StationaryStrategy(tuple(probs))


def mixture_stationary(
    game: StochasticGame,
    s0,
    lam: float,
    x: StationaryStrategy,
    x_prime: StationaryStrategy,
    alpha: float,
    player=0,
    opponents: StationaryProfile | None = None,
) -> StationaryStrategy:
    """Stationary strategy whose occupation vector is alpha*t(x) + (1-alpha)*t(x').

    The other players (if any) play their part of ``opponents``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    i = game.player_index(player)
    base = opponents if opponents is not None else StationaryProfile((x,) * game.n_players)
    t1 = occupation_stationary(game, s0, lam, base.replace(i, x))
    t2 = occupation_stationary(game, s0, lam, base.replace(i, x_prime))
    mixed = OccupationVector(game, lam, t1.s0, alpha * t1.entries + (1.0 - alpha) * t2.entries)
    return equivalent_stationary(game, mixed, i)


def abel_decompose(x_seq, lam: float, M: int, L: int) -> tuple[float, np.ndarray]:
    """Split the partial discounted sum sum_{n<=L} lam^n x_n into a head and a tail.

    The head is sum_{n<M} (lam^n - lam^M) x_n. The tail is a weighted sum over
    l >= M of running averages of x over stages 0..min(L, l): weight
    ((min(L,l)+1) (lam^l - lam^(l+1))) on average A_l. Only l = M..L matter
    individually; all l > L share the average A_L, so the returned weights
    have length L - M + 2 with the last entry holding the combined weight
    lam^(L+1) (L+1) of every l > L.
    """
    x = np.asarray(x_seq, dtype=float)
    if not 0 <= M <= L:
        raise ValueError("need 0 <= M <= L")
    if x.size < L + 1:
        raise ValueError("sequence shorter than L+1")
    n = np.arange(M)
    head = float(np.sum((lam**n - lam**M) * x[:M]))
    ls = np.arange(M, L + 1)
    weights = (ls + 1) * (lam**ls - lam ** (ls + 1))
    weights = np.append(weights, (L + 1) * lam ** (L + 1))
    return head, weights


def abel_reconstruct(x_seq, lam: float, M: int, L: int) -> float:
    x = np.asarray(x_seq, dtype=float)
    head, weights = abel_decompose(x, lam, M, L)
    csum = np.cumsum(x[: L + 1])
    ls = np.arange(M, L + 1)
    averages = csum[ls] / (ls + 1)
    averages = np.append(averages, csum[L] / (L + 1))
    return head + float(weights @ averages)
