"""Modified payoffs: per-block discounted payoffs capped at block cutoffs."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .game_model import GameFormatError, StochasticGame
from .occupancy import OccupationVector, block_breakdown, occupation


@dataclass(frozen=True, eq=False)
class Partition:
    blocks: tuple[frozenset[int], ...]

    @classmethod
    def of(cls, game: StochasticGame, blocks) -> "Partition":
        bl = tuple(b if isinstance(b, frozenset) else game.state_set(b) for b in blocks)
        seen: set[int] = set()
        for b in bl:
            if not b:
                raise ValueError("partition has an empty block")
            if seen & b:
                raise ValueError("partition blocks overlap")
            seen |= b
        if seen != set(range(game.n_states)):
            raise ValueError("partition does not cover every state")
        return cls(bl)

    @classmethod
    def singletons(cls, game: StochasticGame) -> "Partition":
        return cls(tuple(frozenset([s]) for s in range(game.n_states)))

    @classmethod
    def trivial(cls, game: StochasticGame) -> "Partition":
        return cls((frozenset(range(game.n_states)),))

    def index(self) -> dict[int, int]:
        return {s: k for k, b in enumerate(self.blocks) for s in b}

    def block_of(self, state: int) -> frozenset[int]:
        for b in self.blocks:
            if state in b:
                return b
        raise KeyError(state)

    def refines(self, other: "Partition") -> bool:
        return all(any(b <= o for o in other.blocks) for b in self.blocks)

    def canonical(self) -> tuple[tuple[int, ...], ...]:
        return tuple(sorted(tuple(sorted(b)) for b in self.blocks))

    def names(self, game: StochasticGame) -> list[list[str]]:
        return [[game.states[s] for s in sorted(b)] for b in self.blocks]

    def __len__(self) -> int:
        return len(self.blocks)


@dataclass(frozen=True, eq=False)
class PlayerSpec:
    partition: Partition
    cutoffs: np.ndarray
    lam: float | None = None  # overrides the shared discount factor


@dataclass(frozen=True, eq=False)
class ModifiedSpec:
    s0: int
    lam: float
    per_player: tuple[PlayerSpec, ...]

    def discount(self, i: int) -> float:
        own = self.per_player[i].lam
        return self.lam if own is None else own

    def with_start(self, s0: int) -> "ModifiedSpec":
        return ModifiedSpec(s0, self.lam, self.per_player)

    def with_lambda(self, lam: float) -> "ModifiedSpec":
        return ModifiedSpec(self.s0, lam, self.per_player)

    def to_json(self, game: StochasticGame) -> dict:
        players = []
        for ps in self.per_player:
            entry = {"partition": ps.partition.names(game), "cutoffs": [float(c) for c in ps.cutoffs]}
            if ps.lam is not None:
                entry["lambda"] = ps.lam
            players.append(entry)
        return {"s0": game.states[self.s0], "lambda": self.lam, "per_player": players}


def make_spec(game: StochasticGame, s0, lam: float, partitions: Sequence, cutoffs: Sequence) -> ModifiedSpec:
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"discount factor must lie in [0, 1), got {lam}")
    if len(partitions) != game.n_players or len(cutoffs) != game.n_players:
        raise ValueError("need one partition and one cutoff vector per player")
    per = []
    for part, cut in zip(partitions, cutoffs):
        p = part if isinstance(part, Partition) else Partition.of(game, part)
        c = np.asarray(cut, dtype=float)
        if c.shape != (len(p),):
            raise ValueError("cutoff vector must have one entry per block")
        per.append(PlayerSpec(p, c))
    return ModifiedSpec(game.state_index(s0), float(lam), tuple(per))


def spec_from_json(game: StochasticGame, doc: Mapping) -> ModifiedSpec:
    try:
        s0 = doc["s0"]
        lam = float(doc["lambda"])
        entries = doc["per_player"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GameFormatError(f"modified spec: missing or malformed field {exc}") from None
    if not isinstance(entries, list) or len(entries) != game.n_players:
        raise GameFormatError("modified spec: 'per_player' needs one entry per player")
    per = []
    for k, e in enumerate(entries):
        try:
            part = Partition.of(game, e["partition"])
            cut = np.asarray(e["cutoffs"], dtype=float)
        except (KeyError, ValueError, TypeError) as exc:
            raise GameFormatError(f"modified spec: per_player[{k}]: {exc}") from None
        if cut.shape != (len(part),):
            raise GameFormatError(f"modified spec: per_player[{k}]: one cutoff per block required")
        per.append(PlayerSpec(part, cut, float(e["lambda"]) if "lambda" in e else None))
    if not 0.0 <= lam < 1.0:
        raise GameFormatError("modified spec: lambda must lie in [0, 1)")
    try:
        s0i = game.state_index(s0)
    except KeyError as exc:
        raise GameFormatError(f"modified spec: {exc}") from None
    return ModifiedSpec(s0i, lam, tuple(per))


def load_spec(game: StochasticGame, path: str | Path) -> ModifiedSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return spec_from_json(game, doc)


def capped_sum(block_payoffs: np.ndarray, block_times: np.ndarray, cutoffs: np.ndarray) -> float:
    """sum_D min(U(D), t(D) c(D)); blocks with t(D) = 0 have U(D) = 0 and add nothing."""
    return float(np.minimum(block_payoffs, block_times * cutoffs).sum())


def modified_payoff(game: StochasticGame, spec: ModifiedSpec, occ: OccupationVector, player) -> float:
    i = game.player_index(player)
    if occ.s0 != spec.s0:
        raise ValueError("occupation vector was computed from a different initial state")
    if len(spec.per_player) != game.n_players:
        raise ValueError("spec does not match the game's players")
    ps = spec.per_player[i]
    bd = block_breakdown(game, occ, ps.partition.blocks)
    return capped_sum(bd.payoffs[:, i], bd.times, ps.cutoffs)


def modified_payoff_profile(game: StochasticGame, spec: ModifiedSpec, profile) -> np.ndarray:
    out = np.zeros(game.n_players)
    cache: dict[float, OccupationVector] = {}
    for i in range(game.n_players):
        lam = spec.discount(i)
        if lam not in cache:
            cache[lam] = occupation(game, spec.s0, lam, profile)
        out[i] = modified_payoff(game, spec, cache[lam], i)
    return out


def check_min_superadditivity(samples) -> bool:
    """True iff min(a1,b1) + min(a2,b2) <= min(a1+a2, b1+b2) on every sample
    row (a1, b1, a2, b2)."""
    s = np.atleast_2d(np.asarray(samples, dtype=float))
    a1, b1, a2, b2 = s[:, 0], s[:, 1], s[:, 2], s[:, 3]
    lhs = np.minimum(a1, b1) + np.minimum(a2, b2)
    rhs = np.minimum(a1 + a2, b1 + b2)
    return bool(np.all(lhs <= rhs + 1e-12 * (1.0 + np.abs(rhs))))
