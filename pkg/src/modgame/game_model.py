"""Finite stochastic games, stationary and finite-memory strategies, JSON I/O."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Callable, Hashable, Mapping, Sequence

import numpy as np

RENORM_SLACK = 1e-15
ROW_SUM_TOL = 1e-12
PROFILE_SEP = "|"


class GameFormatError(ValueError):
    """A game, profile or spec document could not be parsed."""


class GameValidationError(ValueError):
    """A parsed game violates one of the model invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(violations))


def profile_key(profile: Sequence[str]) -> str:
    return PROFILE_SEP.join(profile)


@dataclass(eq=False)
class StochasticGame:
    """A finite stochastic game.

    ``actions[state][player]`` lists the player's actions in that state,
    ``payoff[state][profile]`` is the stage payoff vector (one entry per
    player) and ``transition[state][profile]`` maps next states to
    probabilities. Profiles are tuples of action ids ordered like ``players``.

    Treat instances as immutable: the numeric views below are cached.
    """

    players: tuple[str, ...]
    states: tuple[str, ...]
    actions: dict[str, dict[str, tuple[str, ...]]]
    payoff: dict[str, dict[tuple[str, ...], tuple[float, ...]]]
    transition: dict[str, dict[tuple[str, ...], dict[str, float]]]
    name: str = ""

    # ---- identification helpers -------------------------------------------------
    @property
    def n_players(self) -> int:
        return len(self.players)

    @property
    def n_states(self) -> int:
        return len(self.states)

    def player_index(self, player: int | str) -> int:
        if isinstance(player, (int, np.integer)) and not isinstance(player, bool):
            if 0 <= player < self.n_players:
                return int(player)
            raise KeyError(f"no player with index {player}")
        if player in self.players:
            return self.players.index(player)
        raise KeyError(f"unknown player {player!r}")

    def state_index(self, state: int | str) -> int:
        if isinstance(state, (int, np.integer)) and not isinstance(state, bool):
            if 0 <= state < self.n_states:
                return int(state)
            raise KeyError(f"no state with index {state}")
        try:
            return self._state_pos[state]
        except KeyError:
            raise KeyError(f"unknown state {state!r}") from None

    def state_set(self, states) -> frozenset[int]:
        return frozenset(self.state_index(s) for s in states)

    def action_list(self, state: int | str, player: int | str) -> tuple[str, ...]:
        s = self.states[self.state_index(state)]
        return self.actions[s][self.players[self.player_index(player)]]

    def n_actions(self, state: int | str, player: int | str) -> int:
        return len(self.action_list(state, player))

    @cached_property
    def _state_pos(self) -> dict[str, int]:
        return {s: k for k, s in enumerate(self.states)}

    # ---- compiled numeric view --------------------------------------------------
    def profiles(self, state: int | str) -> list[tuple[str, ...]]:
        s = self.states[self.state_index(state)]
        return list(itertools.product(*(self.actions[s][p] for p in self.players)))

    @cached_property
    def _compiled(self):
        rows_state, rows_actions, U, Q = [], [], [], []
        starts = [0]
        for k, s in enumerate(self.states):
            lists = [self.actions[s][p] for p in self.players]
            for idx in itertools.product(*(range(len(a)) for a in lists)):
                prof = tuple(lists[i][j] for i, j in enumerate(idx))
                rows_state.append(k)
                rows_actions.append(idx)
                U.append(self.payoff[s][prof])
                q = np.zeros(self.n_states)
                for t, pr in self.transition[s][prof].items():
                    q[self._state_pos[t]] += pr
                Q.append(q)
            starts.append(len(rows_state))
        return (
            np.array(rows_state, dtype=int),
            np.array(rows_actions, dtype=int).reshape(len(rows_state), self.n_players),
            np.array(U, dtype=float).reshape(len(rows_state), self.n_players),
            np.array(Q, dtype=float),
            np.array(starts, dtype=int),
        )

    @property
    def pair_state(self) -> np.ndarray:
        """State index of every (state, action-profile) row."""
        return self._compiled[0]

    @property
    def pair_actions(self) -> np.ndarray:
        """Per row, the local action index chosen by each player."""
        return self._compiled[1]

    @property
    def U(self) -> np.ndarray:
        """Stage payoffs, rows x players."""
        return self._compiled[2]

    @property
    def Q(self) -> np.ndarray:
        """Transition probabilities, rows x states."""
        return self._compiled[3]

    def rows(self, state: int) -> range:
        starts = self._compiled[4]
        return range(int(starts[state]), int(starts[state + 1]))

    @property
    def n_pairs(self) -> int:
        return self.pair_state.size

    def pair_label(self, row: int) -> tuple[str, str]:
        s = int(self.pair_state[row])
        acts = self.pair_actions[row]
        name = self.states[s]
        prof = tuple(self.actions[name][p][acts[i]] for i, p in enumerate(self.players))
        return name, profile_key(prof)

    @cached_property
    def _action_offsets(self) -> np.ndarray:
        """offsets[i, s]: start of (player i, state s) in the flat action layout."""
        off = np.zeros((self.n_players, self.n_states + 1), dtype=int)
        for i in range(self.n_players):
            for s in range(self.n_states):
                off[i, s + 1] = off[i, s] + self.n_actions(s, i)
        return off

    @cached_property
    def _flat_index(self) -> np.ndarray:
        off = self._action_offsets
        return off[np.arange(self.n_players)[None, :], self.pair_state[:, None]] + self.pair_actions

    @cached_property
    def payoff_bound(self) -> float:
        """R: the largest absolute stage payoff (at least 1e-300 to scale by)."""
        return float(max(np.abs(self.U).max(initial=0.0), 1e-300))

    # ---- strategy helpers -------------------------------------------------------
    def joint_probs(self, profile: "StationaryProfile") -> np.ndarray:
        """Probability of every row's action profile under a stationary profile."""
        p = np.ones(self.n_pairs)
        for i, strat in enumerate(profile.strategies):
            p *= strat.flat()[self._flat_index[:, i]]
        return p

    def kernel(self, profile: "StationaryProfile") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(joint row probabilities, state transition matrix, expected stage payoffs)."""
        pi = self.joint_probs(profile)
        P = np.zeros((self.n_states, self.n_states))
        np.add.at(P, self.pair_state, pi[:, None] * self.Q)
        r = np.zeros((self.n_states, self.n_players))
        np.add.at(r, self.pair_state, pi[:, None] * self.U)
        return pi, P, r

    def support_successors(self, row: int) -> np.ndarray:
        return np.nonzero(self.Q[row] > 0.0)[0]


# ---------------------------------------------------------------------------------
# strategies


@dataclass(frozen=True, eq=False)
class StationaryStrategy:
    """Per state, a mixed action over the player's actions there."""

    probs: tuple[np.ndarray, ...]

    def flat(self) -> np.ndarray:
        return np.concatenate(self.probs) if self.probs else np.zeros(0)

    def at(self, state: int) -> np.ndarray:
        return self.probs[state]

    def distance(self, other: "StationaryStrategy") -> float:
        return float(np.abs(self.flat() - other.flat()).max(initial=0.0))

    def is_pure(self, tol: float = 0.0) -> bool:
        return all(np.max(p) >= 1.0 - tol for p in self.probs)


@dataclass(frozen=True, eq=False)
class StationaryProfile:
    strategies: tuple[StationaryStrategy, ...]

    def __getitem__(self, i: int) -> StationaryStrategy:
        return self.strategies[i]

    def replace(self, i: int, strategy: StationaryStrategy) -> "StationaryProfile":
        s = list(self.strategies)
        s[i] = strategy
        return StationaryProfile(tuple(s))

    def flat(self) -> np.ndarray:
        return np.concatenate([s.flat() for s in self.strategies])

    def distance(self, other: "StationaryProfile") -> float:
        return max(a.distance(b) for a, b in zip(self.strategies, other.strategies))


def uniform_strategy(game: StochasticGame, player: int | str) -> StationaryStrategy:
    i = game.player_index(player)
    return StationaryStrategy(tuple(np.full(game.n_actions(s, i), 1.0 / game.n_actions(s, i)) for s in range(game.n_states)))


def uniform_profile(game: StochasticGame) -> StationaryProfile:
    return StationaryProfile(tuple(uniform_strategy(game, i) for i in range(game.n_players)))


def pure_strategy(game: StochasticGame, player: int | str, choice: Mapping | Sequence) -> StationaryStrategy:
    """Pure stationary strategy. ``choice`` maps state -> action id or index;
    a sequence is read as one action index per state; missing states play
    their first action."""
    i = game.player_index(player)
    probs = []
    for s in range(game.n_states):
        acts = game.action_list(s, i)
        if isinstance(choice, Mapping):
            a = choice.get(game.states[s], choice.get(s, 0))
        else:
            a = choice[s]
        k = acts.index(a) if isinstance(a, str) else int(a)
        v = np.zeros(len(acts))
        v[k] = 1.0
        probs.append(v)
    return StationaryStrategy(tuple(probs))


def strategy_from_mapping(game: StochasticGame, player: int | str, spec: Mapping) -> StationaryStrategy:
    """Build a strategy from ``{state: {action: prob}}``; unlisted states are uniform."""
    i = game.player_index(player)
    probs = []
    for s in range(game.n_states):
        acts = game.action_list(s, i)
        entry = spec.get(game.states[s])
        if entry is None:
            probs.append(np.full(len(acts), 1.0 / len(acts)))
            continue
        v = np.zeros(len(acts))
        for a, pr in entry.items():
            if a not in acts:
                raise GameFormatError(f"strategy of {game.players[i]!r} at {game.states[s]!r}: unknown action {a!r}")
            v[acts.index(a)] = float(pr)
        if np.any(v < 0) or abs(v.sum() - 1.0) > ROW_SUM_TOL:
            raise GameFormatError(f"strategy of {game.players[i]!r} at {game.states[s]!r} is not a distribution")
        probs.append(v / v.sum())
    return StationaryStrategy(tuple(probs))


def strategy_to_mapping(game: StochasticGame, player: int | str, strat: StationaryStrategy) -> dict:
    i = game.player_index(player)
    return {
        game.states[s]: {a: float(p) for a, p in zip(game.action_list(s, i), strat.probs[s])}
        for s in range(game.n_states)
    }


def profile_to_json(game: StochasticGame, profile: StationaryProfile) -> dict:
    return {
        "players": list(game.players),
        "strategies": {p: strategy_to_mapping(game, p, profile[i]) for i, p in enumerate(game.players)},
    }


def profile_from_json(game: StochasticGame, doc: Mapping) -> StationaryProfile:
    strategies = doc.get("strategies")
    if not isinstance(strategies, Mapping):
        raise GameFormatError("profile document needs a 'strategies' object")
    return StationaryProfile(tuple(strategy_from_mapping(game, p, strategies.get(p, {})) for p in game.players))


class AutomatonStrategy:
    """Finite-memory behaviour strategy for one player.

    ``emit(memory, state)`` returns the mixed action (array over the player's
    actions at ``state``) and ``update(memory, state, profile, next_state)``
    returns the next memory element. States and action profiles are passed
    as indices; memory elements must be hashable.
    """

    def __init__(
        self,
        initial: Hashable,
        emit: Callable[[Hashable, int], np.ndarray],
        update: Callable[[Hashable, int, tuple[int, ...], int], Hashable],
        label: str = "",
    ):
        self.initial = initial
        self._emit = emit
        self._update = update
        self.label = label

    def emit(self, memory: Hashable, state: int) -> np.ndarray:
        return self._emit(memory, state)

    def update(self, memory: Hashable, state: int, profile: tuple[int, ...], next_state: int) -> Hashable:
        return self._update(memory, state, profile, next_state)

    @classmethod
    def from_stationary(cls, strategy: StationaryStrategy, label: str = "stationary") -> "AutomatonStrategy":
        return cls(None, lambda m, s: strategy.probs[s], lambda m, s, a, t: None, label)

    def __repr__(self) -> str:
        return f"AutomatonStrategy({self.label or 'anonymous'})"


def as_automata(profile) -> tuple[AutomatonStrategy, ...]:
    if isinstance(profile, StationaryProfile):
        return tuple(AutomatonStrategy.from_stationary(s) for s in profile.strategies)
    return tuple(profile)


@dataclass
class PlayRecord:
    """One simulated play: states s_0..s_N, profiles a_0..a_{N-1}, stage payoffs."""

    states: list[int]
    actions: list[tuple[int, ...]]
    payoffs: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def to_jsonl(self, game: StochasticGame) -> str:
        lines = []
        for n, a in enumerate(self.actions):
            s = self.states[n]
            name = game.states[s]
            prof = [game.actions[name][p][a[i]] for i, p in enumerate(game.players)]
            lines.append(
                json.dumps(
                    {
                        "stage": n,
                        "state": name,
                        "profile": profile_key(prof),
                        "payoff": [float(v) for v in self.payoffs[n]],
                        "next": game.states[self.states[n + 1]],
                    }
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------------
# validation and algebra


def validate(game: StochasticGame) -> list[str]:
    """All invariant violations of ``game``; empty when the game is well formed."""
    out: list[str] = []
    if not game.players:
        out.append("players: empty player list")
    if len(set(game.players)) != len(game.players):
        out.append("players: duplicate player ids")
    if not game.states:
        out.append("states: empty state list")
    if len(set(game.states)) != len(game.states):
        out.append("states: duplicate state ids")
    known = set(game.states)
    for s in game.states:
        acts = game.actions.get(s, {})
        lists = []
        for p in game.players:
            a = acts.get(p, ())
            if not a:
                out.append(f"actions: state {s!r} player {p!r} has no actions")
            lists.append(a)
        if any(not a for a in lists):
            continue
        for prof in itertools.product(*lists):
            key = profile_key(prof)
            u = game.payoff.get(s, {}).get(prof)
            if u is None:
                out.append(f"payoff-missing: state {s!r} profile {key!r}")
            elif len(u) != len(game.players):
                out.append(f"payoff-length: state {s!r} profile {key!r} has {len(u)} entries")
            elif not all(math.isfinite(float(v)) for v in u):
                out.append(f"payoff-finite: state {s!r} profile {key!r}")
            q = game.transition.get(s, {}).get(prof)
            if q is None:
                out.append(f"transition-missing: state {s!r} profile {key!r}")
                continue
            unknown = [t for t in q if t not in known]
            if unknown:
                out.append(f"transition-target: state {s!r} profile {key!r} unknown states {unknown}")
            if any(float(v) < 0 for v in q.values()):
                out.append(f"negative-probability: state {s!r} profile {key!r}")
            total = float(sum(q.values()))
            if abs(total - 1.0) > ROW_SUM_TOL:
                out.append(f"row-sum: state {s!r} profile {key!r} sums to {total!r}")
    return out


def _as_mixture(game: StochasticGame, s: int, i: int, alpha) -> np.ndarray:
    acts = game.action_list(s, i)
    if isinstance(alpha, Mapping):
        v = np.zeros(len(acts))
        for a, pr in alpha.items():
            if a not in acts:
                raise KeyError(f"unknown action {a!r} for player {game.players[i]!r} at {game.states[s]!r}")
            v[acts.index(a)] = float(pr)
        return v
    if isinstance(alpha, str):
        if alpha not in acts:
            raise KeyError(f"unknown action {alpha!r} for player {game.players[i]!r} at {game.states[s]!r}")
        v = np.zeros(len(acts))
        v[acts.index(alpha)] = 1.0
        return v
    v = np.asarray(alpha, dtype=float)
    if v.shape != (len(acts),):
        raise KeyError(f"mixture for player {game.players[i]!r} at {game.states[s]!r} has wrong length")
    return v


def mixed_extend(game: StochasticGame, state, alphas: Sequence) -> tuple[np.ndarray, np.ndarray]:
    """Expected payoff vector and next-state distribution when each player
    mixes independently according to ``alphas`` (one entry per player: a
    probability array, ``{action: prob}`` or a single action id)."""
    s = game.state_index(state)
    mix = [_as_mixture(game, s, i, a) for i, a in enumerate(alphas)]
    rows = game.rows(s)
    w = np.ones(len(rows))
    acts = game.pair_actions[rows.start:rows.stop]
    for i, m in enumerate(mix):
        w *= m[acts[:, i]]
    payoff = w @ game.U[rows.start:rows.stop]
    dist = w @ game.Q[rows.start:rows.stop]
    return payoff, dist


# ---------------------------------------------------------------------------------
# construction and JSON


def build_game(
    players: Sequence[str],
    states: Sequence[str],
    actions: Mapping[str, Mapping[str, Sequence[str]]],
    payoff: Mapping[str, Mapping[Any, Sequence[float]]],
    transition: Mapping[str, Mapping[Any, Mapping[str, float]]],
    name: str = "",
    renormalize: bool = True,
) -> StochasticGame:
    """Assemble a game from plain mappings. Profile keys may be tuples or
    ``"a1|a2"`` strings. Raises GameValidationError if invariants fail."""

    def tup(k):
        return tuple(k.split(PROFILE_SEP)) if isinstance(k, str) else tuple(k)

    acts = {s: {p: tuple(actions[s][p]) for p in players} for s in states}
    pay = {s: {tup(k): tuple(float(x) for x in v) for k, v in payoff.get(s, {}).items()} for s in states}
    trans = {s: {tup(k): {t: float(x) for t, x in v.items()} for k, v in transition.get(s, {}).items()} for s in states}
    game = StochasticGame(tuple(players), tuple(states), acts, pay, trans, name)
    problems = validate(game)
    if problems:
        raise GameValidationError(problems)
    if renormalize:
        for s in states:
            for k, q in trans[s].items():
                total = sum(q.values())
                # rows already stochastic up to rounding keep their exact decimals
                if abs(total - 1.0) > RENORM_SLACK:
                    trans[s][k] = {t: x / total for t, x in q.items() if x > 0.0}
                else:
                    trans[s][k] = {t: x for t, x in q.items() if x > 0.0}
    return game


def game_to_json(game: StochasticGame) -> dict:
    doc: dict[str, Any] = {"players": list(game.players)}
    if game.name:
        doc["name"] = game.name
    doc["states"] = [{"name": s, "actions": {p: list(game.actions[s][p]) for p in game.players}} for s in game.states]
    doc["payoffs"] = {
        s: {profile_key(k): [float(x) for x in v] for k, v in game.payoff[s].items()} for s in game.states
    }
    doc["transitions"] = {
        s: {profile_key(k): {t: float(x) for t, x in v.items()} for k, v in game.transition[s].items()}
        for s in game.states
    }
    return doc


def game_from_json(doc: Mapping) -> StochasticGame:
    try:
        players = [str(p) for p in doc["players"]]
    except (KeyError, TypeError):
        raise GameFormatError("field 'players': missing or not a list") from None
    states_doc = doc.get("states")
    if not isinstance(states_doc, list):
        raise GameFormatError("field 'states': missing or not a list")
    states, actions = [], {}
    for k, entry in enumerate(states_doc):
        if not isinstance(entry, Mapping) or "name" not in entry:
            raise GameFormatError(f"states[{k}]: needs 'name' and 'actions'")
        name = str(entry["name"])
        states.append(name)
        acts = entry.get("actions", {})
        if not isinstance(acts, Mapping):
            raise GameFormatError(f"states[{k}].actions: not an object")
        actions[name] = {p: [str(a) for a in acts.get(p, [])] for p in players}
    for fld in ("payoffs", "transitions"):
        if not isinstance(doc.get(fld), Mapping):
            raise GameFormatError(f"field {fld!r}: missing or not an object")
    payoff = {}
    for s, table in doc["payoffs"].items():
        if not isinstance(table, Mapping):
            raise GameFormatError(f"payoffs.{s}: not an object")
        for key, vec in table.items():
            if not isinstance(vec, list) or not all(isinstance(x, (int, float)) for x in vec):
                raise GameFormatError(f"payoffs.{s}[{key!r}]: expected a list of numbers")
        payoff[s] = dict(table)
    transition = {}
    for s, table in doc["transitions"].items():
        if not isinstance(table, Mapping):
            raise GameFormatError(f"transitions.{s}: not an object")
        for key, dist in table.items():
            if not isinstance(dist, Mapping) or not all(isinstance(x, (int, float)) for x in dist.values()):
                raise GameFormatError(f"transitions.{s}[{key!r}]: expected an object of probabilities")
        transition[s] = dict(table)
    return build_game(players, states, actions, payoff, transition, name=str(doc.get("name", "")))


def load_game(path: str | Path) -> StochasticGame:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameFormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return game_from_json(doc)


def save_game(game: StochasticGame, path: str | Path) -> None:
    Path(path).write_text(json.dumps(game_to_json(game), indent=2) + "\n")
