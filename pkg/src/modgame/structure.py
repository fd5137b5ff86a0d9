"""Support-graph analysis: closed and strongly controllable sets, almost-sure
reachability, sibling partitions and the strongly-controllable classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game_model import StochasticGame
from .modified import Partition


@dataclass(frozen=True)
class Witness:
    """Exits from the block happen only at ``state`` and only when ``player``
    plays ``action`` (all given as indices)."""

    player: int
    state: int
    action: int

    def names(self, game: StochasticGame) -> tuple[str, str, str]:
        return (game.players[self.player], game.states[self.state], game.action_list(self.state, self.player)[self.action])


def _rows_in(game: StochasticGame, D) -> np.ndarray:
    return np.nonzero(np.isin(game.pair_state, list(D)))[0]


def exit_rows(game: StochasticGame, D) -> np.ndarray:
    """Rows inside D that put positive probability outside D."""
    D = frozenset(game.state_index(s) for s in D)
    rows = _rows_in(game, D)
    outside = np.ones(game.n_states, dtype=bool)
    outside[list(D)] = False
    return rows[(game.Q[rows][:, outside] > 0.0).any(axis=1)]


def is_closed(game: StochasticGame, D) -> bool:
    if not D:
        raise ValueError("D must be nonempty")
    return exit_rows(game, D).size == 0


def strongly_controllable_witness(game: StochasticGame, D) -> Witness | None:
    """Witness (i_D, s_D, action) if every exit from D happens at one state
    through one action of one player; None for closed sets and for sets
    that are not controllable. Players with a real choice at s_D are tried
    first, then in player order."""
    if not D:
        raise ValueError("D must be nonempty")
    rows = exit_rows(game, D)
    if rows.size == 0:
        return None
    states = set(int(s) for s in game.pair_state[rows])
    if len(states) != 1:
        return None
    s = states.pop()
    order = sorted(range(game.n_players), key=lambda i: (game.n_actions(s, i) < 2, i))
    for i in order:
        acts = set(int(a) for a in game.pair_actions[rows, i])
        if len(acts) == 1:
            return Witness(i, s, acts.pop())
    return None


def controllability(game: StochasticGame, D) -> tuple[str, Witness | None]:
    if is_closed(game, D):
        return "closed", None
    w = strongly_controllable_witness(game, D)
    return ("strongly_controllable", w) if w is not None else ("neither", None)


def almost_sure_reach(game: StochasticGame, allowed, target) -> frozenset[int]:
    """States from which some joint (cooperative) profile reaches ``target``
    with probability one before leaving ``allowed``. Decided on supports only."""
    allowed = frozenset(game.state_index(s) for s in allowed)
    target = frozenset(game.state_index(s) for s in target)
    if not target <= allowed:
        raise ValueError("target must be a subset of allowed")
    support = game.Q > 0.0
    region = set(allowed)
    while True:
        mask = np.zeros(game.n_states, dtype=bool)
        mask[list(region)] = True
        safe = ~(support & ~mask[None, :]).any(axis=1)  # rows that cannot leave the region
        win = set(target & region)
        changed = True
        while changed:
            changed = False
            wmask = np.zeros(game.n_states, dtype=bool)
            wmask[list(win)] = True
            hits = safe & (support & wmask[None, :]).any(axis=1)
            for row in np.nonzero(hits)[0]:
                s = int(game.pair_state[row])
                if s in region and s not in win:
                    win.add(s)
                    changed = True
        if win == region:
            return frozenset(region)
        region = win


def leads_in(game: StochasticGame, D, source, dest) -> bool:
    """True if the play can be driven from ``source`` to ``dest`` almost surely
    without leaving D."""
    return game.state_index(source) in almost_sure_reach(game, D, [dest])


def sibling_partition(game: StochasticGame, partition: Partition) -> Partition:
    """Refine each block into classes of states that lead to each other
    inside the block."""
    out = []
    for D in partition.blocks:
        reach = {s: almost_sure_reach(game, D, [s]) for s in sorted(D)}
        remaining = sorted(D)
        while remaining:
            s = remaining[0]
            cls = frozenset(t for t in remaining if t in reach[s] and s in reach[t])
            out.append(cls)
            remaining = [t for t in remaining if t not in cls]
    return Partition(tuple(out))


def group_by_values(values: np.ndarray, tol: float):
    """Group states whose value vectors (players x states) agree within ``tol``.

    Returns (blocks, borderline pairs); a pair is borderline when its distance
    lies in (tol, 10 tol].
    """
    n = values.shape[1]
    dist = np.abs(values[:, :, None] - values[:, None, :]).max(axis=0)
    blocks: list[set[int]] = []
    for s in range(n):
        for b in blocks:
            if all(dist[s, t] <= tol for t in b):
                b.add(s)
                break
        else:
            blocks.append({s})
    borderline = [(s, t) for s in range(n) for t in range(s + 1, n) if tol < dist[s, t] <= 10 * tol]
    return [frozenset(b) for b in blocks], borderline


@dataclass(eq=False)
class ClassificationReport:
    minmax_partition: Partition
    sibling_partition: Partition
    tags: list[tuple[frozenset[int], str, Witness | None]]
    borderline: list[tuple[int, int]] = field(default_factory=list)

    @property
    def strongly_controllable(self) -> bool:
        return all(tag != "neither" for _, tag, _ in self.tags)

    def tag_of(self, state: int) -> tuple[frozenset[int], str, Witness | None]:
        for entry in self.tags:
            if state in entry[0]:
                return entry
        raise KeyError(state)

    def to_json(self, game: StochasticGame) -> dict:
        blocks = []
        for D, tag, w in self.tags:
            entry = {"states": [game.states[s] for s in sorted(D)], "tag": tag}
            if w is not None:
                p, s, a = w.names(game)
                entry["witness"] = {"player": p, "state": s, "action": a}
            blocks.append(entry)
        return {
            "strongly_controllable": self.strongly_controllable,
            "minmax_partition": self.minmax_partition.names(game),
            "sibling_partition": self.sibling_partition.names(game),
            "blocks": blocks,
            "borderline": [[game.states[s], game.states[t]] for s, t in self.borderline],
        }

    def table(self, game: StochasticGame) -> str:
        lines = [f"{'block':<24}{'tag':<24}witness"]
        for D, tag, w in self.tags:
            names = "{" + ",".join(game.states[s] for s in sorted(D)) + "}"
            wit = "" if w is None else "player {} at {} plays {}".format(*w.names(game))
            lines.append(f"{names:<24}{tag:<24}{wit}")
        lines.append(f"strongly controllable: {self.strongly_controllable}")
        return "\n".join(lines)


def classify(game: StochasticGame, minmax_values, grouping_tol: float | None = None) -> ClassificationReport:
    """Classify the game given uniform min-max values (players x states)."""
    values = np.atleast_2d(np.asarray(minmax_values, dtype=float))
    if values.shape != (game.n_players, game.n_states):
        raise ValueError("need one uniform value per (player, state)")
    tol = 1e-4 * game.payoff_bound if grouping_tol is None else grouping_tol
    blocks, borderline = group_by_values(values, tol)
    mm = Partition(tuple(blocks))
    sib = sibling_partition(game, mm)
    tags = []
    for D in sib.blocks:
        tag, w = controllability(game, D)
        tags.append((D, tag, w))
    return ClassificationReport(mm, sib, tags, borderline)


def is_absorbing(game: StochasticGame, s: int) -> bool:
    rows = game.rows(s)
    return bool(np.all(game.Q[rows.start:rows.stop, s] == 1.0))


def check_property_sufficient(game: StochasticGame, partition: Partition) -> bool:
    """Syntactic sufficient conditions for the bounded-switching property:
    the game is absorbing (at most one non-absorbing state), or every state
    outside one block of the partition is absorbing."""
    non_absorbing = [s for s in range(game.n_states) if not is_absorbing(game, s)]
    if len(non_absorbing) <= 1:
        return True
    for D in partition.blocks:
        if all(s in D for s in non_absorbing):
            return True
    return False
