"""The worked example games and a few constructed test games."""

from __future__ import annotations

import itertools

import numpy as np

from .game_model import StochasticGame, build_game


def example1(lam: float = 0.6, p: float = 0.5, y: float | None = None) -> StochasticGame:
    """Single-player game whose modified best response depends on the start.

    s0 pays y and moves to s1. In s1, T pays 0 and B pays -1; both stay with
    probability 1-p and otherwise move to s2 (after T) or s3 (after B).
    s2 and s3 are absorbing with payoffs 2 and 3. The default y makes the
    in-block payoff from s0 exactly zero under B.
    """
    if y is None:
        y = lam / (1.0 - lam * (1.0 - p))
    one = ("a",)
    return build_game(
        players=["1"],
        states=["s0", "s1", "s2", "s3"],
        actions={"s0": {"1": one}, "s1": {"1": ("T", "B")}, "s2": {"1": one}, "s3": {"1": one}},
        payoff={
            "s0": {"a": [y]},
            "s1": {"T": [0.0], "B": [-1.0]},
            "s2": {"a": [2.0]},
            "s3": {"a": [3.0]},
        },
        transition={
            "s0": {"a": {"s1": 1.0}},
            "s1": {"T": {"s1": 1.0 - p, "s2": p}, "B": {"s1": 1.0 - p, "s3": p}},
            "s2": {"a": {"s2": 1.0}},
            "s3": {"a": {"s3": 1.0}},
        },
        name="example1",
    )


def example1_spec(lam: float = 0.6, s0: str = "s0") -> dict:
    return {
        "s0": s0,
        "lambda": lam,
        "per_player": [{"partition": [["s0", "s1"], ["s2"], ["s3"]], "cutoffs": [0.0, 2.0, 3.0]}],
    }


def example2() -> StochasticGame:
    """Deterministic two-state cycle paying 0 then 6."""
    one = {"1": ("a",)}
    return build_game(
        players=["1"],
        states=["s0", "s1"],
        actions={"s0": one, "s1": one},
        payoff={"s0": {"a": [0.0]}, "s1": {"a": [6.0]}},
        transition={"s0": {"a": {"s1": 1.0}}, "s1": {"a": {"s0": 1.0}}},
        name="example2",
    )


def example2_spec(lam: float = 0.5, cutoff: float = 4.0) -> dict:
    return {"s0": "s0", "lambda": lam, "per_player": [{"partition": [["s0"], ["s1"]], "cutoffs": [cutoff, cutoff]}]}


def bigmatch() -> StochasticGame:
    """Variant of the Big Match with absorbing payoffs (0, 1) and (1, 0).

    In s0 player 1 picks T or B and player 2 picks L or R. Player 1 earns 1
    against R and 0 against L; player 2 earns the complement. T ends the game:
    T,L moves to s2 (player 1 earns 1 forever) and T,R to s1 (0 forever).
    """
    return build_game(
        players=["1", "2"],
        states=["s0", "s1", "s2"],
        actions={
            "s0": {"1": ("T", "B"), "2": ("L", "R")},
            "s1": {"1": ("a",), "2": ("a",)},
            "s2": {"1": ("a",), "2": ("a",)},
        },
        payoff={
            "s0": {"T|L": [0.0, 1.0], "T|R": [1.0, 0.0], "B|L": [0.0, 1.0], "B|R": [1.0, 0.0]},
            "s1": {"a|a": [0.0, 1.0]},
            "s2": {"a|a": [1.0, 0.0]},
        },
        transition={
            "s0": {"T|L": {"s2": 1.0}, "T|R": {"s1": 1.0}, "B|L": {"s0": 1.0}, "B|R": {"s0": 1.0}},
            "s1": {"a|a": {"s1": 1.0}},
            "s2": {"a|a": {"s2": 1.0}},
        },
        name="bigmatch",
    )


def bigmatch_spec(lam: float = 0.9) -> dict:
    singles = [["s0"], ["s1"], ["s2"]]
    return {
        "s0": "s0",
        "lambda": lam,
        "per_player": [
            {"partition": singles, "cutoffs": [0.5, 0.0, 1.0]},
            {"partition": singles, "cutoffs": [0.5, 1.0, 0.0]},
        ],
    }


def bigmatch_alpha(lam: float, p: float) -> float:
    """Discounted time spent in s0 before absorption when player 1 plays T
    with probability p each stage: (1 - lam) / (1 - lam (1 - p))."""
    return (1.0 - lam) / (1.0 - lam * (1.0 - p))


def three_block() -> StochasticGame:
    """Chain of three strongly controllable blocks: {a} -> {b} -> {c1, c2}.

    Player 1 alone decides when to leave a, player 2 alone decides when to
    leave b, and {c1, c2} is a closed deterministic cycle paying (3, 1) then
    (1, 3).
    """
    return build_game(
        players=["1", "2"],
        states=["a", "b", "c1", "c2"],
        actions={
            "a": {"1": ("stay", "go"), "2": ("l", "r")},
            "b": {"1": ("l", "r"), "2": ("stay", "go")},
            "c1": {"1": ("x",), "2": ("x",)},
            "c2": {"1": ("x",), "2": ("x",)},
        },
        payoff={
            "a": {"stay|l": [0.0, 0.0], "stay|r": [0.0, 0.5], "go|l": [0.0, 0.0], "go|r": [0.0, 0.5]},
            "b": {"l|stay": [1.0, 0.0], "r|stay": [1.0, 0.0], "l|go": [1.0, 0.0], "r|go": [1.0, 0.0]},
            "c1": {"x|x": [3.0, 1.0]},
            "c2": {"x|x": [1.0, 3.0]},
        },
        transition={
            "a": {"stay|l": {"a": 1.0}, "stay|r": {"a": 1.0}, "go|l": {"b": 1.0}, "go|r": {"b": 1.0}},
            "b": {"l|stay": {"b": 1.0}, "r|stay": {"b": 1.0}, "l|go": {"c1": 1.0}, "r|go": {"c1": 1.0}},
            "c1": {"x|x": {"c2": 1.0}},
            "c2": {"x|x": {"c1": 1.0}},
        },
        name="three_block",
    )


def two_exit() -> StochasticGame:
    """Block {x, y} that can be left from both of its states (not controllable)."""
    return build_game(
        players=["1"],
        states=["x", "y", "z"],
        actions={"x": {"1": ("move", "out")}, "y": {"1": ("move", "out")}, "z": {"1": ("stay",)}},
        payoff={
            "x": {"move": [0.0], "out": [0.0]},
            "y": {"move": [0.0], "out": [0.0]},
            "z": {"stay": [0.0]},
        },
        transition={
            "x": {"move": {"y": 1.0}, "out": {"z": 1.0}},
            "y": {"move": {"x": 1.0}, "out": {"z": 1.0}},
            "z": {"stay": {"z": 1.0}},
        },
        name="two_exit",
    )


CATALOG = {
    "example1": example1,
    "example2": example2,
    "bigmatch": bigmatch,
    "three_block": three_block,
    "two_exit": two_exit,
}


def random_game(seed: int, n_players: int = 2, n_states: int = 2, n_actions: int = 2, payoff_scale: float = 1.0) -> StochasticGame:
    """Game with uniform payoffs in [-scale, scale] and Dirichlet transitions."""
    rng = np.random.default_rng(seed)
    players = [str(k + 1) for k in range(n_players)]
    states = [f"s{k}" for k in range(n_states)]
    actions = {s: {p: tuple(f"a{j}" for j in range(n_actions)) for p in players} for s in states}
    payoff, transition = {}, {}
    for s in states:
        payoff[s], transition[s] = {}, {}
        for prof in itertools.product(*(actions[s][p] for p in players)):
            payoff[s][prof] = list(rng.uniform(-payoff_scale, payoff_scale, size=n_players))
            q = rng.dirichlet(np.ones(n_states))
            transition[s][prof] = {t: float(x) for t, x in zip(states, q)}
    return build_game(players, states, actions, payoff, transition, name=f"random-{seed}")


def random_spec(game: StochasticGame, seed: int, lam: float | None = None) -> dict:
    """Random partition and cutoffs (within the payoff range) for each player."""
    rng = np.random.default_rng(seed + 7919)
    per = []
    for _ in game.players:
        labels = rng.integers(0, game.n_states, size=game.n_states)
        blocks = [[s for s, lab in zip(game.states, labels) if lab == k] for k in sorted(set(labels))]
        cut = rng.uniform(-game.payoff_bound, game.payoff_bound, size=len(blocks))
        per.append({"partition": blocks, "cutoffs": [float(c) for c in cut]})
    if lam is None:
        lam = float(rng.uniform(0.3, 0.95))
    return {"s0": game.states[0], "lambda": lam, "per_player": per}
