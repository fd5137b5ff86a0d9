import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modgame import catalog
from modgame.game_model import build_game
from modgame.modified import Partition
from modgame.structure import (
    almost_sure_reach,
    check_property_sufficient,
    classify,
    is_closed,
    leads_in,
    sibling_partition,
    strongly_controllable_witness,
)
from modgame.uniform import uniform_minmax_values


def sparse_game(seed, n_states=4, n_actions=2):
    """Two-player game whose transitions have random small supports."""
    rng = np.random.default_rng(seed)
    states = [f"s{k}" for k in range(n_states)]
    acts = tuple(f"a{j}" for j in range(n_actions))
    actions = {s: {"1": acts, "2": acts} for s in states}
    payoff, trans = {}, {}
    for s in states:
        payoff[s], trans[s] = {}, {}
        for prof in itertools.product(acts, acts):
            payoff[s][prof] = [0.0, 0.0]
            k = int(rng.integers(1, 3))
            succ = rng.choice(n_states, size=k, replace=False)
            w = rng.dirichlet(np.ones(k))
            trans[s][prof] = {states[t]: float(p) for t, p in zip(succ, w)}
    return build_game(["1", "2"], states, actions, payoff, trans)


def brute_force_reach(game, allowed, target):
    """States from which some pure stationary joint profile hits ``target``
    before leaving ``allowed`` with probability one (exact linear solves)."""
    allowed, target = sorted(allowed), set(target)
    inner = [s for s in allowed if s not in target]
    choices = [list(game.rows(s)) for s in inner]
    out = set(target)
    for pick in itertools.product(*choices):
        idx = {s: k for k, s in enumerate(inner)}
        A = np.eye(len(inner))
        b = np.zeros(len(inner))
        for s, row in zip(inner, pick):
            for t in range(game.n_states):
                q = game.Q[row, t]
                if t in target:
                    b[idx[s]] += q
                elif t in idx:
                    A[idx[s], idx[t]] -= q
        h = np.linalg.lstsq(A, b, rcond=None)[0] if inner else np.zeros(0)
        out |= {s for s in inner if h[idx[s]] >= 1 - 1e-9}
    return frozenset(out)


def test_closed_sets(bigmatch, example2):
    assert is_closed(bigmatch, ["s2"])
    assert not is_closed(bigmatch, ["s0"])
    assert is_closed(example2, ["s0", "s1"])


def test_witnesses(bigmatch):
    w = strongly_controllable_witness(bigmatch, ["s0"])
    assert w.names(bigmatch) == ("1", "s0", "T")
    assert strongly_controllable_witness(bigmatch, ["s1"]) is None
    assert strongly_controllable_witness(catalog.two_exit(), ["x", "y"]) is None


def test_reach_basics(example2):
    assert almost_sure_reach(example2, ["s0", "s1"], ["s1"]) == frozenset({0, 1})
    assert almost_sure_reach(example2, ["s0", "s1"], ["s0"]) == frozenset({0, 1})
    g = catalog.two_exit()
    assert leads_in(g, ["x", "y"], "x", "y")
    # from z nothing but z is reachable
    assert almost_sure_reach(g, ["x", "y", "z"], ["x"]) == frozenset({0, 1})


def test_state_that_always_leaks_is_excluded():
    g = build_game(
        ["1"],
        ["a", "b", "out"],
        {"a": {"1": ("u", "v")}, "b": {"1": ("w",)}, "out": {"1": ("w",)}},
        {"a": {"u": [0], "v": [0]}, "b": {"w": [0]}, "out": {"w": [0]}},
        {"a": {"u": {"b": 0.5, "out": 0.5}, "v": {"out": 0.2, "a": 0.8}}, "b": {"w": {"b": 1.0}}, "out": {"w": {"out": 1.0}}},
    )
    assert almost_sure_reach(g, ["a", "b"], ["b"]) == frozenset({1})
    assert brute_force_reach(g, [0, 1], [1]) == frozenset({1})


@pytest.mark.parametrize("seed", range(12))
def test_reach_matches_brute_force(seed):
    g = sparse_game(seed)
    rng = np.random.default_rng(seed)
    allowed = sorted(rng.choice(4, size=3, replace=False).tolist())
    target = [allowed[0]]
    assert almost_sure_reach(g, allowed, target) == brute_force_reach(g, allowed, target)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_reach_monotone_and_antitone(seed):
    g = sparse_game(seed)
    full = [0, 1, 2, 3]
    small, big = [0], [0, 1]
    assert almost_sure_reach(g, full, small) <= almost_sure_reach(g, full, big)
    assert almost_sure_reach(g, [0, 1, 2], small) <= almost_sure_reach(g, full, small)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_siblings_idempotent_and_refining(seed):
    g = sparse_game(seed)
    part = Partition.of(g, [["s0", "s1", "s2"], ["s3"]])
    sib = sibling_partition(g, part)
    assert sib.refines(part)
    assert sibling_partition(g, sib).canonical() == sib.canonical()


def test_sibling_examples(bigmatch, example2):
    sing = sibling_partition(bigmatch, Partition.of(bigmatch, [["s0"], ["s1"], ["s2"]]))
    assert sing.canonical() == ((0,), (1,), (2,))
    assert sibling_partition(example2, Partition.trivial(example2)).canonical() == ((0, 1),)
    # two disconnected absorbing states with equal values split
    g = build_game(
        ["1"],
        ["p", "q"],
        {"p": {"1": ("a",)}, "q": {"1": ("a",)}},
        {"p": {"a": [1]}, "q": {"a": [1]}},
        {"p": {"a": {"p": 1.0}}, "q": {"a": {"q": 1.0}}},
    )
    assert sibling_partition(g, Partition.trivial(g)).canonical() == ((0,), (1,))


def test_sibling_paths_stay_in_block():
    # every state on a within-block path between siblings is a sibling too
    for name in ("example2", "bigmatch", "three_block"):
        g = catalog.CATALOG[name]()
        rep = classify(g, uniform_minmax_values(g))
        for D in rep.sibling_partition.blocks:
            for s, t in itertools.permutations(sorted(D), 2):
                assert leads_in(g, rep.minmax_partition.block_of(s), s, t)


def test_classification(bigmatch, example2):
    rep = classify(bigmatch, uniform_minmax_values(bigmatch))
    assert rep.strongly_controllable
    tags = {tuple(sorted(D)): (tag, w) for D, tag, w in rep.tags}
    assert tags[(0,)][0] == "strongly_controllable"
    assert tags[(0,)][1].names(bigmatch) == ("1", "s0", "T")
    assert tags[(1,)][0] == tags[(2,)][0] == "closed"
    rep2 = classify(example2, uniform_minmax_values(example2))
    assert rep2.strongly_controllable and [t for _, t, _ in rep2.tags] == ["closed"]
    g = catalog.two_exit()
    assert not classify(g, uniform_minmax_values(g)).strongly_controllable


def test_classification_reports_borderline(example2):
    values = np.array([[3.0, 3.0 + 5e-4 * 6]])
    rep = classify(example2, values)
    assert rep.borderline == [(0, 1)]


def test_property_sufficient(bigmatch, example2):
    assert check_property_sufficient(bigmatch, Partition.singletons(bigmatch))
    g = catalog.three_block()
    assert check_property_sufficient(g, Partition.of(g, [["a", "b", "c1", "c2"]]))
    assert not check_property_sufficient(g, Partition.singletons(g))
