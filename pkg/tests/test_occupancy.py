import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modgame import catalog
from modgame.game_model import AutomatonStrategy, StationaryProfile, StationaryStrategy, build_game, pure_strategy, uniform_profile
from modgame.modified import Partition
from modgame.occupancy import (
    abel_decompose,
    abel_reconstruct,
    block_breakdown,
    discounted_payoff,
    equivalent_stationary,
    mixture_stationary,
    n_stage_payoff,
    occupation_automaton,
    occupation_stationary,
)
from modgame.simulate import mc_discounted_payoff

from conftest import random_stationary


def two_action_mdp():
    return build_game(
        players=["1"],
        states=["s"],
        actions={"s": {"1": ("a", "b")}},
        payoff={"s": {"a": [1.0], "b": [0.0]}},
        transition={"s": {"a": {"s": 1.0}, "b": {"s": 1.0}}},
    )


def a_then_b():
    """Plays a at stage 0 and b forever after."""
    return AutomatonStrategy(
        0,
        lambda m, s: np.array([1.0, 0.0]) if m == 0 else np.array([0.0, 1.0]),
        lambda m, s, a, t: 1,
        label="a-then-b",
    )


def test_one_state_one_action_has_unit_time():
    g = build_game(["1"], ["s"], {"s": {"1": ("a",)}}, {"s": {"a": [0.5]}}, {"s": {"a": {"s": 1.0}}})
    occ = occupation_stationary(g, "s", 0.7, uniform_profile(g))
    assert occ.entries.tolist() == [1.0]
    assert discounted_payoff(g, occ)[0] == 0.5


def test_example2_closed_forms(example2):
    lam = 0.5
    occ = occupation_stationary(example2, "s0", lam, uniform_profile(example2))
    np.testing.assert_allclose(occ.state_times(), [1 / (1 + lam), lam / (1 + lam)], atol=1e-15)
    assert discounted_payoff(example2, occ)[0] == pytest.approx(6 * lam / (1 + lam), abs=1e-12)
    occ = occupation_stationary(example2, "s0", 0.999, uniform_profile(example2))
    assert discounted_payoff(example2, occ)[0] == pytest.approx(2.9985, abs=1e-4)


@pytest.mark.parametrize("lam,p", [(0.5, 0.2), (0.9, 0.05), (0.99, 0.5)])
def test_bigmatch_time_in_s0(bigmatch, lam, p):
    prof = StationaryProfile(
        (
            StationaryStrategy((np.array([p, 1 - p]), np.ones(1), np.ones(1))),
            pure_strategy(bigmatch, "2", {"s0": "L"}),
        )
    )
    occ = occupation_stationary(bigmatch, "s0", lam, prof)
    alpha = catalog.bigmatch_alpha(lam, p)
    assert occ.state_times()[0] == pytest.approx(alpha, abs=1e-12)
    bd = block_breakdown(bigmatch, occ, [["s0"], ["s1"], ["s2"]])
    np.testing.assert_allclose(bd.times, [alpha, 0.0, 1 - alpha], atol=1e-12)


def test_n_stage_payoff_example2(example2):
    prof = uniform_profile(example2)
    assert n_stage_payoff(example2, "s0", prof, 1)[0] == 0.0
    assert n_stage_payoff(example2, "s0", prof, 2)[0] == 3.0
    assert n_stage_payoff(example2, "s0", prof, 2000)[0] == pytest.approx(3.0, abs=2e-3)


def test_trivial_partition_breakdown(bigmatch):
    prof = random_stationary(bigmatch, np.random.default_rng(1))
    occ = occupation_stationary(bigmatch, "s0", 0.8, prof)
    bd = block_breakdown(bigmatch, occ, Partition.trivial(bigmatch).blocks)
    assert bd.times[0] == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(bd.payoffs[0], discounted_payoff(bigmatch, occ), atol=1e-12)


def test_example2_singleton_breakdown(example2):
    occ = occupation_stationary(example2, "s0", 0.5, uniform_profile(example2))
    bd = block_breakdown(example2, occ, [["s0"], ["s1"]])
    np.testing.assert_allclose(bd.times, [2 / 3, 1 / 3], atol=1e-15)
    np.testing.assert_allclose(bd.payoffs[:, 0], [0.0, 2.0], atol=1e-14)


def test_singleton_memory_automaton_matches_stationary(bigmatch):
    prof = random_stationary(bigmatch, np.random.default_rng(2))
    autos = tuple(AutomatonStrategy.from_stationary(x) for x in prof.strategies)
    a = occupation_stationary(bigmatch, "s0", 0.9, prof)
    b = occupation_automaton(bigmatch, "s0", 0.9, autos)
    np.testing.assert_allclose(a.entries, b.entries, atol=1e-12)


def test_a_then_b_automaton():
    g = two_action_mdp()
    lam = 0.7
    occ = occupation_automaton(g, "s", lam, (a_then_b(),))
    np.testing.assert_allclose(occ.entries, [1 - lam, lam], atol=1e-14)
    x = equivalent_stationary(g, occ)
    assert x.at(0)[0] == pytest.approx(1 - lam, abs=1e-14)


def test_cycler_automaton_matches_monte_carlo(example2):
    # two-phase counter: memory flips every stage; single action so only the chain matters
    cycler = AutomatonStrategy(0, lambda m, s: np.ones(1), lambda m, s, a, t: 1 - m, label="cycler")
    lam = 0.9
    exact = discounted_payoff(example2, occupation_automaton(example2, "s0", lam, (cycler,)))
    est, half = mc_discounted_payoff(example2, (cycler,), "s0", lam, plays=200, seed=4)
    assert abs(est[0] - exact[0]) <= 3 * half[0] + 1e-12


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000), lam=st.sampled_from([0.3, 0.9, 0.99]))
def test_balance_normalization_and_value_oracle(seed, lam):
    g = catalog.random_game(seed, n_players=2, n_states=3, n_actions=2)
    prof = random_stationary(g, np.random.default_rng(seed))
    occ = occupation_stationary(g, "s0", lam, prof)
    assert abs(occ.entries.sum() - 1.0) <= 1e-9
    assert occ.balance_residual() <= 1e-9
    # independent oracle: v = (1-lam) (I - lam P)^-1 u
    pi = g.joint_probs(prof)
    P = np.zeros((g.n_states, g.n_states))
    u = np.zeros((g.n_states, g.n_players))
    for row in range(g.n_pairs):
        s = g.pair_state[row]
        P[s] += pi[row] * g.Q[row]
        u[s] += pi[row] * g.U[row]
    v = (1 - lam) * np.linalg.solve(np.eye(g.n_states) - lam * P, u)
    np.testing.assert_allclose(discounted_payoff(g, occ), v[0], atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_extraction_round_trip(seed):
    g = catalog.random_game(seed, n_players=1, n_states=3, n_actions=3)
    prof = random_stationary(g, np.random.default_rng(seed))
    occ = occupation_stationary(g, "s0", 0.85, prof)
    x = equivalent_stationary(g, occ)
    visited = occ.state_times() > 1e-12
    for s in np.nonzero(visited)[0]:
        np.testing.assert_allclose(x.at(s), prof[0].at(s), atol=1e-8)
    again = occupation_stationary(g, "s0", 0.85, StationaryProfile((x,)))
    np.testing.assert_allclose(again.entries, occ.entries, atol=1e-8)


def test_mixture_of_pure_strategies_respects_bounds():
    g = catalog.random_game(11, n_players=1, n_states=3, n_actions=2)
    lam = 0.8
    x = pure_strategy(g, "1", [0, 1, 0])
    y = pure_strategy(g, "1", [1, 1, 1])
    z = mixture_stationary(g, "s0", lam, x, y, 0.5)
    for s in range(g.n_states):
        lo = np.minimum(x.at(s), y.at(s))
        hi = np.maximum(x.at(s), y.at(s))
        assert np.all(z.at(s) >= lo - 1e-12) and np.all(z.at(s) <= hi + 1e-12)


def test_mixture_endpoints_and_closed_form():
    g = two_action_mdp()
    x = pure_strategy(g, "1", ["a"])
    y = pure_strategy(g, "1", ["b"])
    assert mixture_stationary(g, "s", 0.9, x, y, 1.0).at(0).tolist() == [1.0, 0.0]
    assert mixture_stationary(g, "s", 0.9, x, y, 0.0).at(0).tolist() == [0.0, 1.0]
    z = mixture_stationary(g, "s", 0.9, x, y, 0.3)
    np.testing.assert_allclose(z.at(0), [0.3, 0.7], atol=1e-14)


def test_mixture_monotone_sweep():
    g = catalog.random_game(5, n_players=1, n_states=3, n_actions=2)
    x = pure_strategy(g, "1", [0, 0, 1])
    y = pure_strategy(g, "1", [1, 0, 0])
    sweep = [mixture_stationary(g, "s0", 0.9, x, y, a) for a in np.linspace(0, 1, 11)]
    for s in range(g.n_states):
        col = np.array([z.at(s)[0] for z in sweep])
        d = np.diff(col)
        assert np.all(d >= -1e-12) or np.all(d <= 1e-12)


def test_abel_constant_sequence():
    lam, L = 0.9, 30
    direct = (1 - lam ** (L + 1)) / (1 - lam)
    assert abel_reconstruct(np.ones(L + 1), lam, 5, L) == pytest.approx(direct, abs=1e-10)


@pytest.mark.parametrize("M", [0, 5])
def test_abel_random_sequence(M):
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 50)
    lam = 0.9
    direct = float(np.sum(lam ** np.arange(50) * x))
    assert abel_reconstruct(x, lam, M, 49) == pytest.approx(direct, abs=1e-10)
    if M == 0:
        head, _ = abel_decompose(x, lam, 0, 49)
        assert head == 0.0


def test_abel_head_share_vanishes():
    x = np.ones(200)
    shares = []
    for lam in (0.9, 0.99, 0.999):
        head, _ = abel_decompose(x, lam, 5, 199)
        shares.append(head * (1 - lam))
    assert shares[0] > shares[1] > shares[2]
