import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modgame import catalog
from modgame.game_model import StationaryProfile, StationaryStrategy, pure_strategy, uniform_profile
from modgame.modified import (
    Partition,
    capped_sum,
    check_min_superadditivity,
    make_spec,
    modified_payoff,
    modified_payoff_profile,
    spec_from_json,
)
from modgame.occupancy import block_breakdown, discounted_payoff, occupation_stationary

from conftest import random_stationary


def test_partition_validation(bigmatch):
    with pytest.raises(ValueError, match="cover"):
        Partition.of(bigmatch, [["s0"], ["s1"]])
    with pytest.raises(ValueError, match="overlap"):
        Partition.of(bigmatch, [["s0", "s1"], ["s1", "s2"]])
    p = Partition.of(bigmatch, [["s0"], ["s1", "s2"]])
    assert p.index() == {0: 0, 1: 1, 2: 1}
    assert Partition.singletons(bigmatch).refines(p)


def test_example2_modified_payoff(example2):
    for lam, expected, tol in ((0.5, 4 / 3, 1e-12), (0.999, 2.0, 5e-3)):
        spec = spec_from_json(example2, catalog.example2_spec(lam))
        occ = occupation_stationary(example2, "s0", lam, uniform_profile(example2))
        assert modified_payoff(example2, spec, occ, 0) == pytest.approx(expected, abs=tol)


def test_high_cutoffs_recover_discounted_payoff(bigmatch):
    R = bigmatch.payoff_bound
    prof = random_stationary(bigmatch, np.random.default_rng(0))
    spec = make_spec(bigmatch, "s0", 0.9, [Partition.singletons(bigmatch)] * 2, [[R] * 3] * 2)
    occ = occupation_stationary(bigmatch, "s0", 0.9, prof)
    np.testing.assert_allclose(
        modified_payoff_profile(bigmatch, spec, prof), discounted_payoff(bigmatch, occ), atol=1e-15
    )


def test_example1_block_contributes_zero(example1):
    spec = spec_from_json(example1, catalog.example1_spec(0.6, "s0"))
    ps = spec.per_player[0]
    for a in ("T", "B"):
        prof = StationaryProfile((pure_strategy(example1, "1", {"s1": a}),))
        occ = occupation_stationary(example1, "s0", 0.6, prof)
        bd = block_breakdown(example1, occ, ps.partition.blocks)
        assert abs(min(bd.payoffs[0, 0], bd.times[0] * ps.cutoffs[0])) <= 1e-12


@pytest.mark.parametrize("lam,p", [(0.5, 0.3), (0.9, 0.05), (0.99, 0.01)])
def test_bigmatch_hand_formula(bigmatch, lam, p):
    # player 2 plays L: in-block payoff 0 per stage, absorbing into s2 (payoff 1)
    spec = spec_from_json(bigmatch, catalog.bigmatch_spec(lam))
    prof = StationaryProfile(
        (StationaryStrategy((np.array([p, 1 - p]), np.ones(1), np.ones(1))), pure_strategy(bigmatch, "2", {"s0": "L"}))
    )
    alpha = catalog.bigmatch_alpha(lam, p)
    y = 1.0
    expected = alpha * min(1 - y, 0.5) + (1 - alpha) * y
    assert modified_payoff_profile(bigmatch, spec, prof)[0] == pytest.approx(expected, abs=1e-12)


def test_unvisited_blocks_add_nothing(example1):
    spec = spec_from_json(example1, catalog.example1_spec(0.6, "s0"))
    prof = StationaryProfile((pure_strategy(example1, "1", {"s1": "T"}),))
    occ = occupation_stationary(example1, "s0", 0.6, prof)
    bd = block_breakdown(example1, occ, spec.per_player[0].partition.blocks)
    assert bd.times[2] == 0.0  # s3 is never reached under T
    assert capped_sum(bd.payoffs[2:, 0], bd.times[2:], spec.per_player[0].cutoffs[2:]) == 0.0


def test_min_superadditivity_examples():
    # rows are (a1, b1, a2, b2)
    assert check_min_superadditivity([(1, 2, 3, 0)])
    assert check_min_superadditivity([(2, 2, 2, 2)])
    rng = np.random.default_rng(0)
    assert check_min_superadditivity(rng.uniform(-5, 5, (10_000, 4)))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_domination_and_monotonicity(seed):
    g = catalog.random_game(seed, n_players=2, n_states=3, n_actions=2)
    spec = spec_from_json(g, catalog.random_spec(g, seed))
    prof = random_stationary(g, np.random.default_rng(seed))
    occ = occupation_stationary(g, spec.s0, spec.lam, prof)
    gamma = discounted_payoff(g, occ)
    for i in range(2):
        hat = modified_payoff(g, spec, occ, i)
        assert hat <= gamma[i] + 1e-9
        # raising one cutoff never lowers the modified payoff
        ps = spec.per_player[i]
        bumped = ps.cutoffs.copy()
        bumped[0] += 0.5
        bd = block_breakdown(g, occ, ps.partition.blocks)
        assert capped_sum(bd.payoffs[:, i], bd.times, bumped) >= hat - 1e-12
