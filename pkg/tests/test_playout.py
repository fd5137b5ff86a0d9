import numpy as np
import pytest

from modgame import catalog
from modgame.game_model import pure_strategy
from modgame.playout import (
    Playout,
    baseline,
    main_profile,
    one_shot_deviator,
    punishment_profile,
    stationary_deviator,
    verify_uniform_eq,
)
from modgame.uniform import synthesize


@pytest.fixture(scope="module")
def bm_sigma():
    return synthesize(catalog.bigmatch(), eps=0.1)


def test_punishment_answers_observed_frequencies(bigmatch):
    ones = [np.ones(1), np.ones(1)]
    always_B = punishment_profile(bigmatch, 0, [np.array([0.0, 1.0])] + ones)
    assert always_B[1].at(0).tolist() == [1.0, 0.0]  # L keeps player 1 at 0
    always_T = punishment_profile(bigmatch, 0, [np.array([1.0, 0.0])] + ones)
    assert always_T[1].at(0).tolist() == [0.0, 1.0]  # R absorbs into player 1's zero


def test_bigmatch_plan_mixes_player_two(bm_sigma):
    plan = bm_sigma.plan_of(0)
    at_s0 = plan.artifact.x1 if plan.branch == "A1" else plan.artifact.anchor_profile
    np.testing.assert_allclose(at_s0[1].at(0), [0.5, 0.5], atol=1e-3)
    # player 1 stays with B except for a small exit probability
    assert at_s0[0].at(0)[1] == 1.0 or plan.artifact.eta <= 0.1


def test_monitor_catches_biased_opponent(bigmatch, bm_sigma):
    engine = Playout(bm_sigma)
    L = pure_strategy(bigmatch, "2", {"s0": "L"})
    devs = [baseline(bigmatch), stationary_deviator(bigmatch, 1, L, "always L")]
    res = engine.run(0, devs, [200, 200], 1000, checkpoints=(1000,), seed=3)
    on_path = res.deviator_index == 0
    assert np.mean(res.punished[on_path] >= 0) <= 0.05
    # a few plays end early when player 1 exits before the bias is visible
    caught = res.punished[~on_path] == 1
    assert caught.mean() >= 0.95
    assert np.median(res.punish_stage[~on_path]) < 100
    # under punishment player 1 keeps at least its min-max level
    assert res.averages[1000][~on_path, 0].mean() >= 0.5 - 0.1


def test_playout_is_reproducible(bigmatch, bm_sigma):
    engine = Playout(bm_sigma)
    devs = [baseline(bigmatch), one_shot_deviator(bigmatch, 0, 0, 0)]
    a = engine.run(0, devs, [50, 50], 200, checkpoints=(200,), seed=9)
    b = engine.run(0, devs, [50, 50], 200, checkpoints=(200,), seed=9)
    np.testing.assert_array_equal(a.averages[200], b.averages[200])
    np.testing.assert_array_equal(a.punished, b.punished)


def test_one_shot_pure_violation_is_flagged():
    sigma = synthesize(catalog.three_block(), eps=0.1)
    g = sigma.game
    # player 2 is prescribed r at a; playing l there has probability zero
    assert main_profile(sigma)[1].at(0).tolist() == [0.0, 1.0]
    res = Playout(sigma).run(0, [one_shot_deviator(g, 1, 0, 0)], [20], 50, checkpoints=(50,), seed=1)
    assert (res.punished == 1).all() and (res.punish_stage == 0).all()


def test_verify_example2_small():
    sigma = synthesize(catalog.example2(), eps=0.1)
    rep = verify_uniform_eq(sigma, horizons=(200, 1000), plays=50, baseline_plays=200, random_stationary=1, random_automata=1)
    doc = rep.to_json(sigma.game)
    assert rep.passed and doc["passed"]
    assert {"floors", "probes", "max_gain", "exact_on_path"} <= set(doc)
    assert all(f["mean"] == pytest.approx(3.0, abs=0.05) for f in doc["floors"])
    assert "PASS" in rep.summary(sigma.game)
