"""Acceptance criteria, one test per criterion.

Each check returns (ok, detail). The PASS/FAIL lines are collected in
ACCEPTANCE and printed in the terminal summary (see conftest.py); running this
file directly prints them too.
"""

import time

import numpy as np
import pytest

from modgame import catalog
from modgame.game_model import StationaryProfile, StationaryStrategy, pure_strategy, uniform_profile
from modgame.modified import check_min_superadditivity, modified_payoff, spec_from_json
from modgame.occupancy import (
    abel_decompose,
    abel_reconstruct,
    block_breakdown,
    discounted_payoff,
    equivalent_stationary,
    mixture_stationary,
    occupation_stationary,
)
from modgame.simulate import coin_run_oracle
from modgame.structure import classify
from modgame.uniform import synthesize, uniform_minmax_values, verify_uniform_eq
from modgame.values import (
    best_response_gaps,
    discounted_maxmin,
    discounted_minmax,
    modified_best_response,
    modified_maxmin_stat,
    modified_minmax_stat,
    stationary_equilibrium,
    uniform_value,
)

ACCEPTANCE: dict[int, str] = {}


def random_stationary(game, rng) -> StationaryProfile:
    return StationaryProfile(
        tuple(
            StationaryStrategy(tuple(rng.dirichlet(np.ones(game.n_actions(s, i))) for s in range(game.n_states)))
            for i in range(game.n_players)
        )
    )


def linear_solve_oracle(game, s0, lam, profile):
    """State occupation d and expected stage payoffs u from a direct solve of
    d = (1-lam) e_s0 (I - lam P)^-1, independent of the occupancy module."""
    pi = game.joint_probs(profile)
    P = np.zeros((game.n_states, game.n_states))
    u = np.zeros((game.n_states, game.n_players))
    for row in range(game.n_pairs):
        s = game.pair_state[row]
        P[s] += pi[row] * game.Q[row]
        u[s] += pi[row] * game.U[row]
    e = np.zeros(game.n_states)
    e[s0] = 1.0
    d = (1 - lam) * np.linalg.solve((np.eye(game.n_states) - lam * P).T, e)
    return d, u


# ---------------------------------------------------------------------------------
# criteria


def crit_1():
    game = catalog.bigmatch()
    worst_v, worst_a, rows = 0.0, 0.0, []
    for lam in (0.5, 0.9, 0.99):
        spec = spec_from_json(game, catalog.bigmatch_spec(lam))
        res = modified_maxmin_stat(game, spec, "1")
        pT = float(res.profile[0].probs[0][0])
        alpha = (1 - lam) / (1 - lam * (1 - pT))
        worst_v = max(worst_v, abs(res.value - 1 / 3))
        worst_a = max(worst_a, abs(alpha - 2 / 3))
        rows.append(f"{lam}:{res.value:.5f}/alpha={alpha:.4f}")
    return worst_v <= 1e-3 and worst_a <= 1e-2, f"max |v-1/3|={worst_v:.2e}, max |alpha-2/3|={worst_a:.2e} ({', '.join(rows)})"


def crit_2():
    game = catalog.bigmatch()
    u = uniform_value(game, "1", "maxmin").values[0]
    mm = modified_minmax_stat(game, spec_from_json(game, catalog.bigmatch_spec(0.99)), "1").value
    return abs(u - 0.5) <= 1e-2 and abs(mm - 0.5) <= 1e-2, f"uniform maxmin={u:.5f}, minmax_stat(0.99)={mm:.5f}"


def crit_3():
    game = catalog.example2()
    prof = uniform_profile(game)

    def both(lam):
        spec = spec_from_json(game, catalog.example2_spec(lam))
        occ = occupation_stationary(game, "s0", lam, prof)
        return float(discounted_payoff(game, occ)[0]), modified_payoff(game, spec, occ, 0)

    g999, m999 = both(0.999)
    g5, m5 = both(0.5)
    ok = abs(g999 - 3) <= 5e-3 and abs(m999 - 2) <= 5e-3
    ok &= abs(g5 - 6 * 0.5 / 1.5) <= 1e-9 and abs(m5 - 4 * 0.5 / 1.5) <= 1e-9
    return ok, f"0.999: gamma={g999:.5f} hat={m999:.5f}; 0.5: gamma err={abs(g5 - 2):.1e} hat err={abs(m5 - 4 / 3):.1e}"


def crit_4():
    lam, p = 0.6, 0.5
    game = catalog.example1(lam, p)
    assert abs(lam / (1 - lam * (1 - p)) - 6 / 7) < 1e-15
    choices = {}
    for start in ("s0", "s1"):
        spec = spec_from_json(game, catalog.example1_spec(lam, start))
        strat, _ = modified_best_response(game, spec, 0, uniform_profile(game))
        choices[start] = game.action_list(1, 0)[int(np.argmax(strat.probs[1]))]
    spec = spec_from_json(game, catalog.example1_spec(lam, "s0"))
    ps = spec.per_player[0]
    contrib = []
    for a in ("T", "B"):
        prof = StationaryProfile((pure_strategy(game, 0, {"s1": a}),))
        bd = block_breakdown(game, occupation_stationary(game, "s0", lam, prof), ps.partition.blocks)
        contrib.append(min(bd.payoffs[0, 0], bd.times[0] * ps.cutoffs[0]))
    ok = choices == {"s0": "B", "s1": "T"} and max(abs(c) for c in contrib) <= 1e-9
    return ok, f"best responses {choices}, in-block contributions {contrib}"


def crit_5(n=1000):
    worst = {"decomposition": 0.0, "domination": 0.0, "equality": 0.0, "abel": 0.0, "superadditivity": 0.0}
    super_ok = True
    for k in range(n):
        g = catalog.random_game(k, n_players=2, n_states=int(2 + k % 3), n_actions=2, payoff_scale=float(1 + k % 5))
        R = g.payoff_bound
        rng = np.random.default_rng(k)
        doc = catalog.random_spec(g, k)
        spec = spec_from_json(g, doc)
        prof = random_stationary(g, rng)
        occ = occupation_stationary(g, spec.s0, spec.lam, prof)
        gamma = discounted_payoff(g, occ)
        d, u = linear_solve_oracle(g, spec.s0, spec.lam, prof)
        high = spec_from_json(g, {**doc, "per_player": [{**pp, "cutoffs": [R] * len(pp["cutoffs"])} for pp in doc["per_player"]]})
        for i in range(2):
            ps = spec.per_player[i]
            bd = block_breakdown(g, occ, ps.partition.blocks)
            times = np.array([d[list(D)].sum() for D in ps.partition.blocks])
            pays = np.array([(d[list(D)] * u[list(D), i]).sum() for D in ps.partition.blocks])
            hat_oracle = float(np.minimum(pays, times * ps.cutoffs).sum())
            hat = modified_payoff(g, spec, occ, i)
            worst["decomposition"] = max(
                worst["decomposition"],
                abs(hat - hat_oracle) / R,
                abs(pays.sum() - gamma[i]) / R,
                float(np.abs(bd.times - times).max()),
                float(np.abs(bd.payoffs[:, i] - pays).max()) / R,
            )
            worst["domination"] = max(worst["domination"], (hat - gamma[i]) / R)
            worst["equality"] = max(worst["equality"], abs(modified_payoff(g, high, occ, i) - gamma[i]) / R)
            # split the first block in two: capping the union dominates the sum of caps
            D = sorted(ps.partition.blocks[0])
            if len(D) >= 2:
                D1, D2 = D[:1], D[1:]
                c = ps.cutoffs[0]
                a1, a2 = (d[D1] * u[D1, i]).sum(), (d[D2] * u[D2, i]).sum()
                b1, b2 = d[D1].sum() * c, d[D2].sum() * c
                gap = np.minimum(a1, b1) + np.minimum(a2, b2) - np.minimum(a1 + a2, b1 + b2)
                worst["superadditivity"] = max(worst["superadditivity"], gap / R)
                super_ok &= check_min_superadditivity([(a1, b1, a2, b2)])
        # Abel summation on a bounded sequence of length L+1
        L, M = int(rng.integers(5, 200)), int(rng.integers(0, 5))
        lam = float(rng.uniform(0.5, 0.999))
        x = rng.uniform(-R, R, L + 1)
        direct = float(np.sum(lam ** np.arange(L + 1) * x))
        head, _ = abel_decompose(x, lam, M, L)
        worst["abel"] = max(worst["abel"], abs(abel_reconstruct(x, lam, M, L) - direct) / (R * (L + 1)))
    ok = super_ok and all(v <= 1e-8 for v in worst.values())
    return ok, ", ".join(f"{k}={v:.1e}" for k, v in worst.items()) + " (violation / R)"


def crit_6(n=100):
    worst_rt, bad_mono = 0.0, 0
    alphas = np.linspace(0, 1, 11)
    for k in range(n):
        g = catalog.random_game(1000 + k, n_players=1, n_states=3, n_actions=3)
        rng = np.random.default_rng(k)
        lam = float(rng.uniform(0.3, 0.99))
        prof = random_stationary(g, rng)
        occ = occupation_stationary(g, "s0", lam, prof)
        x = equivalent_stationary(g, occ)
        again = occupation_stationary(g, "s0", lam, StationaryProfile((x,)))
        worst_rt = max(worst_rt, float(np.abs(again.entries - occ.entries).max()))
        a, b = random_stationary(g, rng)[0], random_stationary(g, rng)[0]
        sweep = [mixture_stationary(g, "s0", lam, a, b, w) for w in alphas]
        for s in range(g.n_states):
            cols = np.array([z.at(s) for z in sweep])
            d = np.diff(cols, axis=0)
            if not all(np.all(d[:, j] >= -1e-12) or np.all(d[:, j] <= 1e-12) for j in range(cols.shape[1])):
                bad_mono += 1
    return worst_rt <= 1e-8 and bad_mono == 0, f"round-trip error {worst_rt:.1e}, non-monotone sweeps {bad_mono}/{n * 3}"


def crit_7(n=20):
    worst, uncertified, mislabeled = 0.0, 0, 0
    for k in range(n):
        g = catalog.random_game(2000 + k, n_players=2, n_states=2 + k % 2, n_actions=2)
        spec = spec_from_json(g, catalog.random_spec(g, 2000 + k))
        res = stationary_equilibrium(g, spec, eps=1e-4, seed=k)
        gap = float(best_response_gaps(g, spec, res.profile)[3].max())
        ok_here = gap <= 1e-4 * g.payoff_bound
        uncertified += not res.certified
        mislabeled += res.certified != ok_here
        worst = max(worst, gap / g.payoff_bound)
    return uncertified == 0 and mislabeled == 0, f"max gap/R={worst:.1e}, uncertified {uncertified}/{n}, flag mismatches {mislabeled}"


def crit_8(n=20):
    worst_min, worst_max = -np.inf, -np.inf
    for k in range(n):
        g = catalog.random_game(3000 + k, n_players=2, n_states=2 + k % 2, n_actions=2)
        spec = spec_from_json(g, catalog.random_spec(g, 3000 + k))
        R = g.payoff_bound
        for i in range(2):
            lam = spec.discount(i)
            a = modified_minmax_stat(g, spec, i).value - discounted_minmax(g, i, lam, tol=1e-10).values[spec.s0]
            b = modified_maxmin_stat(g, spec, i).value - discounted_maxmin(g, i, lam, tol=1e-10).values[spec.s0]
            worst_min, worst_max = max(worst_min, a / R), max(worst_max, b / R)
    return worst_min <= 1e-6 and worst_max <= 1e-6, f"max (minmax_stat - minmax)/R={worst_min:.2e}, max (maxmin_stat - maxmin)/R={worst_max:.2e}"


def crit_9():
    bm = catalog.bigmatch()
    rep = classify(bm, uniform_minmax_values(bm))
    D, tag, w = rep.tag_of(0)
    bm_ok = rep.strongly_controllable and tag == "strongly_controllable" and w is not None and w.names(bm) == ("1", "s0", "T")
    ex2 = catalog.example2()
    rep2 = classify(ex2, uniform_minmax_values(ex2))
    ex2_ok = all(tag == "closed" for _, tag, _ in rep2.tags)
    tx = catalog.two_exit()
    rep3 = classify(tx, uniform_minmax_values(tx))
    tx_ok = not rep3.strongly_controllable
    return bm_ok and ex2_ok and tx_ok, f"bigmatch s0: {tag} {w.names(bm) if w else None}; example2: {[t for _, t, _ in rep2.tags]}; two_exit rejected: {tx_ok}"


def crit_10():
    parts, ok = [], True
    for name in ("example2", "bigmatch", "three_block"):
        t0 = time.time()
        sigma = synthesize(catalog.CATALOG[name](), eps=0.1)
        rep = verify_uniform_eq(sigma, horizons=(1000, 10000))
        ok &= rep.passed
        parts.append(f"{name}: {'PASS' if rep.passed else 'FAIL'} max gain {rep.max_gain:.3f} ({time.time() - t0:.0f}s)")
    return ok, "; ".join(parts)


def crit_11():
    parts, ok = [], True
    for p in (0.3, 0.5, 0.9):
        rep = coin_run_oracle(p, samples=100_000, seed=0)
        ok &= len(rep.matches) == 1
        parts.append(f"p={p}: mean {rep.mean:.4f}+-{rep.half_width:.4f} matches {rep.matches}")
    return ok, "; ".join(parts)


CRITERIA = {
    1: ("Big Match stationary max-min 1/3 at alpha 2/3", crit_1),
    2: ("Big Match uniform max-min and stationary min-max 1/2", crit_2),
    3: ("Example 2 limits and closed forms", crit_3),
    4: ("Example 1 start-dependent best response", crit_4),
    5: ("payoff identity suite", crit_5),
    6: ("stationary equivalence suite", crit_6),
    7: ("equilibrium certification", crit_7),
    8: ("inequality chain", crit_8),
    9: ("structure classification", crit_9),
    10: ("uniform equilibrium pipeline", crit_10),
    11: ("coin-run harness", crit_11),
}


def run_criterion(k: int) -> tuple[bool, str]:
    title, fn = CRITERIA[k]
    t0 = time.time()
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failure, reported like any other
        ok, detail = False, f"{type(exc).__name__}: {exc}"
    line = f"{'PASS' if ok else 'FAIL'} criterion {k:>2} {title}: {detail} [{time.time() - t0:.1f}s]"
    ACCEPTANCE[k] = line
    print(line)
    return ok, line


@pytest.mark.parametrize("k", sorted(CRITERIA))
def test_criterion(k):
    ok, line = run_criterion(k)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(k)[0] for k in sorted(CRITERIA)]
    raise SystemExit(0 if all(results) else 1)
