"""Request handlers behind both the HTTP service and the CLI.

Every handler takes a request model from ``schemas`` and returns the matching
response model. Bad input raises InputError; numerical failures raise
SolverFailure. Nothing here touches the filesystem.
"""

from __future__ import annotations

import csv
import functools
import io
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import catalog
from .game_model import (
    GameFormatError,
    GameValidationError,
    StationaryProfile,
    StochasticGame,
    game_from_json,
    game_to_json,
    profile_from_json,
    profile_to_json,
    strategy_to_mapping,
    uniform_profile,
)
from .modified import ModifiedSpec, Partition, capped_sum, modified_payoff, spec_from_json
from .occupancy import block_breakdown, discounted_payoff, n_stage_payoff, occupation, occupation_stationary
from .schemas import (
    BestResponseRequest,
    BestResponseResponse,
    ClassifyRequest,
    ClassifyResponse,
    CoinRequest,
    CoinResponse,
    EquilibriumRequest,
    EquilibriumResponse,
    EvalRequest,
    EvalResponse,
    GameRequest,
    ModifiedEvalRequest,
    ModifiedEvalResponse,
    ReproduceRequest,
    ReproduceResponse,
    SimulateRequest,
    SimulateResponse,
    UniformEqRequest,
    UniformEqResponse,
    ValidateResponse,
    ValuesRequest,
    ValuesResponse,
)
from .simulate import coin_run_oracle, segment_runs, simulate
from .structure import classify
from .uniform import PipelineError, synthesize, uniform_minmax_values, verify_uniform_eq
from .values import (
    DEFAULT_GRID,
    SolverError,
    discounted_maxmin,
    discounted_minmax,
    mdp_best_response,
    modified_best_response,
    modified_maxmin_stat,
    modified_minmax_stat,
    stationary_equilibrium,
    trace_equilibria,
    uniform_value,
)


class InputError(ValueError):
    """Malformed or invalid input (CLI exit code 2, HTTP 422)."""


class SolverFailure(RuntimeError):
    """A solver did not deliver (CLI exit code 3, HTTP 500)."""


def _guarded(fn):
    """Map library exceptions onto the two service error kinds."""

    @functools.wraps(fn)
    def wrapper(req):
        try:
            return fn(req)
        except (InputError, SolverFailure):
            raise
        except (SolverError, PipelineError) as exc:
            raise SolverFailure(str(exc)) from None
        except (ValueError, KeyError) as exc:
            raise InputError(str(exc)) from None

    return wrapper


def _game(doc: dict) -> StochasticGame:
    try:
        return game_from_json(doc)
    except GameValidationError as exc:
        raise InputError("invalid game: " + "; ".join(exc.violations)) from None
    except GameFormatError as exc:
        raise InputError(str(exc)) from None


def _state(game: StochasticGame, name: str) -> int:
    try:
        return game.state_index(name)
    except KeyError:
        raise InputError(f"unknown state {name!r}") from None


def _player(game: StochasticGame, name: str) -> int:
    try:
        return game.player_index(name)
    except KeyError:
        raise InputError(f"unknown player {name!r}") from None


def _profile(game: StochasticGame, doc: dict | None) -> StationaryProfile:
    if doc is None:
        return uniform_profile(game)
    try:
        return profile_from_json(game, doc)
    except GameFormatError as exc:
        raise InputError(str(exc)) from None


def _spec(game: StochasticGame, doc: dict, s0: str | None = None, lam: float | None = None) -> ModifiedSpec:
    try:
        spec = spec_from_json(game, doc)
    except GameFormatError as exc:
        raise InputError(str(exc)) from None
    if s0 is not None:
        spec = spec.with_start(_state(game, s0))
    if lam is not None:
        _check_lambda(lam)
        spec = spec.with_lambda(lam)
    return spec


def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam < 1.0:
        raise InputError(f"lambda must lie in [0, 1), got {lam}")


def _grid(grid) -> tuple[float, ...]:
    if grid is None:
        return DEFAULT_GRID
    g = tuple(float(x) for x in grid)
    if not g or any(not 0.0 <= x < 1.0 for x in g) or any(b <= a for a, b in zip(g, g[1:])):
        raise InputError("lambda grid must be strictly increasing inside [0, 1)")
    return g


def _by_player(game: StochasticGame, vec) -> dict[str, float]:
    return {p: float(v) for p, v in zip(game.players, vec)}


def _values_table(game: StochasticGame, vbar: np.ndarray) -> dict[str, dict[str, float]]:
    return {p: {s: float(v) for s, v in zip(game.states, vbar[i])} for i, p in enumerate(game.players)}


# ---------------------------------------------------------------------------------
# handlers


@_guarded
def validate(req: GameRequest) -> ValidateResponse:
    try:
        game = game_from_json(req.game)
    except GameValidationError as exc:
        return ValidateResponse(valid=False, violations=list(exc.violations))
    except GameFormatError as exc:
        return ValidateResponse(valid=False, violations=[str(exc)])
    return ValidateResponse(
        valid=True, players=list(game.players), states=list(game.states), payoff_bound=game.payoff_bound
    )


@_guarded
def evaluate(req: EvalRequest) -> EvalResponse:
    game = _game(req.game)
    s0 = _state(game, req.s0)
    prof = _profile(game, req.profile)
    if req.horizon is not None:
        pay = n_stage_payoff(game, s0, prof, req.horizon)
        return EvalResponse(s0=req.s0, horizon=req.horizon, payoffs=_by_player(game, pay))
    if req.lam is None:
        raise InputError("eval needs a discount factor or a horizon")
    _check_lambda(req.lam)
    occ = occupation(game, s0, req.lam, prof)
    return EvalResponse(
        s0=req.s0,
        lam=req.lam,
        payoffs=_by_player(game, discounted_payoff(game, occ)),
        occupation=occ.to_json(),
        csv=occ.to_csv(),
    )


@_guarded
def modified_eval(req: ModifiedEvalRequest) -> ModifiedEvalResponse:
    game = _game(req.game)
    spec = _spec(game, req.spec, req.s0, req.lam)
    prof = _profile(game, req.profile)
    mod, disc, blocks = {}, {}, {}
    rows = [["player", "block", "time", "payoff", "cutoff", "capped"]]
    for i, p in enumerate(game.players):
        occ = occupation_stationary(game, spec.s0, spec.discount(i), prof)
        mod[p] = modified_payoff(game, spec, occ, i)
        disc[p] = float(discounted_payoff(game, occ)[i])
        ps = spec.per_player[i]
        bd = block_breakdown(game, occ, ps.partition.blocks)
        entries = []
        for D, t, u, c in zip(bd.blocks, bd.times, bd.payoffs[:, i], ps.cutoffs):
            name = ",".join(game.states[s] for s in sorted(D))
            capped = float(min(u, t * c))
            entries.append({"states": name.split(","), "time": float(t), "payoff": float(u), "cutoff": float(c), "capped": capped})
            rows.append([p, name, repr(float(t)), repr(float(u)), repr(float(c)), repr(capped)])
        blocks[p] = entries
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return ModifiedEvalResponse(
        s0=game.states[spec.s0], lam=spec.lam, modified=mod, discounted=disc, blocks=blocks, csv=buf.getvalue()
    )


@_guarded
def best_response(req: BestResponseRequest) -> BestResponseResponse:
    game = _game(req.game)
    spec = _spec(game, req.spec, req.s0, req.lam)
    i = _player(game, req.player)
    prof = _profile(game, req.profile)
    lam = spec.discount(i)
    try:
        if req.kind == "modified":
            strat, value = modified_best_response(game, spec, i, prof)
            current = modified_payoff(game, spec, occupation_stationary(game, spec.s0, lam, prof), i)
        else:
            strat, v = mdp_best_response(game, i, prof, lam)
            value = float(v[spec.s0])
            current = float(discounted_payoff(game, occupation_stationary(game, spec.s0, lam, prof))[i])
    except SolverError as exc:
        raise SolverFailure(str(exc)) from None
    return BestResponseResponse(
        player=req.player,
        kind=req.kind,
        strategy=strategy_to_mapping(game, i, strat),
        value=float(value),
        current=float(current),
        gap=float(max(value - current, 0.0)),
    )


@_guarded
def equilibrium(req: EquilibriumRequest) -> EquilibriumResponse:
    game = _game(req.game)
    spec = _spec(game, req.spec)
    if req.lambda_grid:
        results = trace_equilibria(game, spec, _grid(req.lambda_grid), req.eps, req.restarts, req.seed)
    else:
        results = [stationary_equilibrium(game, spec, req.eps, req.restarts, req.seed)]
    return EquilibriumResponse(results=[r.to_json(game) for r in results], certified=all(r.certified for r in results))


def _discounted_job(args):
    doc, i, kind, lam, tol = args
    game = game_from_json(doc)
    solver = discounted_minmax if kind == "minmax" else discounted_maxmin
    return solver(game, i, lam, tol)


@_guarded
def values(req: ValuesRequest) -> ValuesResponse:
    game = _game(req.game)
    i = _player(game, req.player)
    if req.stationary:
        if req.spec is None:
            raise InputError("stationary values need a modified-game spec")
        spec = _spec(game, req.spec, lam=req.lam)
        fn = modified_minmax_stat if req.kind == "minmax" else modified_maxmin_stat
        res = fn(game, spec, i)
        return ValuesResponse(
            player=req.player,
            kind=req.kind,
            mode="stationary",
            values={"value": res.value, "lambda": spec.discount(i), "s0": game.states[spec.s0]},
            detail={"profile": profile_to_json(game, res.profile), "evaluations": res.evaluations},
        )
    if req.extrapolate:
        est = uniform_value(game, i, req.kind, _grid(req.lambda_grid), req.tol)
        doc = est.to_json(game)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda"] + list(game.states))
        for lam, row in zip(est.grid, est.raw):
            w.writerow([repr(lam)] + [repr(float(x)) for x in row])
        w.writerow(["limit"] + [repr(float(x)) for x in est.values])
        return ValuesResponse(player=req.player, kind=req.kind, mode="uniform", values=doc["values"], detail=doc, csv=buf.getvalue())
    grid = _grid(req.lambda_grid) if req.lambda_grid else None
    if grid is None:
        if req.lam is None:
            raise InputError("values need --lambda, --lambda-grid or --extrapolate")
        _check_lambda(req.lam)
        grid = (req.lam,)
    jobs = [(req.game, i, req.kind, lam, req.tol) for lam in grid]
    if req.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=req.jobs) as pool:
            reports = list(pool.map(_discounted_job, jobs))
    else:
        reports = [_discounted_job(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda"] + list(game.states))
    for r in reports:
        w.writerow([repr(r.lam)] + [repr(float(x)) for x in r.values])
    first = reports[-1]
    return ValuesResponse(
        player=req.player,
        kind=req.kind,
        mode="discounted",
        values={s: float(v) for s, v in zip(game.states, first.values)},
        detail={"per_lambda": [r.to_json(game) for r in reports]},
        csv=buf.getvalue(),
    )


@_guarded
def classify_game(req: ClassifyRequest) -> ClassifyResponse:
    game = _game(req.game)
    vbar = uniform_minmax_values(game, _grid(req.lambda_grid))
    report = classify(game, vbar, req.grouping_tol)
    return ClassifyResponse(
        strongly_controllable=report.strongly_controllable,
        report=report.to_json(game),
        uniform_minmax=_values_table(game, vbar),
        table=report.table(game),
    )


@_guarded
def uniform_eq(req: UniformEqRequest) -> UniformEqResponse:
    game = _game(req.game)
    s0 = _state(game, req.s0) if req.s0 is not None else 0
    if any(h < 1 for h in req.horizons):
        raise InputError("horizons must be positive")
    try:
        sigma = synthesize(game, req.eps, _grid(req.lambda_grid), req.seed)
    except PipelineError as exc:
        raise SolverFailure(str(exc)) from None
    except SolverError as exc:
        raise SolverFailure(str(exc)) from None
    rep = verify_uniform_eq(
        sigma, req.eps, horizons=req.horizons, plays=req.plays, baseline_plays=req.baseline_plays, seed=req.seed, s0=s0
    )
    return UniformEqResponse(
        passed=rep.passed,
        uniform_minmax=_values_table(game, sigma.values),
        classification=sigma.classification.to_json(game),
        blocks=_jsonable(sigma.constants()),
        verification=rep.to_json(game),
        summary=rep.summary(game),
    )


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


@_guarded
def simulate_play(req: SimulateRequest) -> SimulateResponse:
    game = _game(req.game)
    s0 = _state(game, req.s0)
    prof = _profile(game, req.profile)
    rec = simulate(game, prof, s0, req.horizon, req.seed, req.play)
    out = SimulateResponse(
        horizon=req.horizon, jsonl=rec.to_jsonl(game), average_payoffs=_by_player(game, rec.payoffs.mean(axis=0))
    )
    if req.partition is not None:
        try:
            part = Partition.of(game, req.partition)
        except (KeyError, ValueError) as exc:
            raise InputError(f"partition: {exc}") from None
        seg = segment_runs(rec, part)
        index = part.index()
        out.switches = seg.switches
        out.taus = seg.taus
        out.csv = seg.to_csv([index[s] for s in rec.states[: rec.horizon]])
    return out


@_guarded
def coin(req: CoinRequest) -> CoinResponse:
    return CoinResponse(report=coin_run_oracle(req.p, req.samples, req.seed).to_json())


@_guarded
def reproduce(req: ReproduceRequest) -> ReproduceResponse:
    fn = {"example1": _reproduce_example1, "example2": _reproduce_example2, "bigmatch": _reproduce_bigmatch}[req.name]
    games, tables, checks = fn()
    return ReproduceResponse(
        name=req.name, games=games, tables=tables, checks=checks, passed=all(c["ok"] for c in checks)
    )


def _check(name: str, value: float, expected: float, tol: float) -> dict:
    return {"check": name, "value": float(value), "expected": float(expected), "tol": tol, "ok": bool(abs(value - expected) <= tol)}


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _reproduce_example2():
    game = catalog.example2()
    prof = uniform_profile(game)
    rows, checks = [], []
    for lam in (0.5, 0.9, 0.99, 0.999):
        spec = spec_from_json(game, catalog.example2_spec(lam))
        occ = occupation_stationary(game, 0, lam, prof)
        gamma = float(discounted_payoff(game, occ)[0])
        mod = modified_payoff(game, spec, occ, 0)
        rows.append([lam, gamma, mod])
        if lam == 0.5:
            checks.append(_check("discounted payoff at 0.5 = 6l/(1+l)", gamma, 6 * lam / (1 + lam), 1e-9))
            checks.append(_check("modified payoff at 0.5 = 4l/(1+l)", mod, 4 * lam / (1 + lam), 1e-9))
        if lam == 0.999:
            checks.append(_check("discounted payoff near 1 -> 3", gamma, 3.0, 5e-3))
            checks.append(_check("modified payoff near 1 -> 2", mod, 2.0, 5e-3))
    return {"example2": game_to_json(game)}, {"example2.csv": _table(["lambda", "gamma", "gamma_hat"], rows)}, checks


def _reproduce_example1():
    lam, p = 0.6, 0.5
    game = catalog.example1(lam, p)
    rows, checks = [], []
    expected = {"s0": "B", "s1": "T"}
    for start in ("s0", "s1"):
        spec = spec_from_json(game, catalog.example1_spec(lam, start))
        strat, value = modified_best_response(game, spec, 0, uniform_profile(game))
        choice = game.action_list(1, 0)[int(np.argmax(strat.probs[1]))]
        rows.append([start, choice, value])
        checks.append({"check": f"best response from {start} plays {expected[start]} at s1", "value": choice, "expected": expected[start], "ok": choice == expected[start]})
    spec = spec_from_json(game, catalog.example1_spec(lam, "s0"))
    ps = spec.per_player[0]
    for a in ("T", "B"):
        from .game_model import pure_strategy

        prof = StationaryProfile((pure_strategy(game, 0, {"s1": a}),))
        occ = occupation_stationary(game, 0, lam, prof)
        bd = block_breakdown(game, occ, ps.partition.blocks)
        contrib = capped_sum(bd.payoffs[:1, 0], bd.times[:1], ps.cutoffs[:1])
        checks.append(_check(f"in-block modified contribution from s0 under {a}", contrib, 0.0, 1e-9))
    return (
        {"example1": game_to_json(game)},
        {"example1.csv": _table(["initial_state", "action_at_s1", "modified_value"], rows)},
        checks,
    )


def _reproduce_bigmatch():
    game = catalog.bigmatch()
    rows, checks = [], []
    for lam in (0.5, 0.9, 0.99):
        spec = spec_from_json(game, catalog.bigmatch_spec(lam))
        res = modified_maxmin_stat(game, spec, 0)
        pT = float(res.profile[0].probs[0][0])
        alpha = catalog.bigmatch_alpha(lam, pT)
        rows.append([lam, res.value, pT, alpha])
        checks.append(_check(f"stationary max-min at {lam}", res.value, 1.0 / 3.0, 1e-3))
        checks.append(_check(f"maximizer alpha at {lam}", alpha, 2.0 / 3.0, 1e-2))
    est = uniform_value(game, 0, "maxmin")
    checks.append(_check("uniform max-min of player 1", est.values[0], 0.5, 1e-2))
    mm = modified_minmax_stat(game, spec_from_json(game, catalog.bigmatch_spec(0.99)), 0)
    checks.append(_check("stationary min-max at 0.99", mm.value, 0.5, 1e-2))
    return (
        {"bigmatch": game_to_json(game)},
        {"bigmatch.csv": _table(["lambda", "maxmin_stat", "p_T", "alpha"], rows)},
        checks,
    )
