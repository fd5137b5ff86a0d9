"""Command-line interface.

Each subcommand reads its input files, builds a request model and hands it to
the matching handler, either in-process (default) or over HTTP with
``--server URL``. Results go to stdout or ``--out``; every run also writes a
RunManifest (argv, input hashes, seed, versions, output hashes) that
``modgame replay`` can re-execute and compare byte for byte.

Exit codes: 0 success, 2 invalid input, 3 solver failure or failed check.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__, schemas as M
from .service import InputError, SolverFailure

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _versions() -> dict[str, str]:
    import numpy
    import pydantic
    import scipy

    return {
        "modgame": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "pydantic": pydantic.__version__,
    }


@dataclass
class RunManifest:
    command: list[str]
    inputs: dict[str, str] = field(default_factory=dict)
    seed: int | None = None
    versions: dict[str, str] = field(default_factory=_versions)
    outputs: dict[str, str] = field(default_factory=dict)
    exit_code: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str | Path) -> "RunManifest":
        doc = json.loads(Path(path).read_text())
        return cls(**doc)


class _Run:
    """Per-invocation state: input hashes and output hashes for the manifest."""

    def __init__(self, argv: list[str], args: argparse.Namespace):
        self.args = args
        self.manifest = RunManifest(command=list(argv), seed=getattr(args, "seed", None))

    def read_json(self, path: str | None, what: str):
        if path is None:
            return None
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise InputError(f"cannot read {what} file {path}: {exc.strerror}") from None
        self.manifest.inputs[path] = _sha256(data)
        try:
            return json.loads(data)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None

    def emit(self, text: str) -> None:
        if not text.endswith("\n"):
            text += "\n"
        data = text.encode()
        self.manifest.outputs["primary"] = _sha256(data)
        out = getattr(self.args, "out", None)
        if out:
            Path(out).write_bytes(data)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()

    def write_file(self, directory: Path, name: str, text: str) -> None:
        data = text.encode()
        (directory / name).write_bytes(data)
        self.manifest.outputs[name] = _sha256(data)

    def finish(self, code: int) -> None:
        self.manifest.exit_code = code
        target = getattr(self.args, "manifest", None)
        out = getattr(self.args, "out", None)
        if target is None and out:
            target = str(Path(out) / "manifest.json") if self.args.command == "reproduce" else out + ".manifest.json"
        if target:
            Path(target).write_text(self.manifest.to_json() + "\n")
        else:
            sys.stderr.write("manifest: " + json.dumps(asdict(self.manifest), sort_keys=True) + "\n")


# ---------------------------------------------------------------------------------
# calling the handlers


def _call(args, route: str, request):
    """Run ``route`` in-process or against ``--server``; returns the response model."""
    from .app import ROUTES

    handler, _, resp_model = ROUTES[route]
    if not getattr(args, "server", None):
        return handler(request)
    import httpx

    url = args.server.rstrip("/") + "/" + route
    try:
        r = httpx.post(url, json=request.model_dump(by_alias=True, exclude_none=True), timeout=None)
    except httpx.HTTPError as exc:
        raise SolverFailure(f"request to {url} failed: {exc}") from None
    if r.status_code == 422:
        raise InputError(r.json().get("detail", r.text))
    if r.status_code >= 400:
        raise SolverFailure(r.json().get("detail", r.text) if r.headers.get("content-type", "").startswith("application/json") else r.text)
    return resp_model.model_validate(r.json())


def _dump(model) -> str:
    return json.dumps(model.model_dump(by_alias=True, exclude_none=True), indent=2)


def _grid(text: str | None):
    if text is None:
        return None
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"--lambda-grid must be comma-separated numbers, got {text!r}") from None


def _build(model, **fields):
    try:
        return model(**{k: v for k, v in fields.items() if v is not None})
    except Exception as exc:  # pydantic.ValidationError
        raise InputError(str(exc)) from None


def _csv_or_json(run: _Run, resp) -> None:
    if run.args.format == "csv":
        if resp.csv is None:
            raise InputError(f"{run.args.command} has no CSV output for these flags")
        run.emit(resp.csv)
    else:
        run.emit(_dump(resp))


def cmd_validate(run: _Run) -> int:
    a = run.args
    resp = _call(a, "validate", _build(M.GameRequest, game=run.read_json(a.game, "game")))
    run.emit(_dump(resp))
    return EXIT_OK if resp.valid else EXIT_INPUT


def cmd_eval(run: _Run) -> int:
    a = run.args
    req = _build(
        M.EvalRequest,
        game=run.read_json(a.game, "game"),
        s0=a.s0,
        lam=a.lam,
        horizon=a.horizon,
        profile=run.read_json(a.profile, "profile"),
    )
    _csv_or_json(run, _call(a, "eval", req))
    return EXIT_OK


def cmd_modified_eval(run: _Run) -> int:
    a = run.args
    req = _build(
        M.ModifiedEvalRequest,
        game=run.read_json(a.game, "game"),
        spec=run.read_json(a.spec, "spec"),
        profile=run.read_json(a.profile, "profile"),
        s0=a.s0,
        lam=a.lam,
    )
    _csv_or_json(run, _call(a, "modified-eval", req))
    return EXIT_OK


def cmd_best_response(run: _Run) -> int:
    a = run.args
    req = _build(
        M.BestResponseRequest,
        game=run.read_json(a.game, "game"),
        spec=run.read_json(a.spec, "spec"),
        profile=run.read_json(a.profile, "profile"),
        s0=a.s0,
        lam=a.lam,
        player=a.player,
        kind=a.kind,
    )
    run.emit(_dump(_call(a, "best-response", req)))
    return EXIT_OK


def cmd_equilibrium(run: _Run) -> int:
    a = run.args
    req = _build(
        M.EquilibriumRequest,
        game=run.read_json(a.game, "game"),
        spec=run.read_json(a.spec, "spec"),
        lambda_grid=_grid(a.lambda_grid),
        eps=a.eps,
        restarts=a.restarts,
        seed=a.seed,
    )
    resp = _call(a, "equilibrium", req)
    run.emit(_dump(resp))
    if not resp.certified:
        sys.stderr.write("equilibrium: at least one result is not certified\n")
        return EXIT_SOLVER
    return EXIT_OK


def cmd_values(run: _Run) -> int:
    a = run.args
    req = _build(
        M.ValuesRequest,
        game=run.read_json(a.game, "game"),
        player=a.player,
        kind=a.kind,
        lam=a.lam,
        lambda_grid=_grid(a.lambda_grid),
        extrapolate=a.extrapolate,
        stationary=a.stationary,
        spec=run.read_json(a.spec, "spec"),
        tol=a.tol,
        jobs=a.jobs,
    )
    _csv_or_json(run, _call(a, "values", req))
    return EXIT_OK


def cmd_classify(run: _Run) -> int:
    a = run.args
    req = _build(
        M.ClassifyRequest,
        game=run.read_json(a.game, "game"),
        grouping_tol=a.grouping_tol,
        lambda_grid=_grid(a.lambda_grid),
    )
    resp = _call(a, "classify", req)
    run.emit(resp.table if a.format == "text" else _dump(resp))
    return EXIT_OK


def cmd_uniform_eq(run: _Run) -> int:
    a = run.args
    horizons = [int(x) for x in a.horizons.split(",")] if a.horizons else None
    req = _build(
        M.UniformEqRequest,
        game=run.read_json(a.game, "game"),
        s0=a.s0,
        eps=a.eps,
        seed=a.seed,
        plays=a.plays,
        baseline_plays=a.baseline_plays,
        horizons=horizons,
        lambda_grid=_grid(a.lambda_grid),
    )
    resp = _call(a, "uniform-eq", req)
    run.emit(resp.summary if a.format == "text" else _dump(resp))
    if a.format != "text":
        sys.stderr.write(resp.summary + "\n")
    return EXIT_OK if resp.passed else EXIT_SOLVER


def _inline_or_file(run: _Run, text: str | None, what: str):
    """Parse ``text`` as JSON when it looks like a literal list, else read it as a file."""
    if text is not None and text.lstrip().startswith("["):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"--{what} is not valid JSON: {exc}") from None
    return run.read_json(text, what)


def cmd_simulate(run: _Run) -> int:
    a = run.args
    req = _build(
        M.SimulateRequest,
        game=run.read_json(a.game, "game"),
        s0=a.s0,
        horizon=a.horizon,
        profile=run.read_json(a.profile, "profile"),
        seed=a.seed,
        play=a.play,
        partition=_inline_or_file(run, a.partition, "partition"),
    )
    resp = _call(a, "simulate", req)
    if a.format == "csv":
        if resp.csv is None:
            raise InputError("simulate needs --partition for the run-segmentation CSV")
        run.emit(resp.csv)
    else:
        run.emit(resp.jsonl)
    return EXIT_OK


def cmd_coin_run(run: _Run) -> int:
    a = run.args
    resp = _call(a, "coin-run", _build(M.CoinRequest, p=a.p, samples=a.samples, seed=a.seed))
    run.emit(_dump(resp))
    return EXIT_OK if resp.report["matches"] else EXIT_SOLVER


def cmd_reproduce(run: _Run) -> int:
    a = run.args
    resp = _call(a, "reproduce", _build(M.ReproduceRequest, name=a.name, jobs=a.jobs))
    if a.out is None:
        a.out = f"reproduce-{a.name}"
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, doc in resp.games.items():
        run.write_file(out, f"{name}.game.json", json.dumps(doc, indent=2) + "\n")
    for name, text in resp.tables.items():
        run.write_file(out, name, text)
    run.write_file(out, "checks.json", json.dumps({"passed": resp.passed, "checks": resp.checks}, indent=2) + "\n")
    for c in resp.checks:
        if not c["ok"]:
            sys.stderr.write(f"FAIL {c['check']}: got {c['value']!r}, expected {c['expected']!r}\n")
    print(f"reproduce {a.name}: {'PASS' if resp.passed else 'FAIL'} ({len(resp.checks)} checks) -> {out}")
    return EXIT_OK if resp.passed else EXIT_SOLVER


def cmd_serve(run: _Run) -> int:
    import uvicorn

    uvicorn.run("modgame.app:app", host=run.args.host, port=run.args.port)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    """Re-run a manifest's command into a scratch location and compare hashes."""
    try:
        man = RunManifest.load(args.manifest_file)
    except (OSError, json.JSONDecodeError, TypeError) as exc:
        sys.stderr.write(f"replay: cannot load manifest: {exc}\n")
        return EXIT_INPUT
    for path, digest in man.inputs.items():
        try:
            current = _sha256(Path(path).read_bytes())
        except OSError:
            sys.stderr.write(f"replay: input {path} is missing\n")
            return EXIT_INPUT
        if current != digest:
            sys.stderr.write(f"replay: input {path} changed since the recorded run\n")
            return EXIT_SOLVER
    argv = _strip_flags(man.command, ("--out", "--manifest"))
    with tempfile.TemporaryDirectory() as tmp:
        scratch = os.path.join(tmp, "out")
        new_manifest = os.path.join(tmp, "manifest.json")
        code = main(argv + ["--out", scratch, "--manifest", new_manifest])
        fresh = RunManifest.load(new_manifest)
    diffs = sorted(k for k in set(man.outputs) | set(fresh.outputs) if man.outputs.get(k) != fresh.outputs.get(k))
    if code != man.exit_code:
        diffs.append(f"exit code {man.exit_code} -> {code}")
    if diffs:
        sys.stderr.write("replay: outputs differ: " + ", ".join(diffs) + "\n")
        return EXIT_SOLVER
    print(f"replay: {len(man.outputs)} output(s) reproduced byte-identically")
    return EXIT_OK


def _strip_flags(argv: list[str], flags) -> list[str]:
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in flags:
            skip = True
            continue
        if any(tok.startswith(f + "=") for f in flags):
            continue
        out.append(tok)
    return out


# ---------------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--manifest", help="where to write the run manifest (default: <out>.manifest.json or stderr)")
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--server", help="send the request to a running service at this URL")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for discount grids")

    game = argparse.ArgumentParser(add_help=False)
    game.add_argument("--game", required=True, help="game JSON file")

    parser = argparse.ArgumentParser(prog="modgame", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_, parents=(common, game)):
        p = sub.add_parser(name, parents=list(parents), help=help_, description=help_)
        p.set_defaults(fn=fn)
        return p

    add("validate", cmd_validate, "check a game file and report violations")

    p = add("eval", cmd_eval, "discounted or N-stage payoff and occupation measure of a stationary profile")
    p.add_argument("--s0", required=True)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--horizon", type=int, help="N-stage average instead of the discounted payoff")
    p.add_argument("--profile", help="stationary profile JSON (default: uniform)")

    def spec_flags(p, required=True):
        p.add_argument("--spec", required=required, help="modified-game spec JSON")
        p.add_argument("--s0", help="override the spec's initial state")
        p.add_argument("--lambda", dest="lam", type=float, help="override the spec's discount factor")
        p.add_argument("--profile", help="stationary profile JSON (default: uniform)")

    p = add("modified-eval", cmd_modified_eval, "modified payoff with the per-block breakdown")
    spec_flags(p)

    p = add("best-response", cmd_best_response, "best response to a stationary profile")
    spec_flags(p)
    p.add_argument("--player", required=True)
    p.add_argument("--kind", choices=("modified", "discounted"), default="modified")

    p = add("equilibrium", cmd_equilibrium, "certified stationary equilibrium of the modified game")
    p.add_argument("--spec", required=True)
    p.add_argument("--lambda-grid", help="comma-separated discount factors to trace")
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)

    p = add("values", cmd_values, "zero-sum min-max / max-min values (discounted, uniform or stationary)")
    p.add_argument("--player", required=True)
    p.add_argument("--kind", choices=("minmax", "maxmin"), default="minmax")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--lambda-grid")
    p.add_argument("--extrapolate", action="store_true", help="estimate the uniform value from a discount grid")
    p.add_argument("--stationary", action="store_true", help="stationary values of the modified game (needs --spec)")
    p.add_argument("--spec")
    p.add_argument("--tol", type=float, default=1e-6)

    p = add("classify", cmd_classify, "min-max partition, siblings and controllability tags")
    p.add_argument("--lambda-grid")
    p.add_argument("--grouping-tol", type=float)

    p = add("uniform-eq", cmd_uniform_eq, "synthesize and verify a uniform eps-equilibrium")
    p.add_argument("--s0")
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--plays", type=int, default=300)
    p.add_argument("--baseline-plays", type=int, default=2000)
    p.add_argument("--horizons", help="comma-separated horizons (default 1000,10000)")
    p.add_argument("--lambda-grid")

    p = add("simulate", cmd_simulate, "simulate one play (JSONL) or its run segmentation (CSV)")
    p.add_argument("--s0", required=True)
    p.add_argument("--horizon", type=int, required=True)
    p.add_argument("--profile")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--play", type=int, default=0)
    p.add_argument("--partition", help="blocks as a JSON list of state-name lists, inline or in a file")

    p = add("coin-run", cmd_coin_run, "empirical mean run length of a biased coin", parents=(common,))
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)

    p = add("reproduce", cmd_reproduce, "rebuild a worked example and check its pinned numbers", parents=(common,))
    p.add_argument("name", choices=("example1", "example2", "bigmatch"))

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(fn=cmd_serve)

    p = sub.add_parser("replay", help="re-run a manifest and compare outputs byte for byte")
    p.add_argument("manifest_file")
    p.set_defaults(fn=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    if args.command == "replay":
        return cmd_replay(args)
    if args.command == "serve":
        return cmd_serve(_Run(argv, args))
    run = _Run(argv, args)
    try:
        code = args.fn(run)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        code = EXIT_INPUT
    except SolverFailure as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        code = EXIT_SOLVER
    run.finish(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
