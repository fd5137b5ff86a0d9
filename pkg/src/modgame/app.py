"""HTTP service exposing the handlers in ``service`` as JSON POST routes."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import __version__, schemas as M, service
from .service import InputError, SolverFailure

# route name -> (handler, request model, response model)
ROUTES = {
    "validate": (service.validate, M.GameRequest, M.ValidateResponse),
    "eval": (service.evaluate, M.EvalRequest, M.EvalResponse),
    "modified-eval": (service.modified_eval, M.ModifiedEvalRequest, M.ModifiedEvalResponse),
    "best-response": (service.best_response, M.BestResponseRequest, M.BestResponseResponse),
    "equilibrium": (service.equilibrium, M.EquilibriumRequest, M.EquilibriumResponse),
    "values": (service.values, M.ValuesRequest, M.ValuesResponse),
    "classify": (service.classify_game, M.ClassifyRequest, M.ClassifyResponse),
    "uniform-eq": (service.uniform_eq, M.UniformEqRequest, M.UniformEqResponse),
    "simulate": (service.simulate_play, M.SimulateRequest, M.SimulateResponse),
    "coin-run": (service.coin, M.CoinRequest, M.CoinResponse),
    "reproduce": (service.reproduce, M.ReproduceRequest, M.ReproduceResponse),
}


def _error(status: int, kind: str, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content=M.ErrorResponse(error=kind, detail=detail).model_dump())


def _register(app: FastAPI, name: str, handler, req_model, resp_model) -> None:
    # a fresh closure per route so FastAPI sees the concrete request model
    def endpoint(req):
        return handler(req).model_dump(by_alias=True, exclude_none=True)

    # set after definition: postponed annotations would leave a bare string here
    endpoint.__annotations__ = {"req": req_model}
    endpoint.__name__ = name.replace("-", "_")
    app.post(f"/{name}", response_model=None, summary=resp_model.__doc__ or name)(endpoint)


def create_app() -> FastAPI:
    app = FastAPI(title="modgame", version=__version__)

    @app.exception_handler(InputError)
    async def _input(request: Request, exc: InputError):
        return _error(422, "validation", str(exc))

    @app.exception_handler(RequestValidationError)
    async def _schema(request: Request, exc: RequestValidationError):
        parts = ["{}: {}".format(".".join(str(x) for x in e["loc"]), e["msg"]) for e in exc.errors()]
        return _error(422, "validation", "; ".join(parts))

    @app.exception_handler(SolverFailure)
    async def _solver(request: Request, exc: SolverFailure):
        return _error(500, "solver", str(exc))

    @app.get("/health")
    def health():
        return {"status": "ok", "version": __version__}

    for name, (handler, req_model, resp_model) in ROUTES.items():
        _register(app, name, handler, req_model, resp_model)
    return app


app = create_app()
