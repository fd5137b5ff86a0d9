"""Request and response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field


class _Model(BaseModel):
    model_config = ConfigDict(populate_by_name=True, extra="forbid")


class GameRequest(_Model):
    game: dict[str, Any]


class ValidateResponse(_Model):
    valid: bool
    violations: list[str] = []
    players: list[str] = []
    states: list[str] = []
    payoff_bound: float | None = None


class EvalRequest(GameRequest):
    s0: str
    lam: float | None = Field(None, alias="lambda")
    horizon: int | None = Field(None, ge=1)
    profile: dict[str, Any] | None = None


class EvalResponse(_Model):
    s0: str
    lam: float | None = Field(None, alias="lambda")
    horizon: int | None = None
    payoffs: dict[str, float]
    occupation: dict[str, Any] | None = None
    csv: str | None = None


class ModifiedEvalRequest(GameRequest):
    spec: dict[str, Any]
    profile: dict[str, Any] | None = None
    s0: str | None = None
    lam: float | None = Field(None, alias="lambda")


class ModifiedEvalResponse(_Model):
    s0: str
    lam: float = Field(alias="lambda")
    modified: dict[str, float]
    discounted: dict[str, float]
    blocks: dict[str, Any]
    csv: str | None = None


class BestResponseRequest(ModifiedEvalRequest):
    player: str
    kind: Literal["modified", "discounted"] = "modified"


class BestResponseResponse(_Model):
    player: str
    kind: str
    strategy: dict[str, Any]
    value: float
    current: float
    gap: float


class EquilibriumRequest(GameRequest):
    spec: dict[str, Any]
    lambda_grid: list[float] | None = None
    eps: float = Field(1e-4, gt=0)
    restarts: int = Field(4, ge=1)
    seed: int = 0


class EquilibriumResponse(_Model):
    results: list[dict[str, Any]]
    certified: bool


class ValuesRequest(GameRequest):
    player: str
    kind: Literal["minmax", "maxmin"] = "minmax"
    lam: float | None = Field(None, alias="lambda")
    lambda_grid: list[float] | None = None
    extrapolate: bool = False
    stationary: bool = False
    spec: dict[str, Any] | None = None
    tol: float = Field(1e-6, gt=0)
    jobs: int = Field(1, ge=1)


class ValuesResponse(_Model):
    player: str
    kind: str
    mode: Literal["discounted", "uniform", "stationary"]
    values: dict[str, Any]
    detail: dict[str, Any] = {}
    csv: str | None = None


class ClassifyRequest(GameRequest):
    grouping_tol: float | None = None
    lambda_grid: list[float] | None = None


class ClassifyResponse(_Model):
    strongly_controllable: bool
    report: dict[str, Any]
    uniform_minmax: dict[str, dict[str, float]]
    table: str


class UniformEqRequest(GameRequest):
    s0: str | None = None
    eps: float = Field(0.1, gt=0, lt=1)
    seed: int = 0
    plays: int = Field(300, ge=20)
    baseline_plays: int = Field(2000, ge=20)
    horizons: list[int] = [1000, 10000]
    lambda_grid: list[float] | None = None


class UniformEqResponse(_Model):
    passed: bool
    uniform_minmax: dict[str, dict[str, float]]
    classification: dict[str, Any]
    blocks: list[dict[str, Any]]
    verification: dict[str, Any]
    summary: str


class SimulateRequest(GameRequest):
    s0: str
    horizon: int = Field(ge=1)
    profile: dict[str, Any] | None = None
    seed: int = 0
    play: int = Field(0, ge=0)
    partition: list[list[str]] | None = None


class SimulateResponse(_Model):
    horizon: int
    jsonl: str
    switches: int | None = None
    taus: list[int] | None = None
    csv: str | None = None
    average_payoffs: dict[str, float]


class CoinRequest(_Model):
    p: float = Field(ge=0, lt=1)
    samples: int = Field(100_000, ge=2)
    seed: int = 0


class CoinResponse(_Model):
    report: dict[str, Any]


class ReproduceRequest(_Model):
    name: Literal["example1", "example2", "bigmatch"]
    jobs: int = Field(1, ge=1)


class ReproduceResponse(_Model):
    name: str
    games: dict[str, dict[str, Any]]
    tables: dict[str, str]
    checks: list[dict[str, Any]]
    passed: bool


class ErrorResponse(_Model):
    error: Literal["validation", "solver"]
    detail: str
