"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

Family = Literal["baseline", "cumulative", "adjacent", "continuation"]
Odds = Literal["po", "npo", "ppo"]


class DatasetPayload(BaseModel):
    x: list[list[float]]
    y: list[list[int]]
    covariates: list[str] = []
    responses: list[str] = []


class ModelPayload(BaseModel):
    family: Family
    odds: Odds
    shared: Optional[list[int]] = None  # ppo: covariate columns with shared effects


class ConfigPayload(BaseModel):
    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    step_halving_limit: int = 30
    ridge_seed: float = 1e-8
    initialization: Literal["empirical", "zero-offset"] = "empirical"
    min_improvement: float = 1e-10
    boundary_margin: float = 1e-6


class ThetaPayload(BaseModel):
    beta: list[list[float]]
    zeta: list[float] = []


class FitRequest(BaseModel):
    dataset: DatasetPayload
    model: ModelPayload
    order: list[int] = Field(description="1-based category order; position J is the final/baseline slot")
    config: Optional[ConfigPayload] = None


class FitResponse(BaseModel):
    theta: ThetaPayload
    loglik: float
    aic: float
    bic: float
    aic_full: float
    converged: bool
    iterations: int
    feasible: bool
    separation_suspected: bool
    gradient_norm: float
    n_params: int
    n_obs: int
    order_labels: list[str]
    tool: str = ""
    config: ConfigPayload = ConfigPayload()


class ClassReport(BaseModel):
    representative: list[int]
    representative_labels: list[str]
    members: list[list[int]]
    rank: int
    loglik: Optional[float] = None
    aic: Optional[float] = None
    bic: Optional[float] = None
    aic_gap: Optional[float] = None
    feasible: Optional[bool] = None
    converged: Optional[bool] = None
    separation_suspected: Optional[bool] = None
    error: Optional[str] = None


class SearchRequest(BaseModel):
    dataset: DatasetPayload
    model: ModelPayload
    config: Optional[ConfigPayload] = None
    workers: int = 1


class SearchResponse(BaseModel):
    family: Family
    odds: Odds
    rule: str
    tool: str = ""
    config: ConfigPayload = ConfigPayload()
    n_orders: int
    n_classes: int
    classes: list[ClassReport]
    best_representative: Optional[list[int]] = None
    best_aic: Optional[float] = None
    best_aic_full: Optional[float] = None
    near_ties: list[list[int]] = []


class AllModelsRequest(BaseModel):
    dataset: DatasetPayload
    models: Optional[list[ModelPayload]] = None  # default: the eight po/npo combinations
    config: Optional[ConfigPayload] = None
    workers: int = 1


class AllModelsRow(BaseModel):
    family: Family
    odds: Odds
    available: bool
    aic: Optional[float] = None
    aic_full: Optional[float] = None
    best_orders: list[list[int]] = []
    description: str
    failure: Optional[str] = None


class AllModelsResponse(BaseModel):
    rows: list[AllModelsRow]
    tool: str = ""


class ClassesRequest(BaseModel):
    family: Family
    odds: Odds
    n_categories: int


class ClassesResponse(BaseModel):
    family: Family
    odds: Odds
    rule: str
    n_orders: int
    n_classes: int
    classes: list[dict]


class TransformRequest(BaseModel):
    model: ModelPayload
    n_categories: int
    n_covariates: int
    theta: ThetaPayload
    from_order: list[int]
    to_order: list[int]


class TransformResponse(BaseModel):
    theta: ThetaPayload


class DesignPayload(BaseModel):
    x: list[list[float]]
    weights: list[float]
    covariates: list[str] = []
    responses: list[str] = []


class PlanModelPayload(BaseModel):
    family: Family
    odds: Odds
    n_categories: int
    shared: Optional[list[int]] = None


class PlanPayload(BaseModel):
    model: PlanModelPayload
    theta: ThetaPayload
    order: list[int]
    design: DesignPayload
    total: int
    allocation: Literal["fixed", "iid"] = "iid"
    seed: Optional[int] = None


class SimulateRequest(BaseModel):
    plan: PlanPayload
    seed: Optional[int] = None
    replicate: int = 0


class SimulateResponse(BaseModel):
    dataset: DatasetPayload
    manifest: dict[str, str]


class ExperimentRequest(BaseModel):
    plan: PlanPayload
    fit_model: Optional[ModelPayload] = None
    config: Optional[ConfigPayload] = None
    seed: Optional[int] = None
    replicate: int = 0


class ExperimentResponse(BaseModel):
    aic_true: float
    rank: int
    aic_best: float
    gap: float
    n_classes: int
    best_orders: list[list[int]]
    manifest: dict[str, str]


class CvRequest(BaseModel):
    dataset: DatasetPayload
    model: ModelPayload
    order: list[int]
    repetitions: int = 100
    train_fraction: float = 2.0 / 3.0
    seed: int
    config: Optional[ConfigPayload] = None


class CvResponse(BaseModel):
    losses: list[Optional[float]]
    mean_loss: float
    representative: list[int]
    n_train: int
    n_test: int
    manifest: dict[str, str]


class ErrorResponse(BaseModel):
    error: str
    message: str
