"""FastAPI service exposing the fitting, search, and simulation operations.

Domain errors surface as HTTP 400 with a structured body; anything else is
a genuine 500.  The CLI talks to this app in-process by default, or to a
remote instance started with ``catorder serve``.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CatorderError
from ..fitting import FitConfig, fit_mle
from ..io import dataset_from_payload, dataset_to_payload, police_dataset
from ..model import Dataset, ModelSpec, Theta
from ..orders import Permutation, equivalence_classes, transform_theta
from ..selection import search_all_models, search_orders
from ..simulate import (
    CrossValPlan,
    SimulationPlan,
    cross_validate,
    simulate_dataset,
    true_order_experiment,
)
from . import schemas as s

app = FastAPI(
    title="catorder",
    version=__version__,
    description="Category-order selection for multinomial logit models.",
)


@app.exception_handler(CatorderError)
async def _domain_error(request, exc: CatorderError):
    return JSONResponse(
        status_code=400,
        content=s.ErrorResponse(error=type(exc).__name__, message=str(exc)).model_dump(),
    )


def _dataset(payload: s.DatasetPayload) -> Dataset:
    return dataset_from_payload(payload.model_dump())


def _spec(model: s.ModelPayload, dataset: Dataset) -> ModelSpec:
    return dataset.spec(model.family, model.odds, model.shared)


def _config(payload: s.ConfigPayload | None) -> FitConfig:
    return FitConfig(**payload.model_dump()) if payload else FitConfig()


def _theta(payload: s.ThetaPayload) -> Theta:
    return Theta(tuple(np.asarray(b, dtype=float) for b in payload.beta),
                 np.asarray(payload.zeta, dtype=float))


def _theta_payload(theta: Theta) -> s.ThetaPayload:
    return s.ThetaPayload(beta=[b.tolist() for b in theta.beta], zeta=theta.zeta.tolist())


def _opt(value: float) -> float | None:
    return None if value is None or (isinstance(value, float) and math.isnan(value)) else value


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.get("/datasets/police", response_model=s.DatasetPayload)
def get_police():
    return s.DatasetPayload(**dataset_to_payload(police_dataset()))


@app.post("/fit", response_model=s.FitResponse)
def fit(req: s.FitRequest):
    dataset = _dataset(req.dataset)
    spec = _spec(req.model, dataset)
    sigma = Permutation(tuple(req.order))
    result = fit_mle(spec, dataset, sigma, _config(req.config))
    return s.FitResponse(
        tool=f"catorder {__version__}",
        config=req.config or s.ConfigPayload(),
        theta=_theta_payload(result.theta),
        loglik=result.loglik,
        aic=result.aic,
        bic=result.bic,
        aic_full=result.aic - 2.0 * dataset.log_multinomial_coefficient,
        converged=result.converged,
        iterations=result.iterations,
        feasible=result.feasible,
        separation_suspected=result.separation_suspected,
        gradient_norm=result.gradient_norm,
        n_params=result.n_params,
        n_obs=result.n_obs,
        order_labels=list(sigma.labels(dataset.responses)),
    )


def _search_response(spec, dataset, result, config: s.ConfigPayload | None = None) -> s.SearchResponse:
    log_coef = dataset.log_multinomial_coefficient
    classes = []
    for cf in result.class_fits:
        f = cf.fit
        classes.append(
            s.ClassReport(
                representative=list(cf.representative.image),
                representative_labels=list(cf.representative.labels(dataset.responses)),
                members=[list(m.image) for m in cf.members],
                rank=cf.rank,
                loglik=None if f is None else f.loglik,
                aic=None if f is None else f.aic,
                bic=None if f is None else f.bic,
                aic_gap=_opt(cf.aic_gap),
                feasible=None if f is None else f.feasible,
                converged=None if f is None else f.converged,
                separation_suspected=None if f is None else f.separation_suspected,
                error=cf.error,
            )
        )
    best = result.best
    return s.SearchResponse(
        tool=f"catorder {__version__}",
        config=config or s.ConfigPayload(),
        family=spec.family,
        odds=spec.odds,
        rule=result.partition.rule,
        n_orders=math.factorial(spec.n_categories),
        n_classes=result.partition.n_classes,
        classes=classes,
        best_representative=None if best is None else list(best.representative.image),
        best_aic=None if best is None else best.aic,
        best_aic_full=None if best is None else best.aic - 2.0 * log_coef,
        near_ties=[list(c.representative.image) for c in result.near_ties],
    )


@app.post("/search", response_model=s.SearchResponse)
def search(req: s.SearchRequest):
    dataset = _dataset(req.dataset)
    spec = _spec(req.model, dataset)
    result = search_orders(spec, dataset, _config(req.config), workers=req.workers)
    return _search_response(spec, dataset, result, req.config)


@app.post("/search/all", response_model=s.AllModelsResponse)
def search_all(req: s.AllModelsRequest):
    dataset = _dataset(req.dataset)
    if req.models is None:
        models = None
    else:
        models = [(m.family, m.odds, m.shared) for m in req.models]
    kwargs = {} if models is None else {"models": models}
    result = search_all_models(dataset, config=_config(req.config), workers=req.workers, **kwargs)
    rows = [
        s.AllModelsRow(
            family=r.family,
            odds=r.odds,
            available=r.available,
            aic=_opt(r.aic),
            aic_full=_opt(r.aic_full),
            best_orders=[list(m.image) for m in r.best_orders],
            description=r.description,
            failure=r.failure,
        )
        for r in result.rows
    ]
    return s.AllModelsResponse(rows=rows, tool=f"catorder {__version__}")


@app.post("/classes", response_model=s.ClassesResponse)
def classes(req: s.ClassesRequest):
    part = equivalence_classes(req.family, req.n_categories, req.odds)
    return s.ClassesResponse(
        family=req.family,
        odds=req.odds,
        rule=part.rule,
        n_orders=math.factorial(req.n_categories),
        n_classes=part.n_classes,
        classes=[
            {"representative": list(members[0].image), "members": [list(m.image) for m in members]}
            for members in part.classes
        ],
    )


@app.post("/transform", response_model=s.TransformResponse)
def transform(req: s.TransformRequest):
    spec = ModelSpec.build(
        req.model.family, req.model.odds, req.n_categories, req.n_covariates, req.model.shared
    )
    theta2 = transform_theta(
        spec, _theta(req.theta), Permutation(tuple(req.from_order)), Permutation(tuple(req.to_order))
    )
    return s.TransformResponse(theta=_theta_payload(theta2))


def _plan(payload: s.PlanPayload) -> SimulationPlan:
    return SimulationPlan.from_dict(payload.model_dump())


def _manifest(plan: SimulationPlan, seed, extra: dict | None = None) -> dict[str, str]:
    doc = {
        "tool": f"catorder {__version__}",
        "family": plan.spec.family,
        "odds": plan.spec.odds,
        "order": str(plan.sigma0),
        "total": str(plan.total),
        "allocation": plan.allocation,
        "seed": str(seed if seed is not None else plan.seed),
    }
    doc.update(extra or {})
    return doc


@app.post("/simulate", response_model=s.SimulateResponse)
def simulate(req: s.SimulateRequest):
    plan = _plan(req.plan)
    data = simulate_dataset(plan, req.seed, req.replicate)
    return s.SimulateResponse(
        dataset=s.DatasetPayload(**dataset_to_payload(data)),
        manifest=_manifest(plan, req.seed, {"replicate": str(req.replicate)}),
    )


@app.post("/experiment", response_model=s.ExperimentResponse)
def experiment(req: s.ExperimentRequest):
    plan = _plan(req.plan)
    fit_spec = None
    if req.fit_model is not None:
        fit_spec = ModelSpec.build(
            req.fit_model.family,
            req.fit_model.odds,
            plan.spec.n_categories,
            plan.spec.n_covariates,
            req.fit_model.shared,
        )
    out = true_order_experiment(plan, fit_spec, _config(req.config), req.seed, req.replicate)
    spec = fit_spec or plan.spec
    return s.ExperimentResponse(
        aic_true=out.aic_true,
        rank=out.rank,
        aic_best=out.aic_best,
        gap=out.gap,
        n_classes=out.n_classes,
        best_orders=[list(m.image) for m in out.best_orders],
        manifest=_manifest(plan, req.seed, {"fit_family": spec.family, "fit_odds": spec.odds}),
    )


@app.post("/cv", response_model=s.CvResponse)
def cv(req: s.CvRequest):
    dataset = _dataset(req.dataset)
    spec = _spec(req.model, dataset)
    plan = CrossValPlan(req.train_fraction, req.repetitions, req.seed)
    result = cross_validate(dataset, spec, Permutation(tuple(req.order)), plan, _config(req.config))
    losses = [None if math.isnan(v) else float(v) for v in result.losses]
    return s.CvResponse(
        losses=losses,
        mean_loss=result.mean,
        representative=list(result.representative.image),
        n_train=result.n_train,
        n_test=result.n_test,
        manifest={
            "tool": f"catorder {__version__}",
            "family": spec.family,
            "odds": spec.odds,
            "order": ",".join(str(v) for v in req.order),
            "repetitions": str(req.repetitions),
            "train_fraction": f"{req.train_fraction:.6f}",
            "seed": str(req.seed),
        },
    )
