"""Seeded data generation, Monte Carlo experiment drivers, cross-validation.

Every stochastic operation draws from a named stream
``SeedSequence((seed, purpose, index))`` so replicates are independent,
collision-free, and exactly reproducible from a (seed, plan) manifest.
Purpose codes: 0 = dataset simulation, 1 = cross-validation splits.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import CatorderError, DataError, InfeasibleError
from .fitting import FitConfig, fit_mle
from .model import (
    Dataset,
    ModelSpec,
    Theta,
    category_log_probabilities,
    design_blocks,
    eta_from_design,
)
from .orders import Permutation, equivalence_classes
from .selection import OrderSearchResult, search_orders

_SIM, _CV = 0, 1


def stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    """Independent generator for (seed, purpose, index)."""
    return np.random.default_rng(np.random.SeedSequence((int(seed), purpose, int(index))))


@dataclass(frozen=True)
class SimulationPlan:
    """Generative recipe: draw design points by weight, then counts from the model.

    ``allocation`` is ``"fixed"`` (deterministic N*w_i with largest-remainder
    rounding) or ``"iid"`` (design-point totals drawn multinomially), matching
    the two sampling views of the same experiment.
    """

    spec: ModelSpec
    theta0: Theta
    sigma0: Permutation
    x: np.ndarray
    weights: np.ndarray
    total: int
    allocation: str = "iid"
    seed: int | None = None
    covariates: tuple[str, ...] = ()
    responses: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (x.shape[0],):
            raise DataError("one allocation weight per design point required")
        if np.any(w <= 0):
            raise DataError("allocation weights must be positive")
        if self.allocation not in ("fixed", "iid"):
            raise DataError(f"unknown allocation mode {self.allocation!r}")
        if self.total < x.shape[0] and self.allocation == "fixed":
            raise DataError("fixed allocation needs total >= number of design points")
        self.theta0.validate_for(self.spec)
        if self.sigma0.size != self.spec.n_categories:
            raise DataError("sigma0 length does not match the model spec")
        w = w / w.sum()
        x.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_dataset(
        cls,
        dataset: Dataset,
        spec: ModelSpec,
        theta0: Theta,
        sigma0: Permutation,
        total: int | None = None,
        allocation: str = "iid",
        seed: int | None = None,
    ) -> "SimulationPlan":
        """Reuse a dataset's design points and empirical allocation weights."""
        n = dataset.totals.astype(float)
        return cls(
            spec,
            theta0,
            sigma0,
            dataset.x,
            n / n.sum(),
            int(total if total is not None else dataset.grand_total),
            allocation,
            seed,
            dataset.covariates,
            dataset.responses,
        )

    def to_dict(self) -> dict:
        return {
            "model": {
                "family": self.spec.family,
                "odds": self.spec.odds,
                "n_categories": self.spec.n_categories,
                "shared": list(self.spec.shared),
            },
            "theta": {"beta": [b.tolist() for b in self.theta0.beta], "zeta": self.theta0.zeta.tolist()},
            "order": list(self.sigma0.image),
            "design": {
                "x": self.x.tolist(),
                "weights": self.weights.tolist(),
                "covariates": list(self.covariates),
                "responses": list(self.responses),
            },
            "total": self.total,
            "allocation": self.allocation,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimulationPlan":
        try:
            model = doc["model"]
            design = doc["design"]
            x = np.asarray(design["x"], dtype=float)
            spec = ModelSpec.build(
                model["family"],
                model["odds"],
                int(model["n_categories"]),
                x.shape[1] if x.ndim == 2 else 0,
                model.get("shared"),
            )
            theta = Theta(
                tuple(np.asarray(b, dtype=float) for b in doc["theta"]["beta"]),
                np.asarray(doc["theta"].get("zeta") or [], dtype=float),
            )
            weights = design.get("weights") or design.get("counts")
            if weights is None:
                raise DataError("design needs weights or counts")
            return cls(
                spec,
                theta,
                Permutation(tuple(doc["order"])),
                x,
                np.asarray(weights, dtype=float),
                int(doc["total"]),
                doc.get("allocation", "iid"),
                doc.get("seed"),
                tuple(design.get("covariates") or ()),
                tuple(design.get("responses") or ()),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed simulation plan: {exc}") from exc


def _category_probs(plan: SimulationPlan) -> np.ndarray:
    """P(label j | x_i) = pi_{i, sigma0^{-1}(j)}(theta0); errors if infeasible."""
    h, hc = design_blocks(plan.spec, plan.x)
    eta = eta_from_design(plan.spec, plan.theta0, h, hc)
    logpi = category_log_probabilities(plan.spec.family, eta)
    inv = np.asarray(plan.sigma0.inverse().image, dtype=int) - 1
    return np.exp(logpi)[:, inv]


def _largest_remainder(total: int, weights: np.ndarray) -> np.ndarray:
    ideal = total * weights
    base = np.floor(ideal).astype(np.int64)
    short = int(total - base.sum())
    order = np.argsort(-(ideal - base), kind="stable")
    base[order[:short]] += 1
    return base


def simulate_dataset(plan: SimulationPlan, seed: int | None = None, replicate: int = 0) -> Dataset:
    """Draw one dataset from the plan; deterministic for fixed (seed, replicate)."""
    effective = seed if seed is not None else plan.seed
    if effective is None:
        raise DataError("simulation requires an explicit seed")
    probs = _category_probs(plan)  # raises for infeasible theta0
    rng = stream(effective, _SIM, replicate)
    if plan.allocation == "fixed":
        totals = _largest_remainder(plan.total, plan.weights)
    else:
        totals = rng.multinomial(plan.total, plan.weights)
    y = np.array([rng.multinomial(int(n), p) for n, p in zip(totals, probs)])
    return Dataset(plan.x[totals > 0], y[totals > 0], plan.covariates, plan.responses)


@dataclass(frozen=True)
class ExperimentOutcome:
    """One row of the true-order diagnostic: where the generating order ranks."""

    aic_true: float
    rank: int
    aic_best: float
    gap: float
    n_classes: int
    best_orders: tuple[Permutation, ...]
    search: OrderSearchResult


def true_order_experiment(
    plan: SimulationPlan,
    fit_spec: ModelSpec | None = None,
    config: FitConfig = FitConfig(),
    seed: int | None = None,
    replicate: int = 0,
) -> ExperimentOutcome:
    """Simulate once, search all orders, and locate the generating order."""
    spec = fit_spec or plan.spec
    data = simulate_dataset(plan, seed, replicate)
    result = search_orders(spec, data, config)
    rank, gap = result.rank_of(plan.sigma0)
    cf = result.class_for(plan.sigma0)
    best = result.best
    return ExperimentOutcome(
        aic_true=cf.aic,
        rank=rank,
        aic_best=best.aic if best else math.nan,
        gap=gap,
        n_classes=result.partition.n_classes,
        best_orders=best.members if best else (),
        search=result,
    )


@dataclass(frozen=True)
class ReplicateTable:
    """AIC per (replicate, equivalence class); classes in partition order."""

    class_representatives: tuple[Permutation, ...]
    aic: np.ndarray  # (n_replicates, n_classes), nan for failed fits

    def column(self, result_index: int) -> np.ndarray:
        return self.aic[:, result_index]


def replicate_experiment(
    plan: SimulationPlan,
    fit_spec: ModelSpec | None = None,
    n_replicates: int = 100,
    config: FitConfig = FitConfig(),
    seed: int | None = None,
    workers: int = 1,
) -> ReplicateTable:
    """Repeat simulate+search; rows are independent seeded replicates.

    Each replicate owns the private stream (seed, 0, b), so the table is
    identical whether rows are computed sequentially or in parallel.
    """
    if n_replicates < 2:
        raise DataError("need at least 2 replicates")
    spec = fit_spec or plan.spec
    partition = equivalence_classes(spec)
    reps = tuple(members[0] for members in partition.classes)
    out = np.full((n_replicates, len(reps)), math.nan)

    def run_one(b: int) -> None:
        data = simulate_dataset(plan, seed, replicate=b)
        result = search_orders(spec, data, config)
        for c, rep in enumerate(reps):
            cf = result.class_for(rep)
            if cf.fit is not None and cf.ok:
                out[b, c] = cf.aic

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_one, range(n_replicates)))
    else:
        for b in range(n_replicates):
            run_one(b)
    return ReplicateTable(reps, out)


def paired_t_test_one_sided(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """One-sided paired t-test of H1: mean(a) < mean(b).

    Returns (t, p) with p = P(T_{B-1} <= t).  Degenerate zero-variance
    differences follow the conventions: all-zero -> p = 0.5; constant
    negative -> p = 0; constant positive -> p = 1.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or a.size < 2:
        raise DataError("paired test needs two equal-length vectors (length >= 2)")
    d = a - b
    sd = float(np.std(d, ddof=1))
    mean = float(np.mean(d))
    if sd == 0.0:
        if mean == 0.0:
            return 0.0, 0.5
        return (-math.inf, 0.0) if mean < 0 else (math.inf, 1.0)
    t = mean / (sd / math.sqrt(d.size))
    return t, float(stats.t.cdf(t, d.size - 1))


@dataclass(frozen=True)
class CrossValPlan:
    """Repeated random train/test splits scored by cross-entropy."""

    train_fraction: float = 2.0 / 3.0
    repetitions: int = 100
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise DataError("train fraction must lie strictly between 0 and 1")
        if self.repetitions < 1:
            raise DataError("need at least one repetition")


@dataclass(frozen=True)
class CrossValResult:
    losses: np.ndarray  # (repetitions,), nan where the training fit failed
    representative: Permutation  # class representative actually fitted
    n_train: int
    n_test: int

    @property
    def mean(self) -> float:
        return float(np.nanmean(self.losses))


def _expand_records(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Individual (design index, category) records in row-major count order."""
    di = np.repeat(np.arange(dataset.m), dataset.totals)
    cat = np.concatenate([np.repeat(np.arange(dataset.n_categories), row) for row in dataset.y])
    return di, cat


def cross_validate(
    dataset: Dataset,
    spec: ModelSpec,
    sigma: Permutation,
    plan: CrossValPlan = CrossValPlan(),
    config: FitConfig = FitConfig(),
    workers: int = 1,
) -> CrossValResult:
    """Cross-entropy test losses for a model/order over seeded random splits.

    Splits depend only on (seed, repetition, N): every order and every model
    sees identical splits, so paired comparisons across orders are valid.
    The fit is performed for the order's class representative; by the exact
    class transformations its losses are identical for every member order,
    bitwise.
    """
    if plan.seed is None:
        raise DataError("cross-validation requires an explicit seed")
    rep = equivalence_classes(spec).representative(sigma)
    inv = np.asarray(rep.inverse().image, dtype=int) - 1
    di, cat = _expand_records(dataset)
    n = di.size
    n_train = int(round(plan.train_fraction * n))
    if n_train < 1 or n_train >= n:
        raise DataError("train fraction leaves an empty train or test set")
    h, hc = design_blocks(spec, dataset.x)
    losses = np.full(plan.repetitions, math.nan)

    def run_one(b: int) -> None:
        shuffle = stream(plan.seed, _CV, b).permutation(n)
        train, test = shuffle[:n_train], shuffle[n_train:]
        counts = np.zeros((dataset.m, dataset.n_categories), dtype=np.int64)
        np.add.at(counts, (di[train], cat[train]), 1)
        keep = counts.sum(axis=1) > 0
        train_ds = Dataset(dataset.x[keep], counts[keep], dataset.covariates, dataset.responses)
        try:
            fit = fit_mle(spec, train_ds, rep, config)
        except CatorderError:
            return
        if not fit.feasible:
            return
        try:
            logpi = category_log_probabilities(
                spec.family, eta_from_design(spec, fit.theta, h, hc)
            )
        except InfeasibleError:
            return
        losses[b] = -float(np.mean(logpi[di[test], inv[cat[test]]]))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run_one, range(plan.repetitions)))
    else:
        for b in range(plan.repetitions):
            run_one(b)
    return CrossValResult(losses, rep, n_train, n - n_train)
