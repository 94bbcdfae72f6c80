"""Order search with equivalence-class pruning and AIC/BIC ranking.

Only one representative per equivalence class is ever fitted; every member
order inherits the representative's likelihood and criteria, and its exact
parameter vector is available through the class transformation.  Classes
that fail (cumulative boundary, no feasible start, non-convergence) are
kept in the report, flagged, and ranked after all successful classes.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

from .errors import CatorderError
from .fitting import FitConfig, FitResult, fit_mle, with_config
from .model import Dataset, ModelSpec
from .orders import EquivalenceClasses, Permutation, equivalence_classes, transform_theta

#: AIC gap under which two classes are reported as near-ties.
NEAR_TIE_DELTA = 2.0

#: The eight family/odds combinations scanned by the all-models report.
DEFAULT_MODEL_GRID = (
    ("baseline", "po"),
    ("baseline", "npo"),
    ("cumulative", "po"),
    ("cumulative", "npo"),
    ("adjacent", "po"),
    ("adjacent", "npo"),
    ("continuation", "po"),
    ("continuation", "npo"),
)


@dataclass(frozen=True)
class ClassFit:
    """One equivalence class with its representative fit and ranking slot."""

    representative: Permutation
    members: tuple[Permutation, ...]
    fit: FitResult | None
    error: str | None
    rank: int
    aic_gap: float

    @property
    def ok(self) -> bool:
        return self.error is None and self.fit is not None and self.fit.feasible and self.fit.converged

    @property
    def aic(self) -> float:
        return self.fit.aic if self.fit is not None else math.nan

    @property
    def loglik(self) -> float:
        return self.fit.loglik if self.fit is not None else math.nan


@dataclass(frozen=True)
class OrderSearchResult:
    """Every order ranked through its class; AIC ascending, failures last."""

    spec: ModelSpec
    partition: EquivalenceClasses
    class_fits: tuple[ClassFit, ...]
    near_ties: tuple[ClassFit, ...]

    @property
    def best(self) -> ClassFit | None:
        top = self.class_fits[0] if self.class_fits else None
        return top if top is not None and top.ok else None

    def class_for(self, sigma: Permutation) -> ClassFit:
        rep = self.partition.representative(sigma)
        for cf in self.class_fits:
            if cf.representative == rep:
                return cf
        raise CatorderError(f"no class recorded for order {sigma}")

    def theta_for(self, sigma: Permutation):
        """Exact parameters for any member order, via the class transformation."""
        cf = self.class_for(sigma)
        if cf.fit is None:
            raise CatorderError(f"class of {sigma} has no successful fit")
        return transform_theta(self.spec, cf.fit.theta, cf.representative, sigma)

    def rank_of(self, sigma: Permutation) -> tuple[int, float]:
        cf = self.class_for(sigma)
        return cf.rank, cf.aic_gap


def _fit_class(spec: ModelSpec, dataset: Dataset, rep: Permutation, config: FitConfig):
    """Fit a representative; retry once from the fallback start before flagging."""
    try:
        fit = fit_mle(spec, dataset, rep, config)
        err = None
    except CatorderError as exc:
        fit, err = None, f"{type(exc).__name__}: {exc}"
    if fit is not None and fit.feasible and fit.converged:
        return fit, None
    try:
        retry = fit_mle(spec, dataset, rep, with_config(config, initialization="zero-offset"))
    except CatorderError as exc:
        return fit, err or f"{type(exc).__name__}: {exc}"
    if fit is None or (retry.feasible, retry.converged, retry.loglik) > (
        fit.feasible,
        fit.converged,
        fit.loglik,
    ):
        return retry, None
    return fit, err


def search_orders(
    spec: ModelSpec,
    dataset: Dataset,
    config: FitConfig = FitConfig(),
    workers: int = 1,
    near_tie_delta: float = NEAR_TIE_DELTA,
) -> OrderSearchResult:
    """Fit one representative per equivalence class and rank all J! orders.

    Ranking is total and deterministic: ascending AIC with lexicographic
    representative as tie-break; infeasible or non-converged classes go
    last, flagged, with rank one past the successful classes.
    """
    partition = equivalence_classes(spec)
    reps = [members[0] for members in partition.classes]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(lambda r: _fit_class(spec, dataset, r, config), reps))
    else:
        fits = [_fit_class(spec, dataset, rep, config) for rep in reps]

    drafts = [
        ClassFit(rep, members, fit, err, rank=0, aic_gap=math.nan)
        for rep, members, (fit, err) in zip(reps, partition.classes, fits)
    ]
    ok = sorted((c for c in drafts if c.ok), key=lambda c: (c.aic, c.representative.image))
    bad = sorted((c for c in drafts if not c.ok), key=lambda c: c.representative.image)
    best_aic = ok[0].aic if ok else math.nan
    ranked = [
        replace(c, rank=1 + sum(1 for o in ok if o.aic < c.aic), aic_gap=c.aic - best_aic)
        for c in ok
    ]
    ranked += [replace(c, rank=len(ok) + 1) for c in bad]
    near = tuple(c for c in ranked if c.ok and c.aic_gap <= near_tie_delta)
    return OrderSearchResult(spec, partition, tuple(ranked), near)


def rank_of_order(result: OrderSearchResult, sigma: Permutation) -> tuple[int, float]:
    """(rank, AIC gap to the best class) for any order; class members share both."""
    return result.rank_of(sigma)


@dataclass(frozen=True)
class ModelRow:
    """One line of the all-models report."""

    family: str
    odds: str
    result: OrderSearchResult
    aic: float  # kernel convention
    aic_full: float  # kernel + multinomial coefficient of the grouped counts
    best_orders: tuple[Permutation, ...]
    description: str
    failure: str | None

    @property
    def available(self) -> bool:
        return self.failure is None


@dataclass(frozen=True)
class AllModelsResult:
    rows: tuple[ModelRow, ...]

    def row(self, family: str, odds: str) -> ModelRow:
        for r in self.rows:
            if (r.family, r.odds) == (family, odds):
                return r
        raise CatorderError(f"no row for {family} {odds}")


def describe_best_class(cf: ClassFit, partition: EquivalenceClasses, labels: tuple[str, ...]) -> str:
    """Human phrasing of a best class, in response-label terms."""
    members = cf.members
    total = math.factorial(partition.n_categories)
    if len(members) == total:
        return "all orders equivalent"
    baseline = {m.image[-1] for m in members}
    if len(members) == math.factorial(partition.n_categories - 1) and len(baseline) == 1:
        return f"{labels[members[0].image[-1] - 1]} as the baseline"
    shown = [f"({', '.join(m.labels(labels))})" for m in members[:4]]
    text = " or ".join(shown)
    if len(members) > 4:
        text += f" (+{len(members) - 4} equivalent)"
    return text


def search_all_models(
    dataset: Dataset,
    models: Sequence[tuple] = DEFAULT_MODEL_GRID,
    config: FitConfig = FitConfig(),
    workers: int = 1,
) -> AllModelsResult:
    """Run the order search for each (family, odds[, shared]) and tabulate.

    A model is reported unavailable (the NA situation) when the class with
    the smallest reached AIC is itself an invalid fit (boundary-infeasible
    or non-convergent): the likelihood then provably prefers a region where
    no meaningful model exists, so selecting the best valid class would
    misrepresent the family.
    """
    log_coef = dataset.log_multinomial_coefficient
    rows = []
    for entry in models:
        family, odds = entry[0], entry[1]
        shared = entry[2] if len(entry) > 2 else None
        spec = dataset.spec(family, odds, shared)
        res = search_orders(spec, dataset, config, workers=workers)
        best = res.best
        with_fit = [c for c in res.class_fits if c.fit is not None]
        raw_best = min(with_fit, key=lambda c: c.aic) if with_fit else None
        if best is None or raw_best is None or not raw_best.ok:
            reason = (
                (raw_best.error or _flag_reason(raw_best.fit))
                if raw_best is not None
                else "every class failed to fit"
            )
            rows.append(ModelRow(family, odds, res, math.nan, math.nan, (), "NA", reason))
            continue
        rows.append(
            ModelRow(
                family,
                odds,
                res,
                best.aic,
                best.aic - 2.0 * log_coef,
                best.members,
                describe_best_class(best, res.partition, dataset.responses),
                None,
            )
        )
    return AllModelsResult(tuple(rows))


def _flag_reason(fit: FitResult | None) -> str:
    if fit is None:
        return "fit failed"
    if not fit.feasible:
        return "infeasible: fitted parameters on the ordering-constraint boundary"
    return "did not converge"
