"""Multinomial logit model core: specs, parameters, probabilities, likelihood.

A model is one of four logit families (baseline-category, cumulative,
adjacent-categories, continuation-ratio) combined with an odds structure:

* ``po``  -- proportional odds: only the intercept is category specific,
  every covariate effect is shared across categories;
* ``npo`` -- nonproportional odds: intercept and all covariate effects are
  category specific;
* ``ppo`` -- partial proportional odds: the covariates are partitioned into
  a category-specific set and a shared set (the intercept is always
  category specific).

The linear predictors are

    eta[i, j] = h(x_i)' beta_j + h_c(x_i)' zeta,   j = 1..J-1

with h(x) = (1, x_specific) identical for every j and h_c(x) = x_shared.
Category probabilities are recovered from eta with the closed forms listed
in ``category_log_probabilities``; everything is evaluated in log space so
linear predictors up to |eta| ~ 700 stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
from scipy.special import gammaln, log_expit, logsumexp

from .errors import DataError, DimensionError, InfeasibleError, NonFiniteLikelihoodError

if TYPE_CHECKING:  # pragma: no cover - typing only, avoids an import cycle
    from .orders import Permutation

FAMILIES = ("baseline", "cumulative", "adjacent", "continuation")
ODDS = ("po", "npo", "ppo")

#: Row-sum defect tolerated in probability matrices.
ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class ModelSpec:
    """Which logit family and odds structure, and how covariates enter.

    ``shared`` holds the (0-based) indices of the dataset covariate columns
    whose effects are shared across categories; the remaining columns get
    category-specific coefficients.  ``po`` shares every column, ``npo``
    shares none.  The category-specific predictor h_j is the same function
    for every j (intercept plus the category-specific columns), which is the
    regime all order-equivalence results in :mod:`catorder.orders` assume.
    """

    family: str
    odds: str
    n_categories: int
    n_covariates: int
    shared: tuple[int, ...] = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DataError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.odds not in ODDS:
            raise DataError(f"unknown odds structure {self.odds!r}; choose from {ODDS}")
        if self.n_categories < 3:
            raise DataError("need at least 3 response categories")
        if self.n_covariates < 0:
            raise DataError("negative covariate count")
        shared = tuple(sorted(int(c) for c in self.shared))
        if len(set(shared)) != len(shared):
            raise DataError("duplicate shared covariate indices")
        if shared and (shared[0] < 0 or shared[-1] >= self.n_covariates):
            raise DataError(f"shared covariate index out of range 0..{self.n_covariates - 1}")
        if self.odds == "po" and len(shared) != self.n_covariates:
            raise DataError("po requires every covariate in the shared block")
        if self.odds == "npo" and shared:
            raise DataError("npo admits no shared covariates")
        object.__setattr__(self, "shared", shared)

    @classmethod
    def build(
        cls,
        family: str,
        odds: str,
        n_categories: int,
        n_covariates: int,
        shared: Sequence[int] | None = None,
    ) -> "ModelSpec":
        """Construct a spec, filling the shared block from the odds structure."""
        if odds == "po":
            shared = tuple(range(n_covariates))
        elif odds == "npo":
            shared = ()
        elif shared is None:
            raise DataError("ppo requires an explicit shared covariate set")
        return cls(family, odds, n_categories, n_covariates, tuple(shared))

    @property
    def specific(self) -> tuple[int, ...]:
        """Covariate columns with category-specific coefficients."""
        return tuple(c for c in range(self.n_covariates) if c not in self.shared)

    @property
    def block_size(self) -> int:
        """Length p_j of each beta_j block (intercept + specific columns)."""
        return 1 + len(self.specific)

    @property
    def shared_size(self) -> int:
        return len(self.shared)

    @property
    def n_params(self) -> int:
        return (self.n_categories - 1) * self.block_size + self.shared_size


@dataclass(frozen=True)
class Theta:
    """Stacked regression parameters: J-1 beta blocks plus the shared zeta."""

    beta: tuple[np.ndarray, ...]
    zeta: np.ndarray

    def __post_init__(self):
        beta = tuple(np.asarray(b, dtype=float) for b in self.beta)
        zeta = np.asarray(self.zeta, dtype=float)
        for b in beta:
            b.flags.writeable = False
        zeta.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "zeta", zeta)

    @classmethod
    def from_flat(cls, spec: ModelSpec, flat: Sequence[float]) -> "Theta":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (spec.n_params,):
            raise DimensionError("theta", (spec.n_params,), flat.shape)
        k, pj = spec.n_categories - 1, spec.block_size
        beta = tuple(flat[j * pj : (j + 1) * pj] for j in range(k))
        return cls(beta, flat[k * pj :])

    @classmethod
    def zeros(cls, spec: ModelSpec) -> "Theta":
        return cls.from_flat(spec, np.zeros(spec.n_params))

    def to_flat(self) -> np.ndarray:
        return np.concatenate([*self.beta, self.zeta])

    def validate_for(self, spec: ModelSpec) -> None:
        if len(self.beta) != spec.n_categories - 1:
            raise DimensionError("beta blocks", spec.n_categories - 1, len(self.beta))
        for j, b in enumerate(self.beta):
            if b.shape != (spec.block_size,):
                raise DimensionError(f"beta_{j + 1}", (spec.block_size,), b.shape)
        if self.zeta.shape != (spec.shared_size,):
            raise DimensionError("zeta", (spec.shared_size,), self.zeta.shape)
        if not all(np.all(np.isfinite(b)) for b in self.beta) or not np.all(
            np.isfinite(self.zeta)
        ):
            raise DataError("theta entries must be finite")


@dataclass(frozen=True)
class Dataset:
    """Summarized data: m distinct design points with multinomial counts.

    ``x`` is the (m, d) numeric design (categorical covariates already
    dummy-expanded), ``y`` the (m, J) count matrix.  Rows with zero total
    are dropped on construction; duplicate design rows have their counts
    aggregated.  Instances are immutable and safe to share across threads.
    """

    x: np.ndarray
    y: np.ndarray
    covariates: tuple[str, ...] = ()
    responses: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.x, dtype=float))
        y = np.atleast_2d(np.asarray(self.y))
        if np.any(y < 0) or not np.all(y == np.floor(y)):
            raise DataError("counts must be nonnegative integers")
        y = y.astype(np.int64)
        if x.shape[0] != y.shape[0]:
            raise DimensionError("rows", x.shape[0], y.shape[0])
        if y.shape[1] < 3:
            raise DataError("need at least 3 response categories")
        covariates = tuple(self.covariates) or tuple(f"x{i + 1}" for i in range(x.shape[1]))
        responses = tuple(self.responses) or tuple(f"y{j + 1}" for j in range(y.shape[1]))
        if len(covariates) != x.shape[1]:
            raise DimensionError("covariate names", x.shape[1], len(covariates))
        if len(responses) != y.shape[1]:
            raise DimensionError("response names", y.shape[1], len(responses))
        keep = y.sum(axis=1) > 0
        x, y = x[keep], y[keep]
        if x.shape[0] == 0:
            raise DataError("dataset has no rows with positive total count")
        if len({tuple(row) for row in x}) != x.shape[0]:
            raise DataError("design points must be distinct (use from_arrays to aggregate)")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "covariates", covariates)
        object.__setattr__(self, "responses", responses)

    @classmethod
    def from_arrays(cls, x, y, covariates=(), responses=()) -> "Dataset":
        """Build a dataset, aggregating counts over duplicate design rows."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y))
        seen: dict[tuple, int] = {}
        xs, ys = [], []
        for xi, yi in zip(x, y):
            key = tuple(xi)
            if key in seen:
                ys[seen[key]] = ys[seen[key]] + yi
            else:
                seen[key] = len(xs)
                xs.append(xi)
                ys.append(np.array(yi))
        return cls(np.array(xs), np.array(ys), tuple(covariates), tuple(responses))

    @property
    def m(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_categories(self) -> int:
        return self.y.shape[1]

    @property
    def totals(self) -> np.ndarray:
        return self.y.sum(axis=1)

    @property
    def grand_total(self) -> int:
        return int(self.y.sum())

    @property
    def log_multinomial_coefficient(self) -> float:
        """log prod_i [n_i! / prod_j Y_ij!]; invariant under category permutation.

        Adding this constant to the likelihood kernel gives the full grouped
        multinomial log-likelihood, the convention most fitting software
        reports AIC under.
        """
        n = self.totals
        return float(np.sum(gammaln(n + 1)) - np.sum(gammaln(self.y + 1)))

    def spec(self, family: str, odds: str, shared: Sequence[int] | None = None) -> ModelSpec:
        """Convenience: a ModelSpec sized for this dataset."""
        return ModelSpec.build(family, odds, self.n_categories, self.d, shared)


@dataclass(frozen=True)
class EtaMatrix:
    """Linear predictors eta[i, j] for j = 1..J-1, with rho = logistic(eta)."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.atleast_2d(np.asarray(self.eta, dtype=float))
        eta.flags.writeable = False
        object.__setattr__(self, "eta", eta)

    @property
    def rho(self) -> np.ndarray:
        return np.exp(log_expit(self.eta))


def design_blocks(spec: ModelSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return (H, Hc): rows h(x_i) = (1, x_specific) and h_c(x_i) = x_shared."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != spec.n_covariates:
        raise DimensionError("covariates", spec.n_covariates, x.shape[1])
    h = np.column_stack([np.ones(x.shape[0])] + [x[:, c] for c in spec.specific])
    hc = x[:, list(spec.shared)] if spec.shared else np.zeros((x.shape[0], 0))
    return h, hc


def linear_predictors(spec: ModelSpec, theta: Theta, dataset: Dataset) -> EtaMatrix:
    """eta[i, j] = h(x_i)' beta_j + h_c(x_i)' zeta."""
    theta.validate_for(spec)
    if dataset.n_categories != spec.n_categories:
        raise DimensionError("response categories", spec.n_categories, dataset.n_categories)
    h, hc = design_blocks(spec, dataset.x)
    return eta_from_design(spec, theta, h, hc)


def eta_from_design(spec: ModelSpec, theta: Theta, h: np.ndarray, hc: np.ndarray) -> EtaMatrix:
    shared_part = hc @ theta.zeta if spec.shared_size else 0.0
    eta = np.column_stack([h @ b for b in theta.beta]) + np.atleast_1d(shared_part)[:, None]
    return EtaMatrix(eta)


def _log_expm1(t: np.ndarray) -> np.ndarray:
    """log(exp(t) - 1) for t > 0, safe for large t."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    small = t < 30.0
    out[small] = np.log(np.expm1(t[small]))
    out[~small] = t[~small] + np.log1p(-np.exp(-t[~small]))
    return out


def category_log_probabilities(family: str, eta: EtaMatrix | np.ndarray) -> np.ndarray:
    """(m, J) matrix of log pi_ij as a function of eta alone.

    Probabilities never depend on the observed counts.  For the cumulative
    family the predictors must be strictly increasing across j within every
    row; a violation raises :class:`InfeasibleError` identifying the first
    offending (row, category).
    """
    e = eta.eta if isinstance(eta, EtaMatrix) else np.atleast_2d(np.asarray(eta, dtype=float))
    m, k = e.shape
    J = k + 1
    if family == "baseline":
        logits = np.column_stack([e, np.zeros(m)])
        return logits - logsumexp(logits, axis=1, keepdims=True)
    if family == "adjacent":
        # pi_j proportional to exp(sum_{l>=j} eta_l), pi_J to exp(0).
        tails = np.column_stack([np.cumsum(e[:, ::-1], axis=1)[:, ::-1], np.zeros(m)])
        return tails - logsumexp(tails, axis=1, keepdims=True)
    if family == "continuation":
        log_rho = log_expit(e)
        log_not = log_expit(-e)
        prior = np.cumsum(log_not, axis=1)  # sum_{l<=j} log(1 - rho_l)
        out = np.empty((m, J))
        out[:, 0] = log_rho[:, 0]
        out[:, 1:k] = log_rho[:, 1:] + prior[:, :-1]
        out[:, k] = prior[:, -1]
        return out
    if family == "cumulative":
        bad = np.argwhere(np.diff(e, axis=1) <= 0)
        if bad.size:
            i, j = bad[0]
            raise InfeasibleError(int(i), int(j) + 1)
        out = np.empty((m, J))
        out[:, 0] = log_expit(e[:, 0])
        out[:, k] = log_expit(-e[:, k - 1])
        if k > 1:
            a, b = e[:, :-1], e[:, 1:]
            # expit(b) - expit(a) = expit(a) * expit(-b) * expm1(b - a)
            out[:, 1:k] = log_expit(a) + log_expit(-b) + _log_expm1(b - a)
        return out
    raise DataError(f"unknown family {family!r}")


def category_probabilities(family: str, eta: EtaMatrix | np.ndarray) -> np.ndarray:
    """(m, J) probability matrix; rows sum to one within 1e-12."""
    return np.exp(category_log_probabilities(family, eta))


def dlogpi_deta(family: str, eta: EtaMatrix | np.ndarray) -> np.ndarray:
    """(m, J, J-1) tensor S with S[i, j, l] = d log pi_ij / d eta_il.

    Shared by the score and Fisher-information assembly in
    :mod:`catorder.fitting`.  All entries are expressed through bounded
    quantities except the interior cumulative ratios, which genuinely blow
    up at the feasibility boundary.
    """
    e = eta.eta if isinstance(eta, EtaMatrix) else np.atleast_2d(np.asarray(eta, dtype=float))
    m, k = e.shape
    J = k + 1
    if family == "baseline":
        pi = np.exp(category_log_probabilities(family, e))
        return np.eye(J, k)[None, :, :] - pi[:, None, :k]
    if family == "adjacent":
        pi = np.exp(category_log_probabilities(family, e))
        pcum = np.cumsum(pi, axis=1)[:, :k]
        mask = (np.arange(J)[:, None] <= np.arange(k)[None, :]).astype(float)
        return mask[None, :, :] - pcum[:, None, :]
    if family == "continuation":
        rho = np.exp(log_expit(e))
        s = np.zeros((m, J, k))
        below = (np.arange(J)[:, None] > np.arange(k)[None, :]).astype(float)
        s -= below[None, :, :] * rho[:, None, :]
        idx = np.arange(k)
        s[:, idx, idx] = 1.0 - rho
        return s
    if family == "cumulative":
        logpi = category_log_probabilities(family, e)
        log_rho_prime = log_expit(e) + log_expit(-e)
        s = np.zeros((m, J, k))
        idx = np.arange(k)
        s[:, idx, idx] = np.exp(log_rho_prime - logpi[:, :k])
        s[:, idx + 1, idx] = -np.exp(log_rho_prime - logpi[:, 1:])
        return s
    raise DataError(f"unknown family {family!r}")


def permuted_counts(y: np.ndarray, sigma: "Permutation | None") -> np.ndarray:
    """Counts rearranged so model slot k receives original category sigma(k)."""
    if sigma is None:
        return y
    image0 = np.asarray(sigma.image, dtype=int) - 1
    if image0.shape[0] != y.shape[1]:
        raise DimensionError("permutation length", y.shape[1], image0.shape[0])
    return y[:, image0]


def loglik_kernel(yp: np.ndarray, logpi: np.ndarray) -> float:
    """sum_ij Y_ij log pi_ij with zero counts contributing exactly zero.

    Returns -inf when a positive count sits on an underflowed probability;
    callers decide whether that is an error or a rejected line-search step.
    """
    mask = yp > 0
    vals = logpi[mask]
    if np.any(np.isneginf(vals)):
        return float("-inf")
    return float(np.sum(yp[mask] * vals))


def log_likelihood(
    spec: ModelSpec, theta: Theta, dataset: Dataset, sigma: "Permutation | None" = None
) -> float:
    """Likelihood kernel l_N(theta, sigma) = sum_ij Y_ij log pi_{i, sigma^{-1}(j)}.

    The multinomial coefficient is a data-only constant and is excluded; it
    cancels from every order or model comparison on fixed data (see
    ``Dataset.log_multinomial_coefficient`` to restore it).
    """
    logpi = category_log_probabilities(spec.family, linear_predictors(spec, theta, dataset))
    yp = permuted_counts(dataset.y, sigma)
    value = loglik_kernel(yp, logpi)
    if value == float("-inf"):
        raise NonFiniteLikelihoodError("probability underflow at a category with positive count")
    return value


@dataclass(frozen=True)
class FeasibilityReport:
    """Cumulative-model constraint check: h'beta_j < h'beta_{j+1} everywhere.

    ``violations`` lists (row, j) pairs, 0-based row and 1-based j, where
    the predictor at category j fails to lie strictly below the one at j+1.
    ``margin`` is min_{i,j} (eta_{i,j+1} - eta_{i,j}); positive iff feasible.
    """

    violations: tuple[tuple[int, int], ...]
    margin: float

    @property
    def feasible(self) -> bool:
        return not self.violations


def check_cumulative_feasibility(spec: ModelSpec, theta: Theta, dataset: Dataset) -> FeasibilityReport:
    """List every violated cumulative ordering constraint (empty = feasible)."""
    if spec.family != "cumulative":
        raise DataError("feasibility checking applies to the cumulative family only")
    eta = linear_predictors(spec, theta, dataset).eta
    gaps = np.diff(eta, axis=1)
    if gaps.size == 0:
        return FeasibilityReport((), float("inf"))
    bad = np.argwhere(gaps <= 0)
    violations = tuple((int(i), int(j) + 1) for i, j in bad)
    return FeasibilityReport(violations, float(gaps.min()))
