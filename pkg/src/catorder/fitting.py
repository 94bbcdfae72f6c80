"""Maximum-likelihood fitting of one (model spec, category order) pair.

The optimizer is damped Newton on the score / expected-information pair
(Fisher scoring) with step-halving.  Iterates are kept strictly inside the
cumulative feasible region by rejecting any step that violates the ordering
constraints; when the damped Newton system cannot be solved or the step is
not an ascent direction, a scaled gradient step is tried before giving up.
Separation (coefficients drifting to +-infinity while the likelihood
converges) is detected and flagged, not treated as failure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from .errors import DataError, InfeasibleError, SingularHessianError
from .model import (
    Dataset,
    ModelSpec,
    Theta,
    category_log_probabilities,
    design_blocks,
    dlogpi_deta,
    loglik_kernel,
    permuted_counts,
)

if TYPE_CHECKING:  # pragma: no cover
    from .orders import Permutation

#: |coefficient| beyond which a fit is flagged as separation-suspected.
SEPARATION_SCALE = 10.0


@dataclass(frozen=True)
class FitConfig:
    """Optimizer knobs; defaults suit every dataset in the test-suite."""

    max_iterations: int = 200
    gradient_tolerance: float = 1e-8
    step_halving_limit: int = 30
    ridge_seed: float = 1e-8
    initialization: str = "empirical"  # or "zero-offset"
    min_improvement: float = 1e-10
    boundary_margin: float = 1e-6

    def __post_init__(self):
        if min(self.gradient_tolerance, self.ridge_seed, self.min_improvement) <= 0:
            raise DataError("tolerances must be positive")
        if self.max_iterations < 1 or self.step_halving_limit < 1:
            raise DataError("iteration budgets must be at least 1")
        if self.initialization not in ("empirical", "zero-offset"):
            raise DataError(f"unknown initialization {self.initialization!r}")


@dataclass(frozen=True)
class FitResult:
    """MLE of theta for a fixed order, with selection criteria and diagnostics.

    ``feasible`` is only meaningful for the cumulative family: it reports
    whether the final iterate sits clear of the ordering-constraint boundary
    (margin > boundary_margin).  A boundary fit is the situation existing
    software reports as an invalid model.

    ``converged`` means the max-abs score met the tolerance, or the iterate
    became numerically stationary (no representable step improves the
    likelihood) with the score below tolerance * max(1, N): for large count
    totals the float resolution of the kernel leaves a score floor well
    above any tiny absolute tolerance even at the exact optimum.
    """

    theta: Theta
    loglik: float
    aic: float
    bic: float
    converged: bool
    iterations: int
    feasible: bool
    separation_suspected: bool
    gradient_norm: float
    margin: float | None = None
    n_params: int = 0
    n_obs: int = 0


class Workspace:
    """Precomputed design tensors for repeated likelihood/score/info calls."""

    def __init__(self, spec: ModelSpec, dataset: Dataset, sigma: "Permutation | None"):
        if dataset.n_categories != spec.n_categories:
            raise DataError("dataset category count does not match the model spec")
        self.spec = spec
        self.dataset = dataset
        self.h, self.hc = design_blocks(spec, dataset.x)
        self.yp = permuted_counts(dataset.y, sigma)
        self.n = dataset.totals.astype(float)
        m, k, pj, pc = dataset.m, spec.n_categories - 1, spec.block_size, spec.shared_size
        xt = np.zeros((m, k, spec.n_params))
        for j in range(k):
            xt[:, j, j * pj : (j + 1) * pj] = self.h
        if pc:
            xt[:, :, k * pj :] = self.hc[:, None, :]
        self.xt = xt

    def eta(self, flat: np.ndarray) -> np.ndarray:
        return np.einsum("ika,a->ik", self.xt, flat)

    def loglik(self, flat: np.ndarray) -> float:
        """Kernel value; -inf for infeasible or underflowed iterates."""
        try:
            logpi = category_log_probabilities(self.spec.family, self.eta(flat))
        except InfeasibleError:
            return float("-inf")
        return loglik_kernel(self.yp, logpi)

    def score(self, flat: np.ndarray) -> np.ndarray:
        s = dlogpi_deta(self.spec.family, self.eta(flat))
        g_eta = np.einsum("ij,ijk->ik", self.yp, s)
        return np.einsum("ik,ika->a", g_eta, self.xt)

    def information(self, flat: np.ndarray) -> np.ndarray:
        """Expected (Fisher) information of the kernel at flat; symmetric PSD."""
        eta = self.eta(flat)
        s = dlogpi_deta(self.spec.family, eta)
        pi = np.exp(category_log_probabilities(self.spec.family, eta))
        w = np.einsum("ijk,ij,ijl->ikl", s, pi, s)
        w = np.einsum("i,ikl->ikl", self.n, w)
        info = np.einsum("ikl,ika,ilb->ab", w, self.xt, self.xt)
        return 0.5 * (info + info.T)

    def initial_point(self, strategy: str) -> np.ndarray:
        """Intercepts from pooled empirical logits; slopes zero.

        Falls back to tiny increasing intercept offsets when a pooled
        category count is zero (empirical logits undefined).
        """
        spec = self.spec
        flat = np.zeros(spec.n_params)
        k, pj = spec.n_categories - 1, spec.block_size
        counts = self.yp.sum(axis=0).astype(float)
        if strategy == "empirical" and np.all(counts > 0):
            q = counts / counts.sum()
            if spec.family == "baseline":
                icpt = np.log(q[:k] / q[k])
            elif spec.family == "cumulative":
                cq = np.cumsum(q)[:k]
                icpt = np.log(cq / (1.0 - cq))
            elif spec.family == "adjacent":
                icpt = np.log(q[:k] / q[1:])
            else:  # continuation
                tail = np.cumsum(q[::-1])[::-1]
                icpt = np.log(q[:k] / tail[1:])
        else:
            icpt = (1 + np.arange(k)) * 1e-3
        flat[np.arange(k) * pj] = icpt
        return flat


def _solve_damped(info: np.ndarray, grad: np.ndarray, ridge_seed: float) -> np.ndarray:
    """Newton direction from a possibly singular information matrix.

    Escalates a ridge term until the Cholesky factorization succeeds;
    raises SingularHessianError only when even heavy damping fails
    (NaN/Inf entries).
    """
    if not np.all(np.isfinite(info)):
        raise SingularHessianError("information matrix has non-finite entries")
    lam = 0.0
    scale = max(1.0, float(np.max(np.abs(np.diag(info))))) if info.size else 1.0
    for _ in range(40):
        try:
            c, low = scipy.linalg.cho_factor(info + lam * np.eye(info.shape[0]), lower=True)
            return scipy.linalg.cho_solve((c, low), grad)
        except scipy.linalg.LinAlgError:
            lam = ridge_seed * scale if lam == 0.0 else lam * 10.0
    raise SingularHessianError("damping failed to produce a positive definite system")


def score_vector(
    spec: ModelSpec, theta: Theta, dataset: Dataset, sigma: "Permutation | None" = None
) -> np.ndarray:
    """Gradient of the likelihood kernel with respect to flattened theta."""
    theta.validate_for(spec)
    return Workspace(spec, dataset, sigma).score(theta.to_flat())


def information_matrix(
    spec: ModelSpec, theta: Theta, dataset: Dataset, sigma: "Permutation | None" = None
) -> np.ndarray:
    """Expected information (negative expected kernel Hessian); p x p PSD."""
    theta.validate_for(spec)
    return Workspace(spec, dataset, sigma).information(theta.to_flat())


def _line_search(ws: Workspace, flat, ll, direction, limit) -> tuple[np.ndarray, float] | None:
    # Non-strict acceptance lets the iteration keep contracting the gradient
    # once improvements drop below the likelihood's float resolution; a
    # candidate that does not move the iterate is useless and is skipped,
    # so exhaustion here means the point is numerically stationary.
    t = 1.0
    for _ in range(limit + 1):
        cand = flat + t * direction
        if np.array_equal(cand, flat):
            break
        cand_ll = ws.loglik(cand)
        if cand_ll >= ll and cand_ll > float("-inf"):
            return cand, cand_ll
        t *= 0.5
    return None


def fit_mle(
    spec: ModelSpec,
    dataset: Dataset,
    sigma: "Permutation | None" = None,
    config: FitConfig = FitConfig(),
    start: Theta | None = None,
) -> FitResult:
    """Maximize the likelihood kernel over theta for a fixed category order.

    The returned loglik never falls below its value at the starting point.
    Cumulative iterates stay strictly feasible; a fit that stalls against
    the feasibility boundary comes back with ``feasible=False``.  Raises
    InfeasibleError only when no feasible ascent step exists at all.
    """
    ws = Workspace(spec, dataset, sigma)
    if start is not None:
        start.validate_for(spec)
        flat = start.to_flat()
    else:
        flat = ws.initial_point(config.initialization)
    ll = ws.loglik(flat)
    if ll == float("-inf"):
        flat = ws.initial_point("zero-offset")
        ll = ws.loglik(flat)
        if ll == float("-inf"):
            raise InfeasibleError(-1, -1, "no feasible starting point found")

    grad = ws.score(flat)
    gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
    # the max-abs score carries float noise proportional to the count scale,
    # so a fit pinned at the representable optimum is accepted at this level
    noise_tol = config.gradient_tolerance * max(1.0, dataset.grand_total)
    iterations = 0
    stalled = False
    stationary = False
    crawling = False  # improvement < min_improvement while the gradient stayed large
    for _ in range(config.max_iterations):
        if gnorm <= config.gradient_tolerance:
            break
        iterations += 1
        direction = _solve_damped(ws.information(flat), grad, config.ridge_seed)
        step = _line_search(ws, flat, ll, direction, config.step_halving_limit)
        if step is None:
            step = _line_search(ws, flat, ll, grad / max(1.0, gnorm), config.step_halving_limit)
        if step is None:
            stalled = True
            break
        improvement = step[1] - ll
        gnorm_before = gnorm
        flat, ll = step
        grad = ws.score(flat)
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        if improvement < config.min_improvement:
            if gnorm <= noise_tol:
                stationary = True
                break
            if gnorm >= gnorm_before:
                # no likelihood gain and no gradient contraction: wandering
                # on a float plateau that is not near a stationary point
                stalled = True
                break
            crawling = True

    theta = Theta.from_flat(spec, flat)
    converged = (
        gnorm <= config.gradient_tolerance
        or stationary
        or (stalled and gnorm <= noise_tol)
    )
    separation = bool(np.any(np.abs(flat) > SEPARATION_SCALE)) or (
        not converged and (stalled or crawling)
    )
    margin = None
    feasible = True
    if spec.family == "cumulative":
        eta = ws.eta(flat)
        margin = float(np.min(np.diff(eta, axis=1))) if eta.shape[1] > 1 else float("inf")
        feasible = margin > config.boundary_margin
    p, n_obs = spec.n_params, dataset.grand_total
    return FitResult(
        theta=theta,
        loglik=ll,
        aic=-2.0 * ll + 2.0 * p,
        bic=-2.0 * ll + p * float(np.log(n_obs)),
        converged=converged,
        iterations=iterations,
        feasible=feasible,
        separation_suspected=separation,
        gradient_norm=gnorm,
        margin=margin,
        n_params=p,
        n_obs=n_obs,
    )



def with_config(config: FitConfig, **kwargs) -> FitConfig:
    """Return a copy of config with selected fields replaced."""
    return replace(config, **kwargs)
