"""Shared fixtures: reference datasets and randomized-instance builders."""

import numpy as np
import pytest

from catorder.model import Dataset, ModelSpec, Theta
from catorder.orders import Permutation
from catorder.simulate import SimulationPlan, simulate_dataset

#: Four-point, four-category table generated from a baseline po model with
#: the fourth category as baseline (x = 1..4, 100 subjects per point).
TABLE4_X = np.arange(1.0, 5.0).reshape(-1, 1)
TABLE4_Y = np.array(
    [
        [22, 33, 10, 35],
        [31, 40, 14, 15],
        [23, 43, 22, 12],
        [27, 49, 18, 6],
    ]
)
TABLE4_THETA = Theta(
    (np.array([-0.8]), np.array([-0.3]), np.array([-1.0])), np.array([0.5])
)

ALL_MODELS = [
    ("baseline", "po"),
    ("baseline", "npo"),
    ("cumulative", "po"),
    ("cumulative", "npo"),
    ("adjacent", "po"),
    ("adjacent", "npo"),
    ("continuation", "po"),
    ("continuation", "npo"),
]


@pytest.fixture
def table4() -> Dataset:
    return Dataset(TABLE4_X, TABLE4_Y)


@pytest.fixture
def police() -> Dataset:
    from catorder.io import police_dataset

    return police_dataset()


def random_theta(spec: ModelSpec, rng: np.random.Generator, scale: float = 0.5) -> Theta:
    """A finite theta; for cumulative models the intercepts are spaced so the
    parameter stays feasible on designs with covariates in [-1, 1]."""
    beta = [rng.normal(scale=scale, size=spec.block_size) for _ in range(spec.n_categories - 1)]
    zeta = rng.normal(scale=scale, size=spec.shared_size)
    if spec.family == "cumulative":
        spread = 2.5 * (np.arange(spec.n_categories - 1) - (spec.n_categories - 2) / 2.0)
        for j, b in enumerate(beta):
            b *= 0.15
            b[0] = spread[j] + rng.normal(scale=0.1)
        zeta = zeta * 0.15
    return Theta(tuple(beta), zeta)


def random_dataset(
    spec: ModelSpec,
    rng: np.random.Generator,
    m: int = 5,
    per_row: int = 150,
    theta: Theta | None = None,
) -> Dataset:
    """Counts drawn from the model itself at a feasible random theta, so the
    MLE is interior with high probability."""
    theta = theta if theta is not None else random_theta(spec, rng)
    x = rng.uniform(-1.0, 1.0, size=(m, spec.n_covariates))
    plan = SimulationPlan(
        spec,
        theta,
        Permutation.identity(spec.n_categories),
        x,
        np.full(m, 1.0 / m),
        m * per_row,
        allocation="fixed",
    )
    return simulate_dataset(plan, seed=int(rng.integers(2**31)))
