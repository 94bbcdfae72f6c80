"""Optimizer behavior: saturated fits, derivatives, damping, diagnostics."""

import zlib

import numpy as np
import pytest

from catorder.errors import DataError
from catorder.fitting import (
    FitConfig,
    Workspace,
    fit_mle,
    information_matrix,
    score_vector,
    with_config,
)
from catorder.model import (
    Dataset,
    ModelSpec,
    Theta,
    category_probabilities,
    linear_predictors,
    log_likelihood,
)
from catorder.orders import Permutation

from conftest import ALL_MODELS, random_dataset, random_theta

FAMILIES = ("baseline", "cumulative", "adjacent", "continuation")


def fd_score(spec, theta, ds, sigma, step=1e-6):
    flat = theta.to_flat()
    out = np.zeros_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = step
        hi = log_likelihood(spec, Theta.from_flat(spec, flat + e), ds, sigma)
        lo = log_likelihood(spec, Theta.from_flat(spec, flat - e), ds, sigma)
        out[i] = (hi - lo) / (2 * step)
    return out


class TestSaturated:
    @pytest.mark.parametrize("family", FAMILIES)
    def test_single_point_recovers_empirical_frequencies(self, family):
        spec = ModelSpec.build(family, "npo", 3, 0)
        ds = Dataset(np.zeros((1, 0)), np.array([[2, 3, 5]]))
        res = fit_mle(spec, ds)
        pi = category_probabilities(family, linear_predictors(spec, res.theta, ds))
        assert np.allclose(pi, [[0.2, 0.3, 0.5]], atol=1e-6)
        expected = 2 * np.log(0.2) + 3 * np.log(0.3) + 5 * np.log(0.5)
        assert res.loglik == pytest.approx(expected, abs=1e-9)
        assert res.converged

    def test_two_point_saturated_npo(self):
        # m=2 design points, J=3, intercept+slope npo: p = 4 = free
        # probabilities, so the fit saturates and matches both rows
        x = np.array([[0.0], [1.0]])
        y = np.array([[10, 20, 30], [25, 25, 10]])
        ds = Dataset(x, y)
        for family in FAMILIES:
            spec = ds.spec(family, "npo")
            res = fit_mle(spec, ds)
            pi = category_probabilities(family, linear_predictors(spec, res.theta, ds))
            assert np.max(np.abs(pi - y / y.sum(axis=1, keepdims=True))) < 1e-6

    def test_score_vanishes_at_saturated_optimum(self):
        spec = ModelSpec.build("baseline", "npo", 3, 0)
        ds = Dataset(np.zeros((1, 0)), np.array([[2, 3, 5]]))
        res = fit_mle(spec, ds)
        assert np.max(np.abs(score_vector(spec, res.theta, ds))) < 1e-8

    def test_information_positive_definite_at_saturated_mle(self):
        spec = ModelSpec.build("adjacent", "npo", 4, 0)
        ds = Dataset(np.zeros((1, 0)), np.array([[10, 20, 30, 40]]))
        res = fit_mle(spec, ds)
        info = information_matrix(spec, res.theta, ds)
        assert np.all(np.linalg.eigvalsh(info) > 0)


class TestDerivatives:
    @pytest.mark.parametrize("family,odds", ALL_MODELS)
    def test_score_matches_central_differences(self, family, odds):
        rng = np.random.default_rng(zlib.crc32(f"{family}/{odds}".encode()))
        for j in (3, 4):
            spec = ModelSpec.build(family, odds, j, 2)
            ds = random_dataset(spec, rng, m=5, per_row=60)
            sigma = tuple(rng.permutation(j) + 1)
            for _ in range(3):
                theta = random_theta(spec, rng)
                got = score_vector(spec, theta, ds, Permutation(sigma))
                want = fd_score(spec, theta, ds, Permutation(sigma))
                rel = np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))
                assert rel < 1e-4

    def test_block_structure_of_score(self):
        # shifting one beta block only changes that block's score coordinates
        rng = np.random.default_rng(9)
        spec = ModelSpec.build("baseline", "po", 4, 2)
        ds = random_dataset(spec, rng, m=4, per_row=50)
        theta = random_theta(spec, rng)
        base = fd_score(spec, theta, ds, None)
        got = score_vector(spec, theta, ds)
        assert np.allclose(got, base, atol=1e-3)
        flat = theta.to_flat()
        flat2 = flat.copy()
        flat2[1] += 0.3  # beta_2 intercept (block size 1 for po)
        got2 = score_vector(spec, Theta.from_flat(spec, flat2), ds)
        # beta_1 and beta_3 coordinates respond only through shared zeta rows
        assert got2[1] != pytest.approx(got[1], abs=1e-12)

    def test_fisher_information_matches_fd_hessian_for_baseline(self):
        # canonical-link family: observed == expected information
        rng = np.random.default_rng(4)
        spec = ModelSpec.build("baseline", "npo", 3, 1)
        ds = random_dataset(spec, rng, m=4, per_row=80)
        theta = random_theta(spec, rng)
        info = information_matrix(spec, theta, ds)
        flat = theta.to_flat()
        h = 1e-5
        fd = np.zeros_like(info)
        for i in range(flat.size):
            e = np.zeros_like(flat)
            e[i] = h
            gp = score_vector(spec, Theta.from_flat(spec, flat + e), ds)
            gm = score_vector(spec, Theta.from_flat(spec, flat - e), ds)
            fd[i] = -(gp - gm) / (2 * h)
        assert np.max(np.abs(info - fd)) / max(1.0, np.max(np.abs(fd))) < 1e-5

    @pytest.mark.parametrize("family,odds", ALL_MODELS)
    def test_information_symmetric_psd(self, family, odds):
        rng = np.random.default_rng(zlib.crc32(f"{odds}/{family}".encode()))
        spec = ModelSpec.build(family, odds, 4, 2)
        ds = random_dataset(spec, rng, m=5, per_row=60)
        theta = random_theta(spec, rng)
        info = information_matrix(spec, theta, ds, None)
        assert np.allclose(info, info.T, atol=1e-10)
        assert np.min(np.linalg.eigvalsh(info)) > -1e-8 * max(1.0, np.max(np.abs(info)))


class TestOptimizer:
    def test_monotone_ascent(self):
        rng = np.random.default_rng(21)
        spec = ModelSpec.build("continuation", "npo", 4, 2)
        ds = random_dataset(spec, rng, m=5, per_row=70)
        ws = Workspace(spec, ds, None)
        start = ws.initial_point("empirical")
        res = fit_mle(spec, ds)
        assert res.loglik >= ws.loglik(start) - 1e-12

    @pytest.mark.parametrize("family,odds", ALL_MODELS)
    def test_refit_from_solution_is_immediate(self, family, odds):
        rng = np.random.default_rng(zlib.crc32(f"{family}/{odds}/refit".encode()))
        spec = ModelSpec.build(family, odds, 4, 2)
        ds = random_dataset(spec, rng, m=5, per_row=60)
        first = fit_mle(spec, ds)
        again = fit_mle(spec, ds, start=first.theta)
        assert again.iterations <= 2
        assert again.loglik == pytest.approx(first.loglik, abs=1e-10)

    def test_aic_bic_arithmetic(self):
        rng = np.random.default_rng(2)
        spec = ModelSpec.build("adjacent", "po", 4, 1)
        ds = random_dataset(spec, rng, m=4, per_row=50)
        res = fit_mle(spec, ds)
        assert res.aic == -2.0 * res.loglik + 2 * spec.n_params
        assert res.bic == -2.0 * res.loglik + spec.n_params * np.log(ds.grand_total)

    def test_redundant_dummy_triggers_damping_not_crash(self):
        # duplicated covariate column: information is singular by construction
        rng = np.random.default_rng(3)
        x = rng.uniform(-1, 1, size=(5, 1))
        x = np.column_stack([x, x])
        y = rng.integers(5, 30, size=(5, 3))
        ds = Dataset(x, y)
        spec = ds.spec("baseline", "po")
        info = information_matrix(spec, Theta.zeros(spec), ds)
        assert np.min(np.abs(np.linalg.eigvalsh(info))) < 1e-8 * np.max(np.abs(info))
        res = fit_mle(spec, ds)
        assert np.isfinite(res.loglik)

    def test_nonconvergence_reported_not_raised(self):
        rng = np.random.default_rng(8)
        spec = ModelSpec.build("baseline", "npo", 4, 2)
        ds = random_dataset(spec, rng, m=5, per_row=80)
        res = fit_mle(spec, ds, config=FitConfig(max_iterations=1))
        assert not res.converged
        assert np.isfinite(res.loglik)

    def test_separation_flag_on_divergent_coordinate(self):
        # category 1 never observed when x=1: its intercept walks to -inf
        x = np.array([[0.0], [1.0]])
        y = np.array([[40, 30, 30], [0, 50, 50]])
        ds = Dataset(x, y)
        spec = ds.spec("baseline", "npo")
        res = fit_mle(spec, ds)
        assert res.separation_suspected
        assert np.isfinite(res.loglik)

    def test_config_validation(self):
        with pytest.raises(DataError):
            FitConfig(gradient_tolerance=0.0)
        with pytest.raises(DataError):
            FitConfig(initialization="warmstart")
        cfg = with_config(FitConfig(), max_iterations=7)
        assert cfg.max_iterations == 7

    def test_table4_fit_recovers_generating_structure(self, table4):
        # one realization of 400 draws: recovery is statistical, checked loosely
        spec = table4.spec("baseline", "po")
        fit = fit_mle(spec, table4)
        generating = np.array([-0.8, -0.3, -1.0, 0.5])
        assert fit.converged
        assert np.max(np.abs(fit.theta.to_flat() - generating)) < 0.8
        b1, b2, b3 = (float(b[0]) for b in fit.theta.beta)
        assert b3 < b1 < b2 < 0 < fit.theta.zeta[0]  # ordering of the truth

    def test_cumulative_iterates_stay_feasible(self):
        rng = np.random.default_rng(31)
        spec = ModelSpec.build("cumulative", "po", 4, 1)
        ds = random_dataset(spec, rng, m=4, per_row=100)
        res = fit_mle(spec, ds)
        assert res.feasible
        assert res.margin is not None and res.margin > 0
