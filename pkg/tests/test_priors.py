"""Tests for the prior distributions."""

import numpy as np
import pytest
from scipy import stats

from triphase.priors import (
    GaussianPrior,
    NonDerivablePriorError,
    RectPrior,
    covariance,
    density,
    gamma_from,
    gaussian_prior,
    pearson,
    prior_information_matrix,
    sample,
)

MU = np.array([1.1, 2.0])


class TestGammaFrom:
    def test_isotropic(self):
        np.testing.assert_allclose(gamma_from(0.25, 0.0), np.diag([0.0625, 0.0625]))

    def test_off_diagonal(self):
        g = gamma_from(0.2, 0.4)
        np.testing.assert_allclose(g[0, 1], 0.016)
        np.testing.assert_allclose(g[1, 0], 0.016)

    def test_round_trip_with_pearson(self):
        for sigma, rho in [(0.3, -0.25), (0.2, 0.4), (1.0, 0.99)]:
            np.testing.assert_allclose(pearson(gamma_from(sigma, rho)), rho, atol=1e-14)

    def test_singular_rejected(self):
        with pytest.raises(ValueError, match="rho"):
            gamma_from(0.2, 1.0)
        with pytest.raises(ValueError, match="rho"):
            gamma_from(0.2, -1.3)
        with pytest.raises(ValueError, match="sigma"):
            gamma_from(0.0, 0.0)


class TestPearson:
    def test_diagonal_zero(self):
        assert pearson(np.diag([2.0, 3.0])) == 0.0

    def test_rank_one_gives_one(self):
        np.testing.assert_allclose(pearson(4.0 * np.ones((2, 2))), 1.0)

    def test_non_positive_diagonal_rejected(self):
        with pytest.raises(ValueError, match="diagonal"):
            pearson(np.array([[0.0, 0.1], [0.1, 1.0]]))


class TestDensity:
    def test_gaussian_peak_value(self):
        prior = gaussian_prior(MU, 0.25, 0.3)
        expected = 1.0 / (2 * np.pi * np.sqrt(np.linalg.det(prior.gamma)))
        np.testing.assert_allclose(density(prior, MU), expected, rtol=1e-12)

    def test_rect_inside_and_outside(self):
        prior = RectPrior(MU, 0.4)
        np.testing.assert_allclose(density(prior, MU), 1 / 0.4**2)
        assert density(prior, MU + [0.4, 0.0]) == 0.0

    def test_gaussian_normalization_quadrature(self):
        prior = gaussian_prior(MU, 0.25, 0.4)
        x, w = np.polynomial.legendre.leggauss(80)
        sig = 0.25
        half = 6 * sig
        xs = MU[0] + half * x
        ys = MU[1] + half * x
        gx, gy = np.meshgrid(xs, ys, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=-1)
        wts = np.outer(w * half, w * half).ravel()
        total = np.sum(wts * density(prior, pts))
        np.testing.assert_allclose(total, 1.0, atol=1e-6)

    def test_rect_normalization_exact(self):
        prior = RectPrior(MU, 0.6)
        # Density is constant on the support; exact integral is delta^2 * (1/delta^2).
        np.testing.assert_allclose(prior.delta**2 * density(prior, MU), 1.0)

    def test_vectorized_shapes(self):
        prior = gaussian_prior(MU, 0.2, 0.0)
        pts = np.zeros((7, 2))
        assert np.asarray(density(prior, pts)).shape == (7,)


class TestSample:
    def test_rect_support(self):
        prior = RectPrior(MU, 0.4)
        draws = sample(prior, np.random.default_rng(3), size=5000)
        assert np.all(np.abs(draws - MU) <= 0.2)

    def test_gaussian_clt_mean(self):
        prior = gaussian_prior(MU, 0.25, 0.0)
        draws = sample(prior, np.random.default_rng(4), size=100_000)
        tol = 4 * 0.25 / np.sqrt(100_000)
        assert np.all(np.abs(draws.mean(axis=0) - MU) < tol)

    def test_seed_reproducibility(self):
        prior = gaussian_prior(MU, 0.25, 0.3)
        a = sample(prior, np.random.default_rng(5), size=10)
        b = sample(prior, np.random.default_rng(5), size=10)
        np.testing.assert_array_equal(a, b)

    @pytest.mark.parametrize("family", ["gaussian", "rect"])
    def test_marginals_pass_ks(self, family):
        """Sample/density consistency: one-sample KS per marginal, alpha = 1e-3."""
        rng = np.random.default_rng(6)
        if family == "gaussian":
            prior = gaussian_prior(MU, 0.25, 0.4)
            draws = sample(prior, rng, size=10_000)
            for j in range(2):
                res = stats.kstest(draws[:, j], stats.norm(MU[j], 0.25).cdf)
                assert res.pvalue > 1e-3
        else:
            prior = RectPrior(MU, 0.6)
            draws = sample(prior, rng, size=10_000)
            for j in range(2):
                res = stats.kstest(draws[:, j], stats.uniform(MU[j] - 0.3, 0.6).cdf)
                assert res.pvalue > 1e-3


class TestPriorInformationMatrix:
    def test_isotropic_analytic(self):
        prior = gaussian_prior(MU, 0.25, 0.0)
        np.testing.assert_allclose(prior_information_matrix(prior), np.diag([16.0, 16.0]))

    def test_equals_inverse_covariance(self):
        prior = gaussian_prior(MU, 0.3, -0.25)
        info = prior_information_matrix(prior)
        np.testing.assert_allclose(info, np.linalg.inv(prior.gamma), atol=1e-10)
        assert np.linalg.eigvalsh(info).min() > 0

    def test_quadrature_agrees_with_analytic(self):
        """Adaptive-quadrature oracle for the information integral."""
        prior = gaussian_prior(MU, 0.2, 0.4)
        analytic = prior_information_matrix(prior)
        quadrature = prior_information_matrix(prior, method="quadrature")
        np.testing.assert_allclose(quadrature, analytic, rtol=1e-3)

    def test_rect_prior_rejected(self):
        with pytest.raises(NonDerivablePriorError):
            prior_information_matrix(RectPrior(MU, 0.6))

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError, match="method"):
            prior_information_matrix(gaussian_prior(MU, 0.2, 0.0), method="nope")


class TestValidation:
    def test_gamma_must_be_spd(self):
        with pytest.raises(ValueError, match="positive definite"):
            GaussianPrior(MU, np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(ValueError, match="symmetric"):
            GaussianPrior(MU, np.array([[1.0, 0.5], [0.1, 1.0]]))

    def test_rect_delta_positive(self):
        with pytest.raises(ValueError, match="delta"):
            RectPrior(MU, -0.1)

    def test_covariance_helper(self):
        np.testing.assert_allclose(covariance(RectPrior(MU, 0.6)),
                                   (0.36 / 12) * np.eye(2))
        g = gamma_from(0.25, 0.2)
        np.testing.assert_allclose(covariance(GaussianPrior(MU, g)), g)
