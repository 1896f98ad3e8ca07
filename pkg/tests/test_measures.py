import math

import numpy as np
import pytest
from scipy import integrate

from interpflow.errors import ParameterError, SamplerError, UnsupportedCaseError
from interpflow.measures import (
    GaussianMeasure,
    PotentialDensity,
    gaussian_interpolant_marginal,
    gaussian_ot_map,
    gaussian_scaled,
    logcosh1d,
    logconcavity_check,
    quartic1d,
    sample,
    standard_gaussian,
    standard_gaussian_potential,
    to_potential,
)
from interpflow.schedules import linear, trig

SHIPPED = [standard_gaussian_potential(1), standard_gaussian_potential(2), gaussian_scaled(4.0, 2), quartic1d(), logcosh1d()]


def _moment_1d(V, power):
    """E[x^power] under exp(-V) by adaptive quadrature (independent of the sampler)."""
    # the densities here are negligible beyond |x| = 12
    z = integrate.quad(lambda x: math.exp(-V(x)), -12, 12, epsabs=1e-13)[0]
    return integrate.quad(lambda x: x**power * math.exp(-V(x)), -12, 12, epsabs=1e-13)[0] / z


def _separable_2d():
    """V(x) = |x|^2 / 2 + sum_i log cosh x_i: kappa = 1, eta = 2, non-Gaussian."""

    def V(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x**2, axis=-1) + np.sum(np.log(np.cosh(x)), axis=-1)

    def grad_V(x):
        x = np.asarray(x, dtype=float)
        return x + np.tanh(x)

    def hess_V(x):
        x = np.asarray(x, dtype=float)
        d = 1.0 + 1.0 / np.cosh(x) ** 2
        return d[..., :, None] * np.eye(2)

    return PotentialDensity(2, V, grad_V, hess_V, kappa=1.0, eta=2.0, name="sep2d")


class TestGaussianMeasure:
    def test_rejects_asymmetric(self):
        with pytest.raises(ParameterError):
            GaussianMeasure([0, 0], [[1, 0.5], [0, 1]])

    def test_rejects_indefinite(self):
        with pytest.raises(ParameterError):
            GaussianMeasure([0, 0], [[1, 2], [2, 1]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ParameterError):
            GaussianMeasure([0], np.eye(2))

    def test_potential_bounds(self):
        p = GaussianMeasure([0, 0], np.diag([4.0, 0.5])).as_potential()
        assert p.kappa == pytest.approx(0.25)
        assert p.eta == pytest.approx(2.0)


class TestDerivativeConsistency:
    @pytest.mark.parametrize("mu", SHIPPED, ids=lambda m: f"{m.name}-{m.dim}")
    def test_gradient_and_hessian(self, mu):
        rng = np.random.default_rng(3)
        pts = rng.uniform(-3, 3, size=(51, mu.dim))
        h = 1e-5
        eye = np.eye(mu.dim)
        fd_grad = np.stack([(mu.V(pts + h * e) - mu.V(pts - h * e)) / (2 * h) for e in eye], axis=-1)
        np.testing.assert_allclose(mu.grad_V(pts), fd_grad, atol=1e-5)
        fd_hess = np.stack([(mu.grad_V(pts + h * e) - mu.grad_V(pts - h * e)) / (2 * h) for e in eye], axis=-1)
        np.testing.assert_allclose(mu.hess_V(pts), fd_hess, atol=1e-4)

    @pytest.mark.parametrize("mu", SHIPPED, ids=lambda m: f"{m.name}-{m.dim}")
    def test_declared_bounds(self, mu):
        pts = np.random.default_rng(4).uniform(-6, 6, size=(51, mu.dim))
        assert logconcavity_check(mu, pts).passed


class TestLogConcavity:
    def test_standard_gaussian(self):
        r = logconcavity_check(standard_gaussian_potential(2), np.random.default_rng(0).normal(size=(10, 2)))
        assert r.passed
        assert r.min_eig == pytest.approx(1.0) and r.max_eig == pytest.approx(1.0)

    def test_quartic(self):
        r = logconcavity_check(quartic1d(), np.linspace(-4, 4, 81))
        assert r.passed
        assert r.min_eig == pytest.approx(1.0)
        assert r.argmin[0] == pytest.approx(0.0)
        assert r.max_eig == pytest.approx(49.0)

    def test_logcosh(self):
        r = logconcavity_check(logcosh1d(), np.linspace(-6, 6, 121))
        assert r.passed
        assert r.max_eig == pytest.approx(2.0)
        assert r.min_eig == pytest.approx(1.0, abs=1e-4)

    def test_overstated_kappa_fails(self):
        p = quartic1d()
        bad = PotentialDensity(1, p.V, p.grad_V, p.hess_V, kappa=2.0)
        assert not logconcavity_check(bad, np.linspace(-1, 1, 11)).passed


class TestSampling:
    def test_gaussian_mean(self):
        s = sample(standard_gaussian(2), 100_000, seed=1)
        assert np.all(np.abs(s.points.mean(axis=0)) <= 3 * math.sqrt(1e-5))

    def test_inverse_cdf_variance(self):
        p = standard_gaussian(1).as_potential()
        # strip the Gaussian tag so the numerical 1D route is used
        q = PotentialDensity(1, p.V, p.grad_V, p.hess_V, kappa=1.0, eta=1.0, mode=np.zeros(1))
        s = sample(q, 100_000, seed=2)
        assert s.points.var() == pytest.approx(1.0, rel=0.02)

    def test_single_point(self):
        s = sample(quartic1d(), 1, seed=0)
        assert s.points.shape == (1, 1) and np.all(np.isfinite(s.points))

    def test_quartic_second_moment(self):
        n = 50_000
        x = sample(quartic1d(), n, seed=5).points[:, 0]
        m2 = _moment_1d(lambda x: 0.5 * x**2 + 0.25 * x**4, 2)
        m4 = _moment_1d(lambda x: 0.5 * x**2 + 0.25 * x**4, 4)
        se = math.sqrt((m4 - m2**2) / n)
        assert abs(np.mean(x**2) - m2) <= 3 * se

    def test_rejection_2d(self):
        n = 20_000
        x = sample(_separable_2d(), n, seed=6).points
        m2 = _moment_1d(lambda x: 0.5 * x**2 + math.log(math.cosh(x)), 2)
        m4 = _moment_1d(lambda x: 0.5 * x**2 + math.log(math.cosh(x)), 4)
        se = math.sqrt((m4 - m2**2) / n)
        np.testing.assert_array_less(np.abs(np.mean(x**2, axis=0) - m2), 3 * se)
        np.testing.assert_array_less(np.abs(x.mean(axis=0)), 3 * math.sqrt(m2 / n))

    def test_reproducible(self):
        a = sample(quartic1d(), 100, seed=9).points
        b = sample(quartic1d(), 100, seed=9).points
        np.testing.assert_array_equal(a, b)

    def test_low_acceptance_raises(self):
        # declared kappa far below the true curvature makes the proposal far too wide
        def V(x):
            return 50.0 * np.sum(np.asarray(x) ** 2, axis=-1)

        def grad_V(x):
            return 100.0 * np.asarray(x)

        def hess_V(x):
            x = np.asarray(x)
            return np.broadcast_to(100.0 * np.eye(5), x.shape[:-1] + (5, 5))

        mu = PotentialDensity(5, V, grad_V, hess_V, kappa=0.01, mode=np.zeros(5))
        with pytest.raises(SamplerError):
            sample(mu, 10, seed=0)

    def test_bad_n(self):
        with pytest.raises(ParameterError):
            sample(standard_gaussian(1), 0, seed=0)


class TestGaussianOT:
    def test_scalar_case(self):
        T = gaussian_ot_map(standard_gaussian(2), GaussianMeasure(np.zeros(2), np.eye(2) / 4))
        np.testing.assert_allclose(T.A, 0.5 * np.eye(2), atol=1e-15)
        np.testing.assert_allclose(T.b, 0.0, atol=1e-15)

    def test_diverging_lipschitz_example(self):
        kappa = 0.25
        mu0 = GaussianMeasure(np.zeros(2), np.diag([1 / kappa, 1.0]))
        mu1 = GaussianMeasure(np.zeros(2), np.diag([1.0, 1 / kappa]))
        T = gaussian_ot_map(mu0, mu1)
        np.testing.assert_allclose(T.A, np.diag([0.5, 2.0]), atol=1e-14)
        assert T.lipschitz == pytest.approx(2.0)

    def test_identity(self):
        g = GaussianMeasure([1.0, -2.0], [[2.0, 0.3], [0.3, 1.0]])
        T = gaussian_ot_map(g, g)
        np.testing.assert_allclose(T.A, np.eye(2), atol=1e-13)
        np.testing.assert_allclose(T.b, 0.0, atol=1e-13)

    def test_non_commuting(self):
        with pytest.raises(UnsupportedCaseError):
            gaussian_ot_map(GaussianMeasure([0, 0], np.diag([1.0, 2.0])), GaussianMeasure([0, 0], [[2.0, 0.5], [0.5, 1.0]]))

    def test_pushforward_moments(self):
        mu0 = GaussianMeasure([0.0, 0.0], np.diag([1.0, 2.0]))
        mu1 = GaussianMeasure([1.0, -1.0], np.diag([3.0, 0.5]))
        n = 10_000
        y = gaussian_ot_map(mu0, mu1)(sample(mu0, n, seed=11).points)
        se_mean = np.sqrt(np.diag(mu1.cov) / n)
        np.testing.assert_array_less(np.abs(y.mean(axis=0) - mu1.mean), 3 * se_mean)
        se_var = np.sqrt(2 * np.diag(mu1.cov) ** 2 / n)
        np.testing.assert_array_less(np.abs(y.var(axis=0) - np.diag(mu1.cov)), 3 * se_var)


class TestInterpolantMarginal:
    def test_endpoints(self):
        mu0 = GaussianMeasure([1.0], [[2.0]])
        mu1 = GaussianMeasure([-1.0], [[0.5]])
        for t, ref in ((0.0, mu0), (1.0, mu1)):
            g = gaussian_interpolant_marginal(mu0, mu1, trig(), t)
            np.testing.assert_allclose(g.mean, ref.mean, atol=1e-15)
            np.testing.assert_allclose(g.cov, ref.cov, atol=1e-15)

    def test_linear_midpoint(self):
        g = gaussian_interpolant_marginal(standard_gaussian(1), GaussianMeasure([0.0], [[0.25]]), linear(), 0.5)
        assert g.cov[0, 0] == pytest.approx(0.3125)

    @pytest.mark.parametrize("t", [0.25, 0.5, 0.75])
    def test_empirical_law(self, t):
        mu0 = GaussianMeasure([0.0, 1.0], np.diag([1.0, 2.0]))
        mu1 = GaussianMeasure([2.0, -1.0], np.diag([0.5, 3.0]))
        n = 10_000
        a, b, _, _ = trig().eval(t)
        x = a * sample(mu0, n, seed=21).points + b * sample(mu1, n, seed=22).points
        g = gaussian_interpolant_marginal(mu0, mu1, trig(), t)
        var = np.diag(g.cov)
        np.testing.assert_array_less(np.abs(x.mean(axis=0) - g.mean), 3 * np.sqrt(var / n))
        np.testing.assert_array_less(np.abs(x.var(axis=0) - var), 3 * np.sqrt(2 * var**2 / n))


def test_to_potential_rejects_junk():
    with pytest.raises(ParameterError):
        to_potential("quartic1d")
