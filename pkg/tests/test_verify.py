import math

import numpy as np
import pytest

from interpflow.bounds import corollary_constant
from interpflow.drift import GaussianDrift
from interpflow.errors import PreconditionError, SymmetryError
from interpflow.measures import (
    GaussianMeasure,
    PotentialDensity,
    gaussian_scaled,
    logcosh1d,
    quartic1d,
    standard_gaussian,
    standard_gaussian_potential,
)
from interpflow.schedules import linear, trig
from interpflow.verify import (
    brascamp_lieb_check_1d,
    estimator_study,
    matrix_lemma_check,
    measure_drift_norms,
    quantile_grid,
    verify_thm1,
    verify_thm2,
)

N1 = standard_gaussian(1)
QUARTER = GaussianMeasure([0.0], [[0.25]])
HALF = GaussianMeasure([0.0], [[0.5]])
WIDE = GaussianMeasure([0.0], [[4.0]])


class _Skewed:
    """A linear field with an antisymmetric part, which no Gaussian-base drift can have."""

    dim = 2
    t_range = (0.0, 1.0)

    def velocity(self, t, x):
        return x @ np.array([[0.0, 1.0], [-1.0, 0.0]]).T

    def jacobian(self, t, x):
        x = np.atleast_2d(x)
        return np.broadcast_to(np.array([[0.0, 1.0], [-1.0, 0.0]]), x.shape[:-1] + (2, 2))


class TestMeasureDriftNorms:
    def test_constant_jacobian(self):
        g = GaussianDrift(N1, QUARTER, linear())
        vals, sym = measure_drift_norms(g, np.linspace(-3, 3, 13)[:, None], [0.5])
        assert vals[0] == pytest.approx(1.2, rel=1e-14)
        assert sym == 0.0

    def test_zero_drift(self):
        vals, _ = measure_drift_norms(GaussianDrift(N1, N1, trig()), np.linspace(-3, 3, 7)[:, None], np.linspace(0, 1, 5))
        np.testing.assert_allclose(vals, 0.0, atol=1e-15)

    def test_callable_grid(self):
        g = GaussianDrift(N1, QUARTER, linear())
        vals, _ = measure_drift_norms(g, lambda t: quantile_grid(N1, QUARTER, linear(), t), [0.25, 0.75])
        assert vals.shape == (2,)

    def test_quantile_grid_covers_four_sigma(self):
        pts = quantile_grid(N1, QUARTER, linear(), 0.5)
        assert pts.shape == (81, 1)
        assert pts.max() == pytest.approx(4 * math.sqrt(0.3125))


class TestVerifyThm1:
    def test_tight_gaussian(self):
        r = verify_thm1(gaussian_scaled(4.0, 1), linear(), n_steps=200)
        assert r.passed
        assert abs(r.df_margin[-1]) <= 1e-3 * 0.5
        np.testing.assert_allclose(r.dv_margin, 0.0, atol=1e-12)

    def test_quartic(self):
        r = verify_thm1(quartic1d(), trig(), t_grid=np.linspace(0.05, 0.95, 7), n_steps=100)
        assert r.passed
        assert r.symmetry_residual <= 1e-8

    def test_loose_kappa_has_positive_margin(self):
        r = verify_thm1(N1, trig(), kappa=0.5, t_grid=np.linspace(0.05, 0.95, 7), n_steps=200)
        assert r.passed
        assert np.all(r.dv_margin[1:] > 0) and r.df_margin[-1] > 0

    def test_asymmetry_is_an_error(self):
        with pytest.raises(SymmetryError):
            verify_thm1(standard_gaussian(2), trig(), backend=_Skewed(), n_steps=20)

    def test_summary_fields(self):
        s = verify_thm1(gaussian_scaled(4.0, 1), linear(), n_steps=100).summary()
        assert s["passed"] and s["endpoint_df"] == pytest.approx(0.5, rel=1e-3)


class TestVerifyThm2:
    def test_logcosh(self):
        r = verify_thm2(HALF, logcosh1d(), trig(), t_grid=np.linspace(0.05, 0.95, 7), n_steps=100)
        assert r.passed
        assert r.df_measured[-1] <= math.sqrt(2) + 1e-3
        assert r.extras["corollary_constant"] == pytest.approx(math.sqrt(2))

    def test_identical_gaussians(self):
        r = verify_thm2(N1, N1, trig(), n_steps=100)
        assert r.passed
        np.testing.assert_allclose(r.dv_measured, 0.0, atol=1e-15)
        np.testing.assert_allclose(r.dv_bound, 0.0, atol=1e-15)

    def test_endpoint_equals_corollary(self):
        r = verify_thm2(N1, WIDE, trig(), n_steps=1000)
        assert r.passed
        bound = corollary_constant(1.0, 1.0, 0.25)
        assert r.df_measured[-1] == pytest.approx(bound, rel=1e-6)
        assert r.df_bound[-1] == pytest.approx(bound, rel=1e-6)

    def test_inadmissible(self):
        with pytest.raises(PreconditionError):
            verify_thm2(N1, QUARTER, linear())

    def test_kappa_order(self):
        with pytest.raises(PreconditionError):
            verify_thm2(WIDE, N1, trig())


class TestBrascampLieb:
    def test_linear_on_gaussian(self):
        r = brascamp_lieb_check_1d(standard_gaussian_potential(1), lambda x: x, lambda x: 1.0)
        assert r.variance == pytest.approx(1.0, abs=1e-10)
        assert r.bound == pytest.approx(1.0, abs=1e-10)

    def test_square_on_gaussian(self):
        r = brascamp_lieb_check_1d(standard_gaussian_potential(1), lambda x: x**2, lambda x: 2 * x)
        assert r.variance == pytest.approx(2.0, abs=1e-8)
        assert r.bound == pytest.approx(4.0, abs=1e-8)

    def test_quartic_strict(self):
        r = brascamp_lieb_check_1d(quartic1d(), lambda x: x, lambda x: 1.0)
        assert r.passed and r.margin > 0

    def test_flat_potential(self):
        p = standard_gaussian_potential(1)
        flat = PotentialDensity(1, p.V, p.grad_V, p.hess_V, kappa=0.0)
        with pytest.raises(PreconditionError):
            brascamp_lieb_check_1d(flat, lambda x: x, lambda x: 1.0)


class TestMatrixLemma:
    def test_commuting_case_holds(self):
        r = matrix_lemma_check(1000, 4, seed=0, commuting=True)
        assert r.passed

    def test_general_case_fails(self):
        # the ordering is not preserved by the congruence in general
        r = matrix_lemma_check(200, 4, seed=0)
        assert not r.passed and r.min_eigenvalue < -1e-6

    def test_explicit_counterexample(self):
        A = np.diag([1.0, 0.0])
        C = np.array([[2.0, 1.0], [1.0, 1.0]])
        assert np.linalg.eigvalsh(C - A).min() >= 0
        gap = C @ C - A @ A
        assert np.linalg.eigvalsh(gap).min() < 0

    def test_identity_gap_is_zero(self):
        eye = np.eye(3)
        assert np.allclose(eye @ eye @ eye - eye @ eye @ eye, 0.0)

    def test_reproducible(self):
        a = matrix_lemma_check(50, 3, seed=7)
        b = matrix_lemma_check(50, 3, seed=7)
        np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)


class TestEstimatorStudy:
    def test_decreasing(self):
        rows = estimator_study(QUARTER, trig(), [100, 1000, 10_000], seeds=range(3), n_eval=2000)
        med = [r.median_error for r in rows]
        assert med[0] > med[1] > med[2]

    def test_standard_target_small_error(self):
        (row,) = estimator_study(N1, trig(), [10_000], seeds=range(3), n_eval=2000)
        assert row.median_error <= 0.1

    @pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-8])
    def test_threshold_sweep_keeps_trend(self, eps):
        rows = estimator_study(QUARTER, trig(), [100, 1000], seeds=range(3), eps=eps, n_eval=2000)
        assert rows[0].median_error > rows[1].median_error
