import math

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from interpflow.bounds import (
    BoundCurve,
    caffarelli_constant,
    corollary_constant,
    gronwall_flow_bound,
    suggested_schedule_bound,
    thm1_curve,
    thm1_flow_bound,
    thm1_lambda,
    thm2_curve,
    thm2_lambda,
)
from interpflow.errors import DomainError, ParameterError, PreconditionError
from interpflow.schedules import linear, ou_reparam, trig, variance_matched

SCHEDULES = [linear(), trig(), variance_matched(4.0), variance_matched(0.25), ou_reparam()]


class TestThm1Lambda:
    def test_linear_midpoint(self):
        assert thm1_lambda(linear(), 0.5, 1.0) == pytest.approx(0.0, abs=1e-15)

    def test_linear_start(self):
        assert thm1_lambda(linear(), 0.0, 1.0) == pytest.approx(-1.0)

    def test_trig_unit_kappa(self):
        np.testing.assert_allclose(thm1_lambda(trig(), np.linspace(0, 1, 11), 1.0), 0.0, atol=1e-15)

    def test_zero_kappa_at_start(self):
        with pytest.raises(DomainError):
            thm1_lambda(linear(), 0.0, 0.0)

    def test_negative_kappa(self):
        with pytest.raises(DomainError):
            thm1_lambda(linear(), 0.5, -1.0)

    @pytest.mark.parametrize("sched", SCHEDULES, ids=lambda s: s.name)
    @pytest.mark.parametrize("kappa", [0.25, 1.0, 4.0])
    def test_half_log_derivative(self, sched, kappa):
        t = np.linspace(0.02, 0.98, 49)
        h = 1e-6

        def log_norm(s):
            a, b, _, _ = sched.eval(s)
            return np.log(kappa * a**2 + b**2)

        fd = 0.5 * (log_norm(t + h) - log_norm(t - h)) / (2 * h)
        np.testing.assert_allclose(thm1_lambda(sched, t, kappa), fd, atol=1e-8)


class TestThm1FlowBound:
    def test_tight_endpoint(self):
        assert thm1_flow_bound(linear(), 1.0, 4.0) == pytest.approx(0.5)

    @pytest.mark.parametrize("kappa", [0.1, 1.0, 7.0])
    def test_start(self, kappa):
        assert thm1_flow_bound(trig(), 0.0, kappa) == pytest.approx(1.0)

    def test_trig_unit_kappa(self):
        np.testing.assert_allclose(thm1_flow_bound(trig(), np.linspace(0, 1, 11), 1.0), 1.0, atol=1e-15)

    def test_nonpositive_kappa(self):
        with pytest.raises(DomainError):
            thm1_flow_bound(trig(), 0.5, 0.0)

    @pytest.mark.parametrize("sched", [linear(), trig()], ids=lambda s: s.name)
    @pytest.mark.parametrize("kappa", [0.25, 4.0])
    def test_exponential_of_integral(self, sched, kappa):
        t = np.linspace(0, 1, 10_000)
        integral = cumulative_trapezoid(thm1_lambda(sched, t, kappa), t, initial=0.0)
        np.testing.assert_allclose(np.exp(integral), thm1_flow_bound(sched, t, kappa), atol=1e-6)


class TestThm2Lambda:
    def test_reduces_to_thm1(self):
        t = np.linspace(0, 1, 101)
        for kappa1 in (0.25, 0.5, 1.0):
            np.testing.assert_allclose(thm2_lambda(trig(), t, 1.0, 1.0, kappa1), thm1_lambda(trig(), t, kappa1), atol=1e-12)

    def test_trig_all_ones(self):
        np.testing.assert_allclose(thm2_lambda(trig(), np.linspace(0, 1, 11), 1, 1, 1), 0.0, atol=1e-15)

    def test_hand_value(self):
        assert thm2_lambda(trig(), 0.5, 2.0, 2.0, 1.0) == pytest.approx(math.pi / 6, rel=1e-14)

    def test_inadmissible(self):
        with pytest.raises(PreconditionError):
            thm2_lambda(linear(), 0.5, 1.0, 1.0, 1.0)

    def test_kappa_order(self):
        with pytest.raises(PreconditionError):
            thm2_lambda(trig(), 0.5, 0.5, 1.0, 1.0)

    def test_eta_below_kappa(self):
        with pytest.raises(PreconditionError):
            thm2_lambda(trig(), 0.5, 2.0, 1.0, 1.0)

    def test_zero_denominator(self):
        with pytest.raises(DomainError):
            thm2_lambda(trig(), 0.0, 1.0, 1.0, 0.0)


class TestGronwall:
    def test_zero_rate(self):
        t = np.linspace(0, 1, 11)
        assert gronwall_flow_bound(t, np.zeros_like(t), 1.0) == 1.0

    def test_matches_thm1(self):
        t = np.linspace(0, 1, 10_001)
        got = gronwall_flow_bound(t, thm1_lambda(linear(), t, 4.0), 1.0)
        assert got == pytest.approx(0.5, abs=1e-6)

    def test_thm2_trivial(self):
        t = np.linspace(0, 1, 101)
        assert gronwall_flow_bound(t, thm2_lambda(trig(), t, 1, 1, 1), 1.0) == pytest.approx(1.0)

    def test_positive_exponent(self):
        t = np.linspace(0, 1, 101)
        assert gronwall_flow_bound(t, np.full_like(t, 2.0), 1.0) == pytest.approx(math.exp(2.0))

    def test_outside_range(self):
        t = np.linspace(0, 0.5, 11)
        with pytest.raises(DomainError):
            gronwall_flow_bound(t, np.zeros_like(t), 0.75)

    @pytest.mark.parametrize("params", [(1, 1, 0.25), (1, 2, 0.5), (2, 2, 1)])
    def test_corollary_dominance(self, params):
        t = np.linspace(0, 1, 10_001)
        lam = thm2_lambda(trig(), t, *params)
        assert gronwall_flow_bound(t, lam, 1.0) <= corollary_constant(*params) + 1e-6


class TestCurves:
    def test_thm1_curve(self):
        t = np.linspace(0, 1, 21)
        c = thm1_curve(linear(), 4.0, t)
        assert c.provenance == "thm1"
        assert c.flow_bound[-1] == pytest.approx(0.5)

    def test_thm2_curve(self):
        t = np.linspace(0, 1, 2001)
        c = thm2_curve(trig(), 1.0, 1.0, 0.25, t)
        assert c.flow_bound[-1] == pytest.approx(2.0, abs=1e-6)

    def test_non_finite_rejected(self):
        with pytest.raises(DomainError):
            BoundCurve(np.zeros(2), np.zeros(2), np.array([1.0, np.inf]), "x")


class TestConstants:
    def test_corollary_gaussian_base(self):
        for k0, k1 in ((1.0, 0.25), (2.0, 0.5), (3.0, 3.0)):
            assert corollary_constant(k0, k0, k1) == pytest.approx(math.sqrt(k0 / k1))
            assert corollary_constant(k0, k0, k1) == pytest.approx(caffarelli_constant(k0, k1))

    def test_corollary_values(self):
        assert corollary_constant(1.0, 1.0, 0.25) == pytest.approx(2.0)
        assert corollary_constant(1.0, 4.0, 1.0) == pytest.approx(4.0)

    @pytest.mark.parametrize("args", [(0.0, 1.0, 1.0), (1.0, 1.0, 0.0), (2.0, 1.0, 1.0)])
    def test_corollary_domain(self, args):
        with pytest.raises(DomainError):
            corollary_constant(*args)

    def test_caffarelli_values(self):
        assert caffarelli_constant(3.0, 3.0) == 1.0
        assert caffarelli_constant(1.0, 0.25) == pytest.approx(2.0)
        assert caffarelli_constant(2.0, 1.0) == pytest.approx(math.sqrt(2.0))

    def test_caffarelli_domain(self):
        with pytest.raises(DomainError):
            caffarelli_constant(1.0, 2.0)


class TestVarianceMatchedBound:
    def test_e_squared(self):
        r = suggested_schedule_bound(math.e**2)
        assert r.value == pytest.approx(1.0, abs=1e-9)

    def test_four(self):
        r = suggested_schedule_bound(4.0)
        assert r.value == pytest.approx(math.log(2.0), abs=1e-6)
        assert r.formula == pytest.approx(math.log(2.0))
        assert r.log_derivative == pytest.approx(math.log(4.0))

    def test_stated_constant_disagrees(self):
        r = suggested_schedule_bound(4.0)
        assert r.stated == 4.0 and r.discrepancy

    def test_limit_near_one(self):
        assert suggested_schedule_bound(1.0 + 1e-6).value < 1e-6

    def test_kappa_one(self):
        with pytest.raises(ParameterError):
            suggested_schedule_bound(1.0)

    @pytest.mark.parametrize("kappa", [0.25, 0.5, 2.0, 9.0])
    def test_constant_in_time(self, kappa):
        t = np.linspace(0.01, 0.99, 99)
        lam = thm1_lambda(variance_matched(kappa), t, kappa)
        np.testing.assert_allclose(np.abs(lam), 0.5 * abs(math.log(kappa)), rtol=1e-10)
