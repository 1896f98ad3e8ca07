"""Closed-form contractivity bounds and constants.

``thm1_*`` concern a standard normal base and a kappa-log-concave target;
``thm2_*`` allow a non-Gaussian base with ``kappa0 I <= hess V0 <= eta0 I`` and
require admissible coefficients.  Only ``kappa1`` of the target enters the
second bound (its log-convexity constant plays no role).

Flow bounds follow the Gronwall estimate ``|Df_t| <= exp(+int_0^t lambda_s ds)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DomainError, ParameterError, PreconditionError
from .schedules import Schedule, check_admissible, variance_matched


@dataclass
class BoundCurve:
    times: np.ndarray
    lam: np.ndarray
    flow_bound: np.ndarray
    provenance: str

    def __post_init__(self):
        if not np.all(np.isfinite(self.flow_bound)):
            raise DomainError("flow bound is not finite on the grid; clamp the time range")


def thm1_lambda(schedule: Schedule, t, kappa: float):
    """Upper bound on the eigenvalues of ``Dv_t`` for a Gaussian base.

    ``(kappa alpha alpha_dot + beta beta_dot) / (kappa alpha^2 + beta^2)``.
    """
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    a, b, ad, bd = schedule.eval(t)
    den = kappa * a**2 + b**2
    if np.any(den <= 0):
        raise DomainError(f"kappa alpha^2 + beta^2 vanishes (kappa={kappa}, t={t})")
    return (kappa * a * ad + b * bd) / den


def thm1_flow_bound(schedule: Schedule, t, kappa: float):
    """``sqrt(alpha_t^2 + beta_t^2 / kappa)``."""
    if kappa <= 0:
        raise DomainError("kappa must be > 0")
    a, b, _, _ = schedule.eval(t)
    return np.sqrt(a**2 + b**2 / kappa)


def _require_admissible(schedule: Schedule):
    ok, report = check_admissible(schedule)
    if not ok:
        failed = ", ".join(i.clause for i in report.failures())
        raise PreconditionError(f"schedule {schedule.name!r} is not admissible ({failed})")


def thm2_lambda(schedule: Schedule, t, kappa0: float, eta0: float, kappa1: float, check: bool = True):
    """Bound on ``|Dv_t|_op`` for log-concave, log-convex base and log-concave target."""
    if check:
        _require_admissible(schedule)
    if not kappa0 >= kappa1 >= 0:
        raise PreconditionError(f"need kappa0 >= kappa1 >= 0 (got {kappa0}, {kappa1})")
    if eta0 < kappa0:
        raise PreconditionError(f"need eta0 >= kappa0 (got {eta0}, {kappa0})")
    a, b, ad, bd = schedule.eval(t)
    num = ad * a * kappa1 + bd * b * eta0
    den = np.sqrt(a**2 * kappa1 + b**2 * eta0) * np.sqrt(a**2 * kappa1 + b**2 * kappa0)
    if np.any(den == 0):
        raise DomainError(f"thm2 denominator vanishes at t={t}")
    return num / den


def gronwall_flow_bound(times, lam, t: float | None = None):
    """``exp(int lambda)`` from the first grid time to ``t`` (trapezoid rule).

    With ``t=None`` the running bound on the whole grid is returned.
    """
    times = np.asarray(times, dtype=float)
    lam = np.asarray(lam, dtype=float)
    running = np.exp(cumulative_trapezoid(lam, times, initial=0.0))
    if t is None:
        return running
    if not times[0] <= t <= times[-1] + 1e-15:
        raise DomainError(f"t={t} outside the curve's time range")
    return float(np.interp(t, times, running))


def thm1_curve(schedule: Schedule, kappa: float, times) -> BoundCurve:
    times = np.asarray(times, dtype=float)
    lam = thm1_lambda(schedule, times, kappa)
    return BoundCurve(times, lam, thm1_flow_bound(schedule, times, kappa), "thm1")


def thm2_curve(schedule: Schedule, kappa0: float, eta0: float, kappa1: float, times) -> BoundCurve:
    times = np.asarray(times, dtype=float)
    lam = thm2_lambda(schedule, times, kappa0, eta0, kappa1)
    return BoundCurve(times, lam, gronwall_flow_bound(times, lam), "thm2")


def corollary_constant(kappa0: float, eta0: float, kappa1: float) -> float:
    """``(eta0 / kappa1) ** (sqrt(eta0 / kappa0) / 2)``."""
    if kappa0 <= 0:
        raise DomainError("kappa0 must be > 0")
    if kappa1 <= 0:
        raise DomainError("kappa1 must be > 0")
    if eta0 < kappa0:
        raise DomainError("eta0 must be >= kappa0")
    return (eta0 / kappa1) ** (0.5 * math.sqrt(eta0 / kappa0))


def caffarelli_constant(eta0: float, kappa1: float) -> float:
    """Lipschitz constant ``sqrt(eta0 / kappa1)`` of the optimal transport map."""
    if not 0 < kappa1 <= eta0:
        raise DomainError(f"need 0 < kappa1 <= eta0 (got kappa1={kappa1}, eta0={eta0})")
    return math.sqrt(eta0 / kappa1)


@dataclass
class ScheduleBoundReport:
    kappa: float
    value: float  # sup_t |lambda_t| measured on the grid
    formula: float  # |log kappa| / 2
    log_derivative: float  # |d/dt log(kappa alpha^2 + beta^2)| = |log kappa|
    stated: float  # the constant kappa quoted for this schedule in the literature
    discrepancy: bool
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def suggested_schedule_bound(kappa: float, n_grid: int = 10_001, time_clamp: float = 1e-3) -> ScheduleBoundReport:
    """Uniform drift-Jacobian bound of the variance-matched schedule.

    On that schedule ``kappa alpha^2 + beta^2 = kappa**(1-t)``, so the bound is
    the constant ``|log kappa| / 2``.  The value ``kappa`` sometimes quoted for
    it does not follow from the formula and is reported, not asserted.
    """
    if not kappa > 0:
        raise ParameterError("kappa must be > 0")
    if kappa == 1.0:
        raise ParameterError("kappa = 1 has no variance-matched schedule (use trig)")
    sched = variance_matched(kappa)
    grid = np.linspace(time_clamp, 1.0 - time_clamp, n_grid)
    value = float(np.max(np.abs(thm1_lambda(sched, grid, kappa))))
    formula = 0.5 * abs(math.log(kappa))
    notes = [
        "measured sup|lambda_t| equals |log kappa|/2; the often-quoted value kappa "
        "differs unless kappa happens to satisfy kappa = |log kappa|/2",
        "|d/dt log(kappa alpha^2 + beta^2)| = |log kappa| is twice lambda_t",
    ]
    return ScheduleBoundReport(
        kappa=kappa,
        value=value,
        formula=formula,
        log_derivative=abs(math.log(kappa)),
        stated=kappa,
        discrepancy=not math.isclose(value, kappa, rel_tol=1e-6),
        notes=notes,
    )
