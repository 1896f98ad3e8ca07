"""Interpolation coefficient pairs ``(alpha_t, beta_t)``.

An isotropic linear interpolant is ``X_t = alpha_t X_0 + beta_t X_1`` with
``alpha_0 = beta_1 = 1`` and ``alpha_1 = beta_0 = 0``.  A :class:`Schedule`
bundles the two coefficient functions together with their analytic time
derivatives.  All callables are vectorised over numpy arrays of times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, ParameterError

ScalarFn = Callable[[np.ndarray], np.ndarray]

ENDPOINT_TOL = 1e-12
DERIVATIVE_TOL = 1e-6
ADMISSIBLE_TOL = 1e-10
DEFAULT_TIME_CLAMP = 1e-3


def _as_time(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


@dataclass(frozen=True, eq=False)
class Schedule:
    """Coefficient pair with analytic derivatives.

    Attributes
    ----------
    alpha, beta : callable
        Coefficient functions on ``[0, 1]``.
    alpha_dot, beta_dot : callable
        Their time derivatives.  May be infinite at an endpoint (for instance
        ``beta_dot(0)`` for the variance-matched family) but must be finite on
        the open interval.
    name : str
        Label used in reports and CLI output.
    """

    alpha: ScalarFn
    beta: ScalarFn
    alpha_dot: ScalarFn
    beta_dot: ScalarFn
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def eval(self, t):
        """Return ``(alpha, beta, alpha_dot, beta_dot)`` at ``t``.

        Raises
        ------
        DomainError
            If any time lies outside ``[0, 1]``.
        """
        t = _as_time(t)
        if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
            raise DomainError(f"time {t} outside [0, 1]")
        return self._raw(t)

    def _raw(self, t: np.ndarray):
        out = []
        for fn in (self.alpha, self.beta, self.alpha_dot, self.beta_dot):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                val = np.broadcast_to(np.asarray(fn(t), dtype=float), t.shape)
            out.append(val[()] if t.ndim == 0 else np.array(val))
        return tuple(out)

    def __call__(self, t):
        return self.eval(t)

    def __repr__(self) -> str:
        return f"Schedule({self.name!r})"


def eval_schedule(schedule: Schedule, t):
    """Functional alias of :meth:`Schedule.eval`."""
    return schedule.eval(t)


# ---------------------------------------------------------------------------
# Validation


@dataclass
class CheckItem:
    clause: str
    passed: bool
    residual: float


@dataclass
class ValidationReport:
    items: list[CheckItem]

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    def failures(self) -> list[CheckItem]:
        return [item for item in self.items if not item.passed]

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "items": [
                {"clause": i.clause, "passed": i.passed, "residual": i.residual}
                for i in self.items
            ],
        }


def check_endpoints(schedule: Schedule, grid_size: int = 101) -> ValidationReport:
    """Check endpoint values and interior positivity.

    Failures are collected into the report rather than raised.
    """
    a0, b0, _, _ = schedule._raw(np.asarray(0.0))
    a1, b1, _, _ = schedule._raw(np.asarray(1.0))
    items = [
        CheckItem("alpha(0)=1", abs(a0 - 1.0) <= ENDPOINT_TOL, float(abs(a0 - 1.0))),
        CheckItem("beta(0)=0", abs(b0) <= ENDPOINT_TOL, float(abs(b0))),
        CheckItem("alpha(1)=0", abs(a1) <= ENDPOINT_TOL, float(abs(a1))),
        CheckItem("beta(1)=1", abs(b1 - 1.0) <= ENDPOINT_TOL, float(abs(b1 - 1.0))),
    ]
    interior = np.linspace(0.0, 1.0, grid_size)[1:-1]
    a, b, _, _ = schedule._raw(interior)
    worst_a = float(np.min(a)) if a.size else 1.0
    worst_b = float(np.min(b)) if b.size else 1.0
    items.append(CheckItem("alpha(t)>0 on (0,1)", worst_a > 0.0, worst_a))
    items.append(CheckItem("beta(t)>0 on (0,1)", worst_b > 0.0, worst_b))
    return ValidationReport(items)


def _finite_difference(fn: ScalarFn, t: np.ndarray, h: float) -> np.ndarray:
    # second-order one-sided stencils at the ends of [0, 1]
    out = np.empty_like(t)
    lo = t - h < 0.0
    hi = t + h > 1.0
    mid = ~(lo | hi)
    out[mid] = (fn(t[mid] + h) - fn(t[mid] - h)) / (2 * h)
    tl = t[lo]
    out[lo] = (-3 * fn(tl) + 4 * fn(tl + h) - fn(tl + 2 * h)) / (2 * h)
    th = t[hi]
    out[hi] = (3 * fn(th) - 4 * fn(th - h) + fn(th - 2 * h)) / (2 * h)
    return out


def check_derivatives(
    schedule: Schedule, grid_size: int = 101, h: float = 1e-6
) -> ValidationReport:
    """Compare the analytic derivatives against finite differences.

    Grid points where the analytic derivative is infinite (endpoint
    singularities of square-root schedules) are skipped.
    """
    t = np.linspace(0.0, 1.0, grid_size)
    items = []
    for label, fn, dfn in (
        ("alpha_dot", schedule.alpha, schedule.alpha_dot),
        ("beta_dot", schedule.beta, schedule.beta_dot),
    ):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            exact = np.broadcast_to(np.asarray(dfn(t), dtype=float), t.shape)
            mask = np.isfinite(exact)
            # stay clear of an endpoint singularity when differencing
            if not mask[0]:
                mask[1] = False
            if not mask[-1]:
                mask[-2] = False

            def wrapped(s, fn=fn):
                return np.broadcast_to(np.asarray(fn(s), dtype=float), np.shape(s))

            fd = _finite_difference(wrapped, t[mask], h)
        resid = float(np.max(np.abs(fd - exact[mask]))) if mask.any() else 0.0
        items.append(CheckItem(f"{label} matches finite differences", resid <= DERIVATIVE_TOL, resid))
    return ValidationReport(items)


def check_admissible(schedule: Schedule, grid_size: int = 101):
    """Return ``(ok, report)`` for the admissibility conditions.

    Admissible means ``alpha`` strictly decreasing (``alpha_dot < 0`` at every
    interior grid point) and ``alpha^2 + beta^2 = 1`` on the whole grid.
    """
    if grid_size < 2:
        raise ParameterError("grid_size must be >= 2")
    t = np.linspace(0.0, 1.0, grid_size)
    a, b, ad, _ = schedule._raw(t)
    interior = ad[1:-1]
    worst_slope = float(np.max(interior)) if interior.size else -1.0
    norm_resid = float(np.max(np.abs(a**2 + b**2 - 1.0)))
    report = ValidationReport(
        [
            CheckItem("alpha strictly decreasing", worst_slope < 0.0, worst_slope),
            CheckItem("alpha^2+beta^2=1", norm_resid <= ADMISSIBLE_TOL, norm_resid),
        ]
    )
    return report.passed, report


# ---------------------------------------------------------------------------
# Built-in families


def linear() -> Schedule:
    return Schedule(
        alpha=lambda t: 1.0 - t,
        beta=lambda t: t,
        alpha_dot=lambda t: -np.ones_like(t),
        beta_dot=lambda t: np.ones_like(t),
        name="linear",
    )


def trig() -> Schedule:
    half_pi = 0.5 * math.pi
    return Schedule(
        alpha=lambda t: np.cos(half_pi * t),
        beta=lambda t: np.sin(half_pi * t),
        alpha_dot=lambda t: -half_pi * np.sin(half_pi * t),
        beta_dot=lambda t: half_pi * np.cos(half_pi * t),
        name="trig",
    )


def variance_matched(kappa: float) -> Schedule:
    """Schedule with ``kappa*alpha^2 + beta^2 = kappa**(1-t)`` and ``alpha^2 + beta^2 = 1``.

    Solving the two constraints gives ``alpha^2 = (kappa**(1-t) - 1)/(kappa - 1)``.
    The derivatives blow up like ``1/sqrt`` at the endpoints where a coefficient
    vanishes.
    """
    kappa = float(kappa)
    if not kappa > 0.0 or kappa == 1.0:
        raise ParameterError(
            f"variance_matched needs kappa > 0 and kappa != 1 (got {kappa}); use trig for kappa = 1"
        )
    log_k = math.log(kappa)
    denom = kappa - 1.0

    def a2(t):
        return np.clip((kappa ** (1.0 - t) - 1.0) / denom, 0.0, 1.0)

    def da2(t):
        return -log_k * kappa ** (1.0 - t) / denom

    def alpha(t):
        return np.sqrt(a2(t))

    def beta(t):
        return np.sqrt(1.0 - a2(t))

    def alpha_dot(t):
        return da2(t) / (2.0 * alpha(t))

    def beta_dot(t):
        return -da2(t) / (2.0 * beta(t))

    return Schedule(alpha, beta, alpha_dot, beta_dot, name=f"vm:{kappa:g}", params={"kappa": kappa})


def ou_reparam(time_clamp: float = DEFAULT_TIME_CLAMP) -> Schedule:
    """Ornstein-Uhlenbeck coefficients ``(exp(-tau), sqrt(1 - exp(-2 tau)))``.

    Uses ``tau(t) = t / (1 - t)``; times above ``1 - time_clamp`` are held at the
    clamp, where ``exp(-tau)`` already underflows to zero.
    """
    if not 0.0 < time_clamp < 0.5:
        raise ParameterError("time_clamp must lie in (0, 0.5)")
    t_max = 1.0 - time_clamp

    def tau(t):
        s = np.minimum(t, t_max)
        return s / (1.0 - s)

    def dtau(t):
        s = np.minimum(t, t_max)
        return np.where(t > t_max, 0.0, 1.0 / (1.0 - s) ** 2)

    def alpha(t):
        return np.exp(-tau(t))

    def beta(t):
        return np.sqrt(-np.expm1(-2.0 * tau(t)))

    def alpha_dot(t):
        return -dtau(t) * np.exp(-tau(t))

    def beta_dot(t):
        return dtau(t) * np.exp(-2.0 * tau(t)) / beta(t)

    return Schedule(alpha, beta, alpha_dot, beta_dot, name="ou", params={"time_clamp": time_clamp})


def from_expressions(alpha_expr: str, beta_expr: str, name: str = "custom") -> Schedule:
    """Build a schedule from symbolic expressions in ``t`` (derivatives via sympy)."""
    import sympy

    t = sympy.Symbol("t", real=True)
    try:
        a = sympy.sympify(alpha_expr, locals={"t": t})
        b = sympy.sympify(beta_expr, locals={"t": t})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ParameterError(f"cannot parse schedule expression: {exc}") from exc
    fns = [sympy.lambdify(t, e, modules="numpy") for e in (a, b, sympy.diff(a, t), sympy.diff(b, t))]
    return Schedule(*fns, name=name, params={"alpha": alpha_expr, "beta": beta_expr})


def make_builtin(kind: str, kappa: float | None = None, time_clamp: float = DEFAULT_TIME_CLAMP) -> Schedule:
    """Construct a built-in schedule by name.

    ``kind`` is one of ``linear``, ``trig``, ``ou`` / ``ou_reparam``,
    ``variance_matched`` (needs ``kappa``) or the compact ``vm:<kappa>``.
    """
    if kind.startswith("vm:"):
        try:
            kappa = float(kind[3:])
        except ValueError as exc:
            raise ParameterError(f"bad variance-matched spec {kind!r}") from exc
        kind = "variance_matched"
    if kind == "linear":
        return linear()
    if kind == "trig":
        return trig()
    if kind in ("ou", "ou_reparam"):
        return ou_reparam(time_clamp)
    if kind == "variance_matched":
        if kappa is None:
            raise ParameterError("variance_matched requires kappa")
        return variance_matched(kappa)
    raise ParameterError(f"unknown schedule kind {kind!r}")
