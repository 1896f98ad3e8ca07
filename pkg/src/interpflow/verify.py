"""Numerical checks of the contractivity bounds and of the inequalities behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import bounds
from .drift import EmpiricalDrift, GaussianDrift, QuadratureConfig, QuadratureDrift
from .errors import ParameterError, PreconditionError, SymmetryError
from .flow import integrate_flow
from .measures import (
    GaussianMeasure,
    PotentialDensity,
    as_gaussian,
    sample,
    standard_gaussian,
    to_potential,
)
from .schedules import Schedule, check_admissible

SYMMETRY_TOL = 1e-8
TOL_CLOSED_FORM = 1e-6
TOL_QUADRATURE = 1e-4
_GRONWALL_REFINE = 32


@dataclass
class BoundReport:
    """Measured quantities next to their bounds.

    ``dv_*`` arrays live on ``times``; ``df_*`` arrays live on ``flow_times``.
    A margin is ``bound - measured``; the report passes iff the worst margin is
    at least ``-tol``.
    """

    name: str
    times: np.ndarray
    dv_measured: np.ndarray
    dv_bound: np.ndarray
    flow_times: np.ndarray
    df_measured: np.ndarray
    df_bound: np.ndarray
    tol: float
    symmetry_residual: float = 0.0
    extras: dict = field(default_factory=dict)

    @property
    def dv_margin(self) -> np.ndarray:
        return self.dv_bound - self.dv_measured

    @property
    def df_margin(self) -> np.ndarray:
        return self.df_bound - self.df_measured

    @property
    def worst_margin(self) -> float:
        parts = [m for m in (self.dv_margin, self.df_margin) if m.size]
        return float(min(np.min(m) for m in parts))

    @property
    def passed(self) -> bool:
        return self.worst_margin >= -self.tol

    def curve_rows(self) -> list[dict]:
        """Per-time rows aligned on ``times``; flow quantities interpolated onto it."""
        dfm = np.interp(self.times, self.flow_times, self.df_measured) if self.df_measured.size else np.full(self.times.shape, np.nan)
        dfb = np.interp(self.times, self.flow_times, self.df_bound) if self.df_bound.size else np.full(self.times.shape, np.nan)
        return [
            {
                "t": float(t),
                "lambda": float(lb),
                "flow_bound": float(fb),
                "measured_dv": float(mv),
                "measured_df": float(mf),
                "margin": float(min(lb - mv, fb - mf) if np.isfinite(mf) else lb - mv),
            }
            for t, lb, fb, mv, mf in zip(self.times, self.dv_bound, dfb, self.dv_measured, dfm)
        ]

    def summary(self) -> dict:
        out = {
            "name": self.name,
            "passed": self.passed,
            "tol": self.tol,
            "worst_margin": self.worst_margin,
            "worst_dv_margin": float(np.min(self.dv_margin)),
            "worst_df_margin": float(np.min(self.df_margin)) if self.df_margin.size else None,
            "symmetry_residual": self.symmetry_residual,
        }
        if self.df_margin.size:
            out["endpoint_t"] = float(self.flow_times[-1])
            out["endpoint_df"] = float(self.df_measured[-1])
            out["endpoint_df_bound"] = float(self.df_bound[-1])
            out["endpoint_margin"] = float(self.df_margin[-1])
        out.update(self.extras)
        return out


# ---------------------------------------------------------------------------
# Grids


def _proxy_moments(mu) -> tuple[np.ndarray, np.ndarray]:
    g = as_gaussian(mu)
    if g is not None:
        return g.mean, np.diag(g.cov)
    p = to_potential(mu)
    mode = p.argmin
    hess = np.asarray(p.hess_V(mode), dtype=float).reshape(p.dim, p.dim)
    return mode, np.diag(np.linalg.inv(hess))


def quantile_grid(mu0, mu1, schedule: Schedule, t: float, n_points: int | None = None, width: float = 4.0) -> np.ndarray:
    """Grid covering ``mean +- width * std`` of a Gaussian proxy of ``mu_t``.

    81 points in 1D and a 21 x 21 tensor grid in 2D by default.
    """
    m0, v0 = _proxy_moments(mu0)
    m1, v1 = _proxy_moments(mu1)
    a, b, _, _ = schedule.eval(t)
    mean = a * m0 + b * m1
    std = np.sqrt(a**2 * v0 + b**2 * v1)
    d = mean.size
    if n_points is None:
        n_points = 81 if d == 1 else 21 if d == 2 else 9
    axes = [np.linspace(mean[i] - width * std[i], mean[i] + width * std[i], n_points) for i in range(d)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=-1)


def measure_drift_norms(backend, x_grid, t_grid, reduce: str = "op_norm"):
    """Per-time maximum over ``x_grid`` of ``|Dv_t(x)|_op`` (or the top eigenvalue).

    ``x_grid`` is an array ``(n, d)`` or a callable ``t -> array``.
    Returns ``(values, symmetry_residual)``.
    """
    t_grid = np.atleast_1d(np.asarray(t_grid, dtype=float))
    if t_grid.size == 0:
        raise ParameterError("t_grid must be non-empty")
    values = np.empty(t_grid.size)
    sym = 0.0
    for i, t in enumerate(t_grid):
        xs = x_grid(t) if callable(x_grid) else np.asarray(x_grid, dtype=float)
        if xs.size == 0:
            raise ParameterError("x_grid must be non-empty")
        jac = backend.jacobian(t, xs)
        sym = max(sym, float(np.max(np.abs(jac - np.swapaxes(jac, -1, -2)))))
        if reduce == "op_norm":
            values[i] = np.max(np.linalg.norm(jac, ord=2, axis=(-2, -1)))
        elif reduce == "max_eig":
            values[i] = np.max(np.linalg.eigvalsh(0.5 * (jac + np.swapaxes(jac, -1, -2))))
        else:
            raise ParameterError(f"unknown reduction {reduce!r}")
    return values, sym


def _default_backend(mu0, mu1, schedule, quad):
    g0, g1 = as_gaussian(mu0), as_gaussian(mu1)
    if g0 is not None and g1 is not None:
        return GaussianDrift(g0, g1, schedule)
    return QuadratureDrift(mu0, mu1, schedule, quad)


def _flow_norms(backend, x0, n_steps):
    res = integrate_flow(backend, x0, n_steps=n_steps, with_jacobian=True)
    norms = res.op_norms.reshape(res.times.size, -1)
    return res.times, norms.max(axis=1), res


def _subsample(grid: np.ndarray, k: int) -> np.ndarray:
    if grid.shape[0] <= k:
        return grid
    idx = np.unique(np.linspace(0, grid.shape[0] - 1, k).round().astype(int))
    return grid[idx]


# ---------------------------------------------------------------------------
# Theorem-level checks


def verify_thm1(
    mu1,
    schedule: Schedule,
    kappa: float | None = None,
    t_grid=None,
    x_grid=None,
    x0=None,
    n_steps: int = 1000,
    tol: float | None = None,
    quad: QuadratureConfig | None = None,
    backend=None,
) -> BoundReport:
    """Check the Gaussian-base bounds against measured Jacobians.

    (a) ``Dv_t`` symmetric -- a violation raises :class:`SymmetryError`;
    (b) top eigenvalue of ``Dv_t`` at most ``thm1_lambda``;
    (c) flow Jacobian norm at most ``thm1_flow_bound``, normalised by its value
        at the first integration time when the backend starts after ``t = 0``.
    """
    p1 = to_potential(mu1)
    kappa = p1.kappa if kappa is None else float(kappa)
    mu0 = standard_gaussian(p1.dim)
    if backend is None:
        backend = _default_backend(mu0, mu1, schedule, quad)
    closed = isinstance(backend, GaussianDrift)
    if tol is None:
        tol = TOL_CLOSED_FORM if closed else TOL_QUADRATURE
    lo, hi = backend.t_range
    t_grid = np.linspace(lo, hi, 21) if t_grid is None else np.asarray(t_grid, dtype=float)
    if x_grid is None:
        def x_grid(t):
            return quantile_grid(mu0, mu1, schedule, t)

    top, sym = measure_drift_norms(backend, x_grid, t_grid, reduce="max_eig")
    if sym > SYMMETRY_TOL:
        raise SymmetryError(f"Gaussian-base velocity Jacobian asymmetric (residual {sym:.3e})")
    lam = bounds.thm1_lambda(schedule, t_grid, kappa)

    if x0 is None:
        x0 = _subsample(quantile_grid(mu0, mu1, schedule, lo), 9 if p1.dim == 1 else 25)
    flow_times, df, _ = _flow_norms(backend, x0, n_steps)
    df_bound = bounds.thm1_flow_bound(schedule, flow_times, kappa) / bounds.thm1_flow_bound(schedule, flow_times[0], kappa)

    extras = {
        "kappa": kappa,
        "backend": type(backend).__name__,
        "tightness_scale": 1.0 / math.sqrt(kappa) if kappa > 0 else None,
    }
    return BoundReport("thm1", t_grid, top, lam, flow_times, df, df_bound, tol, sym, extras)


def verify_thm2(
    mu0,
    mu1,
    schedule: Schedule,
    kappa0: float | None = None,
    eta0: float | None = None,
    kappa1: float | None = None,
    t_grid=None,
    x_grid=None,
    x0=None,
    n_steps: int = 1000,
    tol: float | None = None,
    quad: QuadratureConfig | None = None,
    backend=None,
) -> BoundReport:
    """Check the two-sided log-concavity bound and its Gronwall flow bound.

    Also reports the Corollary constant and Caffarelli's constant.
    """
    ok, report = check_admissible(schedule)
    if not ok:
        failed = ", ".join(i.clause for i in report.failures())
        raise PreconditionError(f"schedule {schedule.name!r} is not admissible ({failed})")
    p0, p1 = to_potential(mu0), to_potential(mu1)
    kappa0 = p0.kappa if kappa0 is None else float(kappa0)
    eta0 = p0.eta if eta0 is None else float(eta0)
    kappa1 = p1.kappa if kappa1 is None else float(kappa1)
    if kappa0 < kappa1:
        raise PreconditionError(f"need kappa0 >= kappa1 (got {kappa0} < {kappa1})")
    if backend is None:
        backend = _default_backend(mu0, mu1, schedule, quad)
    closed = isinstance(backend, GaussianDrift)
    if tol is None:
        tol = TOL_CLOSED_FORM if closed else TOL_QUADRATURE
    lo, hi = backend.t_range
    t_grid = np.linspace(lo, hi, 21) if t_grid is None else np.asarray(t_grid, dtype=float)
    if x_grid is None:
        def x_grid(t):
            return quantile_grid(mu0, mu1, schedule, t)

    measured, sym = measure_drift_norms(backend, x_grid, t_grid, reduce="op_norm")
    lam = bounds.thm2_lambda(schedule, t_grid, kappa0, eta0, kappa1, check=False)

    if x0 is None:
        x0 = _subsample(quantile_grid(mu0, mu1, schedule, lo), 9 if p1.dim == 1 else 25)
    flow_times, df, _ = _flow_norms(backend, x0, n_steps)
    # integrate lambda on a finer grid than the flow steps so that the
    # trapezoid error stays far below the closed-form tolerance
    fine = np.linspace(flow_times[0], flow_times[-1], _GRONWALL_REFINE * (flow_times.size - 1) + 1)
    fine_lam = bounds.thm2_lambda(schedule, fine, kappa0, eta0, kappa1, check=False)
    df_bound = bounds.gronwall_flow_bound(fine, fine_lam)[::_GRONWALL_REFINE]

    extras = {
        "kappa0": kappa0,
        "eta0": eta0,
        "kappa1": kappa1,
        "backend": type(backend).__name__,
        "corollary_constant": bounds.corollary_constant(kappa0, eta0, kappa1) if kappa0 > 0 and kappa1 > 0 else None,
        "caffarelli_constant": bounds.caffarelli_constant(eta0, kappa1) if 0 < kappa1 <= eta0 else None,
    }
    return BoundReport("thm2", t_grid, measured, lam, flow_times, df, df_bound, tol, sym, extras)


# ---------------------------------------------------------------------------
# Inequalities used in the proofs


@dataclass
class BrascampLiebResult:
    variance: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.variance

    @property
    def passed(self) -> bool:
        return self.variance <= self.bound + 1e-8


def brascamp_lieb_check_1d(mu: PotentialDensity, f, df) -> BrascampLiebResult:
    """Both sides of ``Var_mu[f] <= E_mu[f'^2 / V'']`` by adaptive quadrature."""
    if mu.dim != 1:
        raise ParameterError("brascamp_lieb_check_1d needs a one-dimensional density")
    if not mu.kappa > 0:
        raise PreconditionError("the density must be strictly log-concave (kappa > 0)")
    c = float(mu.argmin[0])
    v_min = float(mu.V(np.array([c])))

    def dens(x):
        return math.exp(-(float(mu.V(np.array([x]))) - v_min))

    def expect(g):
        val = 0.0
        for lo, hi in ((-np.inf, c), (c, np.inf)):
            val += integrate.quad(lambda x: g(x) * dens(x), lo, hi, epsabs=1e-14, epsrel=1e-13, limit=200)[0]
        return val

    z = expect(lambda x: 1.0)
    m1 = expect(lambda x: f(x)) / z
    var = expect(lambda x: (f(x) - m1) ** 2) / z
    bound = expect(lambda x: df(x) ** 2 / float(np.asarray(mu.hess_V(np.array([x]))).reshape(()))) / z
    return BrascampLiebResult(var, bound)


@dataclass
class MatrixLemmaReport:
    trials: int
    dim: int
    min_eigenvalue: float
    failures: int
    tol: float
    worst: dict | None = None
    eigenvalues: np.ndarray | None = None  # per-trial minimum eigenvalue of CDC - ABA

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _random_psd(rng, dim):
    g = rng.standard_normal((dim, dim))
    return g @ g.T


def matrix_lemma_check(trials: int, dim: int, seed: int, tol: float = 1e-10, commuting: bool = False) -> MatrixLemmaReport:
    """Test ``ABA <= CDC`` whenever ``0 <= A <= C`` and ``0 <= B <= D``.

    ``C = A + R`` and ``D = B + S`` with ``A, B, R, S`` drawn as ``G G^T``.
    With ``commuting`` all four matrices share a random eigenbasis.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    worst_eig, failures, worst = math.inf, 0, None
    eigs = np.empty(trials)
    for k in range(trials):
        if commuting:
            q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
            a, r, b, s = (rng.standard_normal((4, dim)) ** 2)
            A, R, B, S = (q @ np.diag(v) @ q.T for v in (a, r, b, s))
        else:
            A, R, B, S = (_random_psd(rng, dim) for _ in range(4))
        C, D = A + R, B + S
        gap = C @ D @ C - A @ B @ A
        eig = float(np.linalg.eigvalsh(0.5 * (gap + gap.T)).min())
        eigs[k] = eig
        if eig < -tol:
            failures += 1
        if eig < worst_eig:
            worst_eig = eig
            worst = {"A": A.tolist(), "B": B.tolist(), "C": C.tolist(), "D": D.tolist(), "min_eig": eig}
    return MatrixLemmaReport(trials, dim, worst_eig, failures, tol, worst, eigs)


# ---------------------------------------------------------------------------
# Estimator study


@dataclass
class EstimatorRow:
    n: int
    median_error: float
    errors: list[float]


def _exact_backend(mu1, schedule):
    p1 = to_potential(mu1)
    mu0 = standard_gaussian(p1.dim)
    if as_gaussian(mu1) is not None:
        return GaussianDrift(mu0, mu1, schedule)
    return QuadratureDrift(mu0, p1, schedule)


def estimator_study(
    mu1,
    schedule: Schedule,
    n_list,
    seeds,
    t: float = 0.5,
    h: float = 0.0,
    eps: float = 1e-4,
    n_eval: int = 10_000,
    eval_seed: int = 12345,
) -> list[EstimatorRow]:
    """Median over seeds of the ``L2(mu_t)`` error of the empirical drift.

    Evaluation points are ``alpha_t X_0 + beta_t X_1`` with fresh independent
    endpoint samples, shared across all estimators.
    """
    p1 = to_potential(mu1)
    exact = _exact_backend(mu1, schedule)
    a, b, _, _ = schedule.eval(t)
    x0 = sample(standard_gaussian(p1.dim), n_eval, eval_seed).points
    x1 = sample(mu1, n_eval, eval_seed + 1).points
    pts = a * x0 + b * x1
    v_exact = exact.velocity(t, pts)
    rows = []
    for n in n_list:
        errs = []
        for seed in seeds:
            est = EmpiricalDrift(sample(mu1, int(n), int(seed)), schedule, bandwidth=h, threshold=eps)
            diff = est.velocity(t, pts) - v_exact
            errs.append(float(np.sqrt(np.mean(np.sum(diff**2, axis=-1)))))
        rows.append(EstimatorRow(int(n), float(np.median(errs)), errs))
    return rows
