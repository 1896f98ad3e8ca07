"""Velocity fields of the isotropic linear interpolant.

Three backends share one duck-typed interface (``velocity``, ``jacobian``,
``score`` and a ``t_range`` attribute); all accept a single point of shape
``(d,)`` or a batch ``(..., d)``:

* :class:`GaussianDrift` -- closed form for Gaussian endpoints with commuting
  covariances;
* :class:`QuadratureDrift` -- conditional expectations over ``X_1`` by
  tensor Gauss-Hermite quadrature (``d <= 3``);
* :class:`EmpiricalDrift` -- the thresholded mixture estimator built from
  samples of the target.

The drift is ``v_t(x) = E[alpha_dot X_0 + beta_dot X_1 | X_t = x]``.  After
eliminating ``X_0 = (x - beta X_1) / alpha`` this becomes

    v_t(x) = (alpha_dot / alpha) x + (beta_dot - alpha_dot beta / alpha) E[X_1 | X_t = x].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DomainError,
    NumericError,
    ParameterError,
    PreconditionError,
    ScheduleError,
    TimeClampError,
)
from .measures import (
    GaussianMeasure,
    PotentialDensity,
    SampleSet,
    _require_commuting,
    _sym_sqrt,
    as_gaussian,
    standard_gaussian_potential,
    to_potential,
)
from .schedules import DEFAULT_TIME_CLAMP, Schedule

DETERMINANT_GUARD = 1e-12
MAX_QUADRATURE_DIM = 3
# cap on batch points x quadrature nodes held in memory at once
_CHUNK_BUDGET = 2_000_000
_NEWTON_MAX_ITER = 50
_NEWTON_TOL = 1e-12


@dataclass
class DriftEvaluation:
    t: float
    x: np.ndarray
    v: np.ndarray
    jac: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.v)) or (self.jac is not None and not np.all(np.isfinite(self.jac))):
            raise NumericError(f"non-finite drift at t={self.t}")


def _batch(x, dim: int) -> tuple[np.ndarray, tuple]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != dim:
        if dim == 1:
            x = x[..., None]
        else:
            raise ParameterError(f"points have trailing size {x.shape[-1]}, expected {dim}")
    lead = x.shape[:-1]
    return x.reshape(-1, dim), lead


def _drift_coefficient(a, b, ad, bd):
    """``beta_dot - alpha_dot beta / alpha``, the weight on ``E[X_1 | x]``."""
    return bd - ad * b / a


def _clamped_eval(fn, t, delta: float, extrapolate: bool):
    """Evaluate ``fn`` on ``[delta, 1 - delta]``, extrapolating linearly beyond it."""
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"time {t} outside [0, 1]")
    lo, hi = delta, 1.0 - delta
    if lo <= t <= hi:
        return fn(t)
    if not extrapolate:
        raise TimeClampError(f"t={t} outside the clamped range [{lo}, {hi}]")
    if t < lo:
        f1, f2 = fn(lo), fn(lo + delta)
        return f1 + (t - lo) * (f2 - f1) / delta
    f1, f2 = fn(hi), fn(hi - delta)
    return f1 + (t - hi) * (f1 - f2) / delta


# ---------------------------------------------------------------------------
# Closed form


class GaussianDrift:
    """Closed-form drift between Gaussians with commuting covariances."""

    def __init__(self, mu0, mu1, schedule: Schedule):
        g0, g1 = as_gaussian(mu0), as_gaussian(mu1)
        if g0 is None or g1 is None:
            raise ParameterError("GaussianDrift needs Gaussian endpoints")
        if g0.dim != g1.dim:
            raise ParameterError("endpoint dimensions differ")
        _require_commuting(g0.cov, g1.cov)
        self.mu0, self.mu1, self.schedule = g0, g1, schedule
        self.dim = g0.dim
        self.t_range = (0.0, 1.0)
        self._s0_inv_sqrt = _sym_sqrt(g0.cov, -0.5)

    def moments(self, t):
        """``(m_t, S_t, m_dot, S_dot)`` of the interpolant marginal."""
        a, b, ad, bd = self.schedule.eval(t)
        g0, g1 = self.mu0, self.mu1
        m = a * g0.mean + b * g1.mean
        S = a**2 * g0.cov + b**2 * g1.cov
        m_dot = ad * g0.mean + bd * g1.mean
        S_dot = 2 * a * ad * g0.cov + 2 * b * bd * g1.cov
        return m, S, m_dot, S_dot

    def jacobian_matrix(self, t) -> np.ndarray:
        _, S, _, S_dot = self.moments(t)
        try:
            return 0.5 * np.linalg.solve(S.T, S_dot.T).T
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"singular marginal covariance at t={t}") from exc

    def velocity(self, t, x):
        m, _, m_dot, _ = self.moments(t)
        M = self.jacobian_matrix(t)
        xs, lead = _batch(x, self.dim)
        return (m_dot + (xs - m) @ M.T).reshape(lead + (self.dim,))

    def jacobian(self, t, x):
        xs, lead = _batch(x, self.dim)
        M = self.jacobian_matrix(t)
        return np.broadcast_to(M, lead + M.shape).copy()

    def score(self, t, x):
        m, S, _, _ = self.moments(t)
        xs, lead = _batch(x, self.dim)
        return (-np.linalg.solve(S, (xs - m).T).T).reshape(lead + (self.dim,))

    def flow_map(self, t, x):
        """``m_t + S_t^{1/2} S_0^{-1/2} (x - m_0)``.

        Anchored at ``m_0`` so that the map is the identity at ``t = 0``.
        """
        m, S, _, _ = self.moments(t)
        xs, lead = _batch(x, self.dim)
        A = _sym_sqrt(S) @ self._s0_inv_sqrt
        return (m + (xs - self.mu0.mean) @ A.T).reshape(lead + (self.dim,))


def drift_gaussian(mu0, mu1, schedule: Schedule, t: float, x) -> DriftEvaluation:
    backend = GaussianDrift(mu0, mu1, schedule)
    x = np.asarray(x, dtype=float)
    return DriftEvaluation(float(t), x, backend.velocity(t, x), backend.jacobian(t, x))


def flowmap_gaussian_closed(mu0, mu1, schedule: Schedule, t: float, x) -> np.ndarray:
    return GaussianDrift(mu0, mu1, schedule).flow_map(t, x)


# ---------------------------------------------------------------------------
# Quadrature


@dataclass(frozen=True)
class QuadratureConfig:
    """Numerical settings of :class:`QuadratureDrift`.

    ``mode`` selects the proposal of the Gauss-Hermite rule over ``x_1``:
    ``laplace`` (default) centres it at the conditional mode with the inverse
    Hessian there as covariance; ``hermite_centered`` follows the base-measure
    factor (centred near ``x / beta_t`` with scale ``alpha_t / beta_t``);
    ``base_proposal`` follows the target (centred at its mode); ``auto``
    switches between the last two at ``beta_t / alpha_t = switch_ratio``.
    """

    nodes_per_dim: int = 64
    mode: str = "laplace"
    switch_ratio: float = 1.0
    time_clamp: float = DEFAULT_TIME_CLAMP
    extrapolate: bool = True

    def __post_init__(self):
        if self.nodes_per_dim < 8:
            raise ParameterError("nodes_per_dim must be >= 8")
        if self.mode not in ("laplace", "auto", "hermite_centered", "base_proposal"):
            raise ParameterError(f"unknown quadrature mode {self.mode!r}")
        if not 0.0 < self.time_clamp < 0.25:
            raise ParameterError("time_clamp must lie in (0, 0.25)")
        if self.switch_ratio <= 0:
            raise ParameterError("switch_ratio must be positive")


@lru_cache(maxsize=16)
def _hermite_rule(n: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor rule for ``E_{N(0, I)}[f]``: nodes ``(n**dim, dim)`` and log-weights.

    The log-weights already include ``log(1 / phi(z))`` so that
    ``sum(exp(lw) * f(z))`` approximates the Lebesgue integral of ``f``.
    """
    z1, w1 = np.polynomial.hermite_e.hermegauss(n)
    lw1 = np.log(w1) + 0.5 * z1**2  # w / sqrt(2 pi) / phi(z) = w exp(z^2/2)
    grids = np.meshgrid(*([z1] * dim), indexing="ij")
    z = np.stack([g.ravel() for g in grids], axis=-1)
    lws = np.meshgrid(*([lw1] * dim), indexing="ij")
    lw = sum(g.ravel() for g in lws)
    z.setflags(write=False)
    lw.setflags(write=False)
    return z, lw


@dataclass
class _Conditional:
    """Quadrature representation of the law of ``X_1`` given ``X_t = x``."""

    x1: np.ndarray  # (m, K, d)
    x0: np.ndarray  # (m, K, d)
    p: np.ndarray  # (m, K) normalised weights
    log_mass: np.ndarray  # (m,) log of the integral of the unnormalised weight

    def mean(self, values: np.ndarray) -> np.ndarray:
        return np.einsum("mk,mk...->m...", self.p, values)

    def cov(self, f: np.ndarray, g: np.ndarray) -> np.ndarray:
        fc = f - self.mean(f)[:, None, :]
        gc = g - self.mean(g)[:, None, :]
        return np.einsum("mk,mki,mkj->mij", self.p, fc, gc)


class QuadratureDrift:
    """Drift, Jacobian, score and potentials by quadrature over ``x_1``.

    The conditional law of ``X_1`` given ``X_t = x`` has unnormalised density
    ``exp(-V_0((x - beta x_1)/alpha) - V_1(x_1))``; every quantity is a moment
    of it.  Valid on ``[time_clamp, 1 - time_clamp]``; outside that range
    values are extrapolated linearly in ``t`` unless ``extrapolate`` is off.
    """

    def __init__(self, mu0, mu1, schedule: Schedule, quad: QuadratureConfig | None = None):
        self.p0 = to_potential(mu0)
        self.p1 = to_potential(mu1)
        if self.p0.dim != self.p1.dim:
            raise ParameterError("endpoint dimensions differ")
        self.dim = self.p0.dim
        if self.dim > MAX_QUADRATURE_DIM:
            raise ParameterError(f"quadrature backends support d <= {MAX_QUADRATURE_DIM}")
        self.schedule = schedule
        self.quad = quad or QuadratureConfig()
        delta = self.quad.time_clamp
        self.t_range = (delta, 1.0 - delta)
        self.gaussian_base = self.p0.is_standard_gaussian
        self._z, self._lw = _hermite_rule(self.quad.nodes_per_dim, self.dim)
        self._base_center = self.p0.argmin
        self._base_scale = 1.0 / math.sqrt(self.p0.kappa) if self.p0.kappa > 0 else 1.0
        self._target_center = self.p1.argmin
        self._target_scale = 1.0 / math.sqrt(self.p1.kappa) if self.p1.kappa > 0 else 1.0

    # -- time handling --------------------------------------------------

    def _coefficients(self, t: float):
        a, b, ad, bd = self.schedule.eval(t)
        if not a > 1e-300:
            raise TimeClampError(f"alpha_t={a} vanishes at t={t}; stay inside the time clamp")
        return float(a), float(b), float(ad), float(bd)

    def _clamped(self, fn, t):
        return _clamped_eval(fn, t, self.quad.time_clamp, self.quad.extrapolate)

    # -- conditional law -------------------------------------------------

    def _proposal(self, xs: np.ndarray, a: float, b: float):
        """Centre ``(m, d)`` and scale factor ``(m, d, d)`` of the Gaussian proposal."""
        m = xs.shape[0]
        eye = np.eye(self.dim)
        mode = self.quad.mode
        if mode == "auto":
            mode = "hermite_centered" if b >= self.quad.switch_ratio * a else "base_proposal"
        if mode == "hermite_centered":
            if b <= 0:
                raise ScheduleError("hermite_centered rule needs beta_t > 0")
            center = (xs - a * self._base_center) / b
            return center, np.broadcast_to((a / b) * self._base_scale * eye, (m, self.dim, self.dim))
        target = np.broadcast_to(self._target_center, xs.shape)
        if mode == "base_proposal":
            return target, np.broadcast_to(self._target_scale * eye, (m, self.dim, self.dim))
        return self._laplace(xs, a, b, target.copy())

    def _laplace(self, xs, a, b, x1):
        """Newton iterations for the conditional mode; scale from the Hessian there.

        ``psi(x1) = V_0((x - b x1)/a) + V_1(x1)`` is convex, so damped Newton with
        backtracking converges from any start.
        """
        r = b / a

        def psi(y):
            return self.p0.V((xs - b * y) / a) + self.p1.V(y)

        for _ in range(_NEWTON_MAX_ITER):
            x0 = (xs - b * x1) / a
            grad = -r * self.p0.grad_V(x0) + self.p1.grad_V(x1)
            hess = r**2 * self.p0.hess_V(x0) + self.p1.hess_V(x1)
            step = np.linalg.solve(hess, grad[..., None])[..., 0]
            cur = psi(x1)
            scale = np.ones(xs.shape[0])
            for _ in range(30):
                trial = x1 - scale[:, None] * step
                bad = ~(psi(trial) <= cur + 1e-14 * np.abs(cur))
                if not bad.any():
                    break
                scale = np.where(bad, 0.5 * scale, scale)
            x1 = x1 - scale[:, None] * step
            if np.max(np.abs(scale[:, None] * step)) < _NEWTON_TOL * (1.0 + np.max(np.abs(x1))):
                break
        x0 = (xs - b * x1) / a
        hess = r**2 * self.p0.hess_V(x0) + self.p1.hess_V(x1)
        chol = np.linalg.cholesky(np.linalg.inv(hess))
        return x1, chol

    def _conditional(self, t: float, xs: np.ndarray, log_integrand=None) -> _Conditional:
        a, b, _, _ = self._coefficients(t)
        center, factor = self._proposal(xs, a, b)
        x1 = center[:, None, :] + np.einsum("mij,kj->mki", factor, self._z)
        x0 = (xs[:, None, :] - b * x1) / a
        if log_integrand is None:
            logf = -self.p0.V(x0) - self.p1.V(x1)
        else:
            logf = log_integrand(x1)
        log_det = np.log(np.abs(np.diagonal(factor, axis1=1, axis2=2))).sum(axis=1)
        lw = self._lw[None, :] + log_det[:, None] + logf
        log_mass = logsumexp(lw, axis=1)
        if not np.all(np.isfinite(log_mass)):
            bad = int(np.argmin(np.isfinite(log_mass)))
            raise NumericError(f"quadrature mass non-finite at t={t}, x={xs[bad]}")
        p = np.exp(lw - log_mass[:, None])
        return _Conditional(x1, x0, p, log_mass)

    def _chunks(self, xs: np.ndarray):
        step = max(1, _CHUNK_BUDGET // self._z.shape[0])
        for i in range(0, xs.shape[0], step):
            yield xs[i : i + step]

    def _map(self, t, x, kernel, tail_shape):
        xs, lead = _batch(x, self.dim)

        def at(s):
            return np.concatenate([kernel(s, c) for c in self._chunks(xs)], axis=0)

        out = self._clamped(at, t)
        return out.reshape(lead + tail_shape)

    # -- public quantities ------------------------------------------------

    def _kernel_mean(self, s, c):
        cond = self._conditional(s, c)
        return cond.mean(cond.x1)

    def _kernel_cov(self, s, c):
        cond = self._conditional(s, c)
        return cond.cov(cond.x1, cond.x1)

    def _kernel_velocity(self, s, c):
        a, b, ad, bd = self._coefficients(s)
        cond = self._conditional(s, c)
        return (ad / a) * c + _drift_coefficient(a, b, ad, bd) * cond.mean(cond.x1)

    def _kernel_jacobian_gaussian_base(self, s, c):
        a, b, ad, bd = self._coefficients(s)
        cond = self._conditional(s, c)
        cov = cond.cov(cond.x1, cond.x1)
        coef = _drift_coefficient(a, b, ad, bd) * b / a**2
        return (ad / a) * np.eye(self.dim) + coef * cov

    def _kernel_jacobian_general(self, s, c):
        a, b, ad, bd = self._coefficients(s)
        return self._general_cov(self._conditional(s, c), a, b, ad, bd, s)

    def _general_cov(self, cond, a, b, ad, bd, s):
        det = a * bd - ad * b
        if abs(det) <= DETERMINANT_GUARD:
            raise ScheduleError(f"|alpha beta_dot - alpha_dot beta| = {abs(det):.2e} at t={s}")
        r = ad * cond.x0 + bd * cond.x1
        # -grad_x of the reparametrised potential, evaluated at x0(x1), x1
        g = -(bd * self.p0.grad_V(cond.x0) - ad * self.p1.grad_V(cond.x1)) / det
        return cond.cov(r, g)

    def _kernel_score(self, s, c):
        a, _, _, _ = self._coefficients(s)
        cond = self._conditional(s, c)
        return -cond.mean(self.p0.grad_V(cond.x0)) / a

    def velocity(self, t, x):
        return self._map(t, x, self._kernel_velocity, (self.dim,))

    def velocity_and_jacobian(self, t, x):
        """Both quantities from a single conditional-law evaluation (default route)."""
        d = self.dim
        general = not self.gaussian_base

        def kernel(s, c):
            a, b, ad, bd = self._coefficients(s)
            cond = self._conditional(s, c)
            coef = _drift_coefficient(a, b, ad, bd)
            v = (ad / a) * c + coef * cond.mean(cond.x1)
            if general:
                jac = self._general_cov(cond, a, b, ad, bd, s)
            else:
                jac = (ad / a) * np.eye(d) + coef * b / a**2 * cond.cov(cond.x1, cond.x1)
            return np.concatenate([v[:, :, None], jac], axis=2)

        out = self._map(t, x, kernel, (d, d + 1))
        return out[..., 0], out[..., 1:]

    def jacobian(self, t, x, route: str = "auto"):
        """Velocity Jacobian ``Dv_t(x)`` with rows indexed by output component.

        ``route="gaussian_base"`` uses the conditional covariance of ``X_1``
        (symmetric by construction, standard normal base only);
        ``route="general"`` uses the covariance between ``R_t`` and
        ``-grad_x`` of the reparametrised potential.
        """
        if route == "auto":
            route = "gaussian_base" if self.gaussian_base else "general"
        if route == "gaussian_base":
            if not self.gaussian_base:
                raise PreconditionError("gaussian_base route needs mu0 = N(0, I)")
            kernel = self._kernel_jacobian_gaussian_base
        elif route == "general":
            kernel = self._kernel_jacobian_general
        else:
            raise ParameterError(f"unknown Jacobian route {route!r}")
        return self._map(t, x, kernel, (self.dim, self.dim))

    def score(self, t, x):
        """``grad log mu_t(x) = -E[grad V_0(X_0) | X_t = x] / alpha_t``."""
        return self._map(t, x, self._kernel_score, (self.dim,))

    def conditional_mean(self, t, x):
        """``E[X_1 | X_t = x]``."""
        return self._map(t, x, self._kernel_mean, (self.dim,))

    def conditional_cov(self, t, x):
        """``Cov[X_1 | X_t = x]``."""
        return self._map(t, x, self._kernel_cov, (self.dim, self.dim))

    def _require_gaussian_base(self):
        if not self.gaussian_base:
            raise PreconditionError("this quantity is defined for mu0 = N(0, I) only")

    def log_partition(self, t, x):
        """Cumulant generating function ``b_t(x)`` of the conditional law."""
        self._require_gaussian_base()

        def kernel(s, c):
            a, b, _, _ = self._coefficients(s)

            def logf(x1):
                return _conditional_exponent(self.p1, a, b, c[:, None, :], x1)

            return self._conditional(s, c, logf).log_mass

        return self._map(t, x, kernel, ())

    def potential(self, t, x):
        """Scalar ``phi_t`` with ``grad phi_t = v_t`` (standard normal base)."""
        self._require_gaussian_base()

        def kernel(s, c):
            a, b, ad, bd = self._coefficients(s)
            if not b > 0:
                raise ScheduleError(f"beta_t vanishes at t={s}")

            def logf(x1):
                return _conditional_exponent(self.p1, a, b, c[:, None, :], x1)

            bt = self._conditional(s, c, logf).log_mass
            return (ad / (2 * a)) * np.sum(c**2, axis=-1) + _drift_coefficient(a, b, ad, bd) * (a**2 / b) * bt

        return self._map(t, x, kernel, ())

    def evaluate(self, t, x, with_jacobian: bool = True) -> DriftEvaluation:
        x = np.asarray(x, dtype=float)
        jac = self.jacobian(t, x) if with_jacobian else None
        return DriftEvaluation(float(t), x, self.velocity(t, x), jac)


def _conditional_exponent(mu1: PotentialDensity, a, b, x, x1):
    return (
        -mu1.V(x1)
        - 0.5 * (b**2 / a**2) * np.sum(x1**2, axis=-1)
        + (b / a**2) * np.sum(x1 * x, axis=-1)
    )


def conditional_logdensity_gaussian_base(mu1: PotentialDensity, schedule: Schedule, t: float, x, x1):
    """Unnormalised log-density of ``X_1 = x1`` given ``X_t = x`` for ``mu0 = N(0, I)``.

    The cumulant generating function is omitted.
    """
    a, b, _, _ = schedule.eval(t)
    if not a >= 1e-300:
        raise TimeClampError(f"alpha_t={a} too small at t={t}")
    x = np.asarray(x, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if mu1.dim == 1:
        x = x.reshape(x.shape + (1,)) if x.shape[-1:] != (1,) else x
        x1 = x1.reshape(x1.shape + (1,)) if x1.shape[-1:] != (1,) else x1
    return _conditional_exponent(mu1, a, b, x, x1)


def _gaussian_base_backend(mu1, schedule, quad) -> QuadratureDrift:
    p1 = to_potential(mu1)
    return QuadratureDrift(standard_gaussian_potential(p1.dim), p1, schedule, quad)


def log_partition_bt(mu1, schedule: Schedule, t: float, x, quad: QuadratureConfig | None = None):
    return _gaussian_base_backend(mu1, schedule, quad).log_partition(t, x)


def drift_quadrature(mu0, mu1, schedule: Schedule, t: float, x, quad: QuadratureConfig | None = None) -> DriftEvaluation:
    backend = QuadratureDrift(mu0, mu1, schedule, quad)
    return backend.evaluate(t, x, with_jacobian=False)


def drift_jacobian(mu0, mu1, schedule: Schedule, t: float, x, quad: QuadratureConfig | None = None, route: str = "auto"):
    return QuadratureDrift(mu0, mu1, schedule, quad).jacobian(t, x, route)


def drift_potential_phi(mu1, schedule: Schedule, t: float, x, quad: QuadratureConfig | None = None):
    return _gaussian_base_backend(mu1, schedule, quad).potential(t, x)


def score_quadrature(mu1, schedule: Schedule, t: float, x, quad: QuadratureConfig | None = None):
    return _gaussian_base_backend(mu1, schedule, quad).score(t, x)


# ---------------------------------------------------------------------------
# Empirical estimator


class EmpiricalDrift:
    """Drift estimated from samples of the target.

    The smoothed marginal is the mixture ``(1/n) sum N(beta_t X_i, (alpha_t^2 + h) I)``;
    its score is thresholded as ``grad mu / max(eps, mu)`` and converted to a
    drift through ``grad b_t = s_t + x / alpha_t^2``.  Mixture sums are done in
    log space.
    """

    def __init__(
        self,
        samples: SampleSet,
        schedule: Schedule,
        bandwidth: float = 0.0,
        threshold: float = 1e-4,
        time_clamp: float = DEFAULT_TIME_CLAMP,
        extrapolate: bool = True,
    ):
        if samples is None or samples.n < 1:
            raise ParameterError("empirical drift needs at least one sample")
        if bandwidth < 0:
            raise ParameterError("bandwidth must be >= 0")
        if not threshold > 0:
            raise ParameterError("threshold must be > 0")
        self.samples, self.schedule = samples, schedule
        self.bandwidth, self.threshold = float(bandwidth), float(threshold)
        self.dim = samples.dim
        self.t_range = (time_clamp, 1.0 - time_clamp)
        self.time_clamp, self.extrapolate = time_clamp, extrapolate

    def _clamped(self, fn, t):
        return _clamped_eval(fn, t, self.time_clamp, self.extrapolate)

    def _mixture(self, t: float, xs: np.ndarray):
        a, b, ad, bd = self.schedule.eval(t)
        var = a**2 + self.bandwidth
        if not var > 0:
            raise TimeClampError(f"mixture variance vanishes at t={t}")
        centers = b * self.samples.points  # (n, d)
        diff = centers[None, :, :] - xs[:, None, :]  # (m, n, d)
        logn = -0.5 * np.sum(diff**2, axis=-1) / var - 0.5 * self.dim * math.log(2 * math.pi * var)
        lse = logsumexp(logn, axis=1)
        w = np.exp(logn - lse[:, None])
        log_mu = lse - math.log(self.samples.n)
        u = diff / var
        return (a, b, ad, bd, var), log_mu, w, u

    def _chunks(self, xs):
        step = max(1, _CHUNK_BUDGET // self.samples.n)
        for i in range(0, xs.shape[0], step):
            yield xs[i : i + step]

    def _apply(self, t, x, kernel, tail):
        xs, lead = _batch(x, self.dim)

        def at(s):
            return np.concatenate([kernel(s, c) for c in self._chunks(xs)], axis=0)

        return self._clamped(at, t).reshape(lead + tail)

    def _shrink(self, log_mu):
        # min(1, mu / eps), evaluated in log space
        return np.exp(np.minimum(0.0, log_mu - math.log(self.threshold)))

    def _kernel_score(self, s, c):
        _, log_mu, w, u = self._mixture(s, c)
        g = np.einsum("mn,mnd->md", w, u)
        return self._shrink(log_mu)[:, None] * g

    def _kernel_score_jacobian(self, s, c):
        (_, _, _, _, var), log_mu, w, u = self._mixture(s, c)
        g = np.einsum("mn,mnd->md", w, u)
        second = np.einsum("mn,mni,mnj->mij", w, u, u) - np.eye(self.dim) / var
        active = log_mu >= math.log(self.threshold)
        out = np.where(active[:, None, None], second - g[:, :, None] * g[:, None, :], 0.0)
        shrink = self._shrink(log_mu)
        return np.where(active[:, None, None], out, shrink[:, None, None] * second)

    def mixture_density(self, t, x):
        return self._apply(t, x, lambda s, c: np.exp(self._mixture(s, c)[1]), ())

    def score(self, t, x):
        return self._apply(t, x, self._kernel_score, (self.dim,))

    def _kernel_velocity(self, s, c):
        a, b, ad, bd = self.schedule.eval(s)
        if not b > 0:
            raise ScheduleError(f"beta_t vanishes at t={s}")
        score = self._kernel_score(s, c)
        return (ad / a) * c + _drift_coefficient(a, b, ad, bd) * (a**2 / b) * (score + c / a**2)

    def _kernel_jacobian(self, s, c):
        a, b, ad, bd = self.schedule.eval(s)
        ds = self._kernel_score_jacobian(s, c)
        eye = np.eye(self.dim)
        return (ad / a) * eye + _drift_coefficient(a, b, ad, bd) * (a**2 / b) * (ds + eye / a**2)

    def velocity(self, t, x):
        return self._apply(t, x, self._kernel_velocity, (self.dim,))

    def jacobian(self, t, x):
        return self._apply(t, x, self._kernel_jacobian, (self.dim, self.dim))


def empirical_drift(est: EmpiricalDrift, t: float, x) -> np.ndarray:
    return est.velocity(t, x)


def make_backend(kind: str, mu0, mu1, schedule: Schedule, **kwargs):
    """Backend factory used by the CLI: ``gaussian_closed``, ``quadrature`` or ``empirical``."""
    if kind == "gaussian_closed":
        return GaussianDrift(mu0, mu1, schedule)
    if kind == "quadrature":
        return QuadratureDrift(mu0, mu1, schedule, kwargs.get("quad"))
    if kind == "empirical":
        from .measures import sample

        if not to_potential(mu0).is_standard_gaussian:
            raise ParameterError("the empirical estimator assumes mu0 = N(0, I)")
        pts = sample(mu1, int(kwargs.get("n", 1000)), int(kwargs.get("seed", 0)))
        return EmpiricalDrift(pts, schedule, kwargs.get("h", 0.0), kwargs.get("eps", 1e-4))
    raise ParameterError(f"unknown drift backend {kind!r}")
