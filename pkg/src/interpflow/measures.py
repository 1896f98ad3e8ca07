"""Base and target measures.

Two representations are supported:

* :class:`GaussianMeasure` with explicit mean and covariance;
* :class:`PotentialDensity`, an unnormalised density ``exp(-V)`` with gradient,
  Hessian and declared log-concavity bounds ``kappa I <= hess V <= eta I``.

Potentials are vectorised: ``V`` maps ``(..., d)`` to ``(...)``, ``grad_V`` to
``(..., d)`` and ``hess_V`` to ``(..., d, d)``.  Normalising constants are never
needed since every downstream quantity is a ratio of integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .errors import ParameterError, SamplerError, UnsupportedCaseError
from .schedules import Schedule

COMMUTE_TOL = 1e-10
SYMMETRY_TOL = 1e-12


def _sym_sqrt(mat: np.ndarray, power: float = 0.5) -> np.ndarray:
    w, u = np.linalg.eigh(mat)
    return (u * w**power) @ u.T


@dataclass(frozen=True, eq=False)
class GaussianMeasure:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ParameterError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        if np.max(np.abs(cov - cov.T), initial=0.0) > SYMMETRY_TOL:
            raise ParameterError("covariance is not symmetric")
        if np.linalg.eigvalsh(cov).min() <= 0.0:
            raise ParameterError("covariance is not positive definite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def precision(self) -> np.ndarray:
        return np.linalg.inv(self.cov)

    def as_potential(self, name: str | None = None) -> "PotentialDensity":
        """Return the quadratic potential ``V(x) = (x-m)^T cov^{-1} (x-m) / 2``."""
        prec = self.precision
        prec = 0.5 * (prec + prec.T)
        mean = self.mean
        eig = np.linalg.eigvalsh(prec)

        def V(x):
            y = np.asarray(x, dtype=float) - mean
            return 0.5 * np.einsum("...i,ij,...j->...", y, prec, y)

        def grad_V(x):
            return (np.asarray(x, dtype=float) - mean) @ prec

        def hess_V(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(prec, x.shape[:-1] + prec.shape).copy()

        return PotentialDensity(
            dim=self.dim,
            V=V,
            grad_V=grad_V,
            hess_V=hess_V,
            kappa=float(eig.min()),
            eta=float(eig.max()),
            name=name or "gaussian",
            mode=mean.copy(),
            gaussian=self,
        )


def standard_gaussian(dim: int = 1) -> GaussianMeasure:
    return GaussianMeasure(np.zeros(dim), np.eye(dim))


@dataclass(frozen=True, eq=False)
class PotentialDensity:
    """Unnormalised density ``exp(-V)`` with declared Hessian bounds.

    ``mode`` is the minimiser of ``V`` when known; otherwise it is located
    numerically on first use.  ``gaussian`` is set when the potential is
    exactly quadratic, which enables exact sampling and closed forms.
    """

    dim: int
    V: Callable
    grad_V: Callable
    hess_V: Callable
    kappa: float
    eta: float = math.inf
    name: str = "potential"
    mode: np.ndarray | None = None
    gaussian: GaussianMeasure | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.kappa < 0:
            raise ParameterError("kappa must be non-negative")
        if self.eta < self.kappa:
            raise ParameterError("eta must be >= kappa")

    @property
    def argmin(self) -> np.ndarray:
        if self.mode is not None:
            return np.atleast_1d(np.asarray(self.mode, dtype=float))
        if "argmin" not in self._cache:
            self._cache["argmin"] = find_mode(self)
        return self._cache["argmin"]

    @property
    def is_standard_gaussian(self) -> bool:
        g = self.gaussian
        return (
            g is not None
            and np.allclose(g.mean, 0.0, atol=1e-14)
            and np.allclose(g.cov, np.eye(self.dim), atol=1e-14)
        )


def find_mode(mu: PotentialDensity, tol: float = 1e-8) -> np.ndarray:
    """Minimise ``V`` (unique for a log-concave density)."""
    x0 = np.zeros(mu.dim)
    res = optimize.minimize(
        lambda x: float(mu.V(x)),
        x0,
        jac=lambda x: np.asarray(mu.grad_V(x), dtype=float),
        method="BFGS",
        options={"gtol": tol},
    )
    return np.asarray(res.x, dtype=float)


# ---------------------------------------------------------------------------
# Shipped densities


def gaussian_potential(mean, cov, name: str = "gaussian") -> PotentialDensity:
    return GaussianMeasure(mean, cov).as_potential(name)


def standard_gaussian_potential(dim: int = 1) -> PotentialDensity:
    return standard_gaussian(dim).as_potential("standard_gaussian")


def gaussian_scaled(kappa: float, dim: int = 1) -> PotentialDensity:
    """``V(x) = kappa |x|^2 / 2``, i.e. ``N(0, I / kappa)``."""
    if kappa <= 0:
        raise ParameterError("gaussian_scaled needs kappa > 0")
    return GaussianMeasure(np.zeros(dim), np.eye(dim) / kappa).as_potential(f"gaussian_scaled:{kappa:g}")


def quartic1d() -> PotentialDensity:
    """``V(x) = x^2/2 + x^4/4``; 1-log-concave, not log-convex."""

    def V(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return 0.5 * x**2 + 0.25 * x**4

    def grad_V(x):
        x = np.asarray(x, dtype=float)
        return x + x**3

    def hess_V(x):
        x = np.asarray(x, dtype=float)
        return (1.0 + 3.0 * x**2)[..., None]

    return PotentialDensity(1, V, grad_V, hess_V, kappa=1.0, eta=math.inf, name="quartic1d", mode=np.zeros(1))


def _log_cosh(x):
    ax = np.abs(x)
    return ax + np.log1p(np.exp(-2.0 * ax)) - math.log(2.0)


def logcosh1d() -> PotentialDensity:
    """``V(x) = x^2/2 + log cosh x``; Hessian ``1 + sech^2 x`` lies in ``[1, 2]``."""

    def V(x):
        x = np.asarray(x, dtype=float)[..., 0]
        return 0.5 * x**2 + _log_cosh(x)

    def grad_V(x):
        x = np.asarray(x, dtype=float)
        return x + np.tanh(x)

    def hess_V(x):
        x = np.asarray(x, dtype=float)
        return (1.0 + 1.0 / np.cosh(x) ** 2)[..., None]

    return PotentialDensity(1, V, grad_V, hess_V, kappa=1.0, eta=2.0, name="logcosh1d", mode=np.zeros(1))


def to_potential(mu) -> PotentialDensity:
    if isinstance(mu, PotentialDensity):
        return mu
    if isinstance(mu, GaussianMeasure):
        return mu.as_potential()
    raise ParameterError(f"cannot interpret {type(mu).__name__} as a measure")


def as_gaussian(mu) -> GaussianMeasure | None:
    if isinstance(mu, GaussianMeasure):
        return mu
    if isinstance(mu, PotentialDensity):
        return mu.gaussian
    return None


# ---------------------------------------------------------------------------
# Log-concavity


@dataclass
class LogConcavityReport:
    min_eig: float
    max_eig: float
    kappa: float
    eta: float
    passed: bool
    argmin: np.ndarray
    argmax: np.ndarray


def logconcavity_check(mu: PotentialDensity, grid, slack: float = 1e-8) -> LogConcavityReport:
    """Extreme Hessian eigenvalues over ``grid`` versus the declared ``[kappa, eta]``."""
    pts = np.asarray(grid, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if mu.dim == 1 else pts[None, :]
    if pts.shape[0] == 0:
        raise ParameterError("grid must be non-empty")
    eig = np.linalg.eigvalsh(np.asarray(mu.hess_V(pts), dtype=float))
    lo, hi = eig.min(axis=-1), eig.max(axis=-1)
    i_lo, i_hi = int(np.argmin(lo)), int(np.argmax(hi))
    ok = lo[i_lo] >= mu.kappa - slack and hi[i_hi] <= mu.eta + slack
    return LogConcavityReport(float(lo[i_lo]), float(hi[i_hi]), mu.kappa, mu.eta, bool(ok), pts[i_lo], pts[i_hi])


# ---------------------------------------------------------------------------
# Sampling


@dataclass(frozen=True, eq=False)
class SampleSet:
    points: np.ndarray
    seed: int | None
    source: str

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.shape[0] < 1:
            raise ParameterError("a sample set needs at least one point")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("sample set contains non-finite entries")
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


MIN_ACCEPTANCE = 1e-4


def _inverse_cdf_1d(mu: PotentialDensity, u: np.ndarray, n_grid: int = 20001) -> np.ndarray:
    center = float(mu.argmin[0])
    v_min = float(mu.V(np.array([center])))
    # widen until the tails are negligible (exp(-60) relative to the mode)
    width = 1.0
    for _ in range(60):
        ends = np.array([[center - width], [center + width]])
        if np.all(mu.V(ends) - v_min > 60.0):
            break
        width *= 2.0
    xs = np.linspace(center - width, center + width, n_grid)
    dens = np.exp(-(mu.V(xs[:, None]) - v_min))
    cdf = integrate.cumulative_trapezoid(dens, xs, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return np.interp(u, cdf[keep], xs[keep])


def sample(mu, n: int, seed: int) -> SampleSet:
    """Draw ``n`` samples.

    Gaussians are sampled exactly.  One-dimensional potentials use a numerical
    inverse CDF; higher-dimensional potentials use rejection from
    ``N(argmin V, I / kappa)``, which dominates any kappa-log-concave density.
    """
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = np.random.default_rng(seed)
    g = as_gaussian(mu)
    name = getattr(mu, "name", "gaussian")
    if g is not None:
        chol = np.linalg.cholesky(g.cov)
        z = rng.standard_normal((n, g.dim))
        return SampleSet(g.mean + z @ chol.T, seed, name)
    if mu.dim == 1:
        return SampleSet(_inverse_cdf_1d(mu, rng.random(n))[:, None], seed, name)
    if mu.kappa <= 0:
        raise SamplerError("rejection sampling needs kappa > 0; use a Gaussian target")
    center = mu.argmin
    v_min = float(mu.V(center))
    scale = 1.0 / math.sqrt(mu.kappa)
    out, drawn, accepted = [], 0, 0
    batch = max(1024, 4 * n)
    while accepted < n:
        prop = center + scale * rng.standard_normal((batch, mu.dim))
        log_acc = -(mu.V(prop) - v_min) + 0.5 * mu.kappa * np.sum((prop - center) ** 2, axis=-1)
        keep = np.log(rng.random(batch)) < np.minimum(log_acc, 0.0)
        drawn += batch
        accepted += int(keep.sum())
        out.append(prop[keep])
        if drawn >= 100 * batch and accepted / drawn < MIN_ACCEPTANCE:
            raise SamplerError(
                f"rejection acceptance rate {accepted / drawn:.2e} below {MIN_ACCEPTANCE:g}; "
                "use a 1D density or a Gaussian target"
            )
    return SampleSet(np.concatenate(out)[:n], seed, name)


# ---------------------------------------------------------------------------
# Gaussian closed forms


@dataclass(frozen=True, eq=False)
class AffineMap:
    A: np.ndarray
    b: np.ndarray

    def __call__(self, x):
        return np.asarray(x, dtype=float) @ self.A.T + self.b

    @property
    def lipschitz(self) -> float:
        return float(np.linalg.norm(self.A, 2))


def _require_commuting(s0: np.ndarray, s1: np.ndarray):
    resid = np.max(np.abs(s0 @ s1 - s1 @ s0))
    if resid > COMMUTE_TOL:
        raise UnsupportedCaseError(f"covariances do not commute (residual {resid:.2e})")


def gaussian_ot_map(mu0: GaussianMeasure, mu1: GaussianMeasure) -> AffineMap:
    """Optimal transport map ``x -> m1 + S1^{1/2} S0^{-1/2} (x - m0)`` for commuting covariances."""
    _require_commuting(mu0.cov, mu1.cov)
    A = _sym_sqrt(mu1.cov) @ _sym_sqrt(mu0.cov, -0.5)
    return AffineMap(A, mu1.mean - A @ mu0.mean)


def gaussian_interpolant_marginal(
    mu0: GaussianMeasure, mu1: GaussianMeasure, schedule: Schedule, t: float
) -> GaussianMeasure:
    """Law of ``alpha_t X_0 + beta_t X_1`` for independent Gaussian endpoints."""
    a, b, _, _ = schedule.eval(t)
    return GaussianMeasure(a * mu0.mean + b * mu1.mean, a**2 * mu0.cov + b**2 * mu1.cov)


BUILTIN_DENSITIES = {
    "quartic1d": quartic1d,
    "logcosh1d": logcosh1d,
}
