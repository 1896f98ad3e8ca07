"""Flow map integration, Jacobian propagation and the stochastic sampler family."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError, ParameterError
from .measures import SampleSet

MIN_STEPS = 10


@dataclass
class FlowResult:
    """Trajectories on a uniform time grid.

    ``states`` has shape ``(n_times, *batch, d)``.  When the variational
    equation was integrated, ``jacobians`` has shape ``(n_times, *batch, d, d)``
    and ``op_norms`` holds their spectral norms.
    """

    times: np.ndarray
    states: np.ndarray
    jacobians: np.ndarray | None = None
    op_norms: np.ndarray | None = None

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    @property
    def endpoint(self) -> np.ndarray:
        return self.states[-1]

    @property
    def endpoint_jacobian(self) -> np.ndarray | None:
        return None if self.jacobians is None else self.jacobians[-1]


def _time_grid(backend, n_steps: int, t_span) -> np.ndarray:
    if n_steps < MIN_STEPS:
        raise ParameterError(f"n_steps must be >= {MIN_STEPS}")
    t0, t1 = backend.t_range if t_span is None else t_span
    lo, hi = backend.t_range
    if t0 < lo - 1e-15 or t1 > hi + 1e-15 or not t0 < t1:
        raise ParameterError(f"time span ({t0}, {t1}) outside the backend range {backend.t_range}")
    return np.linspace(t0, t1, n_steps + 1)


def _as_states(x0, dim: int | None) -> np.ndarray:
    x = np.asarray(x0, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if dim is not None and x.shape[-1] != dim:
        if dim == 1:
            x = x[..., None]
        else:
            raise ParameterError(f"initial points have trailing size {x.shape[-1]}, expected {dim}")
    return x


def _rk4_step(f, t, h, y):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, [yi + 0.5 * h * ki for yi, ki in zip(y, k1)])
    k3 = f(t + 0.5 * h, [yi + 0.5 * h * ki for yi, ki in zip(y, k2)])
    k4 = f(t + h, [yi + h * ki for yi, ki in zip(y, k3)])
    return [yi + (h / 6.0) * (a + 2 * b + 2 * c + d) for yi, a, b, c, d in zip(y, k1, k2, k3, k4)]


def _euler_step(f, t, h, y):
    return [yi + h * ki for yi, ki in zip(y, f(t, y))]


_STEPPERS = {"rk4": _rk4_step, "euler": _euler_step}


def integrate_flow(
    backend,
    x0,
    n_steps: int = 1000,
    with_jacobian: bool = False,
    t_span: tuple[float, float] | None = None,
    method: str = "rk4",
) -> FlowResult:
    """Integrate ``dx/dt = v_t(x)`` from ``x0`` over the backend's valid range.

    With ``with_jacobian`` the variational equation ``dJ/dt = Dv_t(x) J``,
    ``J = I`` initially, is advanced with the same stages.  ``x0`` may be a
    single point ``(d,)`` or a batch ``(n, d)``; batches are integrated
    together but independently.
    """
    if method not in _STEPPERS:
        raise ParameterError(f"unknown method {method!r}")
    step = _STEPPERS[method]
    times = _time_grid(backend, n_steps, t_span)
    x = _as_states(x0, getattr(backend, "dim", None))
    d = x.shape[-1]

    if with_jacobian:
        joint = getattr(backend, "velocity_and_jacobian", None)

        def rhs(t, y):
            pos, jac = y
            if joint is not None:
                v, dv = joint(t, pos)
            else:
                v, dv = backend.velocity(t, pos), backend.jacobian(t, pos)
            return [v, dv @ jac]

        y = [x, np.broadcast_to(np.eye(d), x.shape[:-1] + (d, d)).copy()]
    else:
        def rhs(t, y):
            return [backend.velocity(t, y[0])]

        y = [x]

    states = np.empty((len(times),) + x.shape)
    states[0] = x
    jacs = None
    if with_jacobian:
        jacs = np.empty((len(times),) + x.shape[:-1] + (d, d))
        jacs[0] = y[1]
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        y = step(rhs, times[k], h, y)
        if not all(np.all(np.isfinite(part)) for part in y):
            raise DivergenceError(f"non-finite state after step {k + 1} (t={times[k + 1]:.6g})", k + 1)
        states[k + 1] = y[0]
        if with_jacobian:
            jacs[k + 1] = y[1]
    norms = None if jacs is None else np.linalg.norm(jacs, ord=2, axis=(-2, -1))
    return FlowResult(times, states, jacs, norms)


def pushforward(results, source: str = "pushforward") -> SampleSet:
    """Collect the endpoint states of one batched result or several results."""
    if isinstance(results, FlowResult):
        results = [results]
    results = list(results)
    grid = results[0].times
    for r in results[1:]:
        if r.times.shape != grid.shape or not np.array_equal(r.times, grid):
            raise ParameterError("flows do not share a time grid")
    pts = np.concatenate([r.endpoint.reshape(-1, r.endpoint.shape[-1]) for r in results], axis=0)
    return SampleSet(pts, None, source)


# ---------------------------------------------------------------------------
# Stochastic sampler


def step_noise(seed: int, step: int, shape) -> np.ndarray:
    """Standard normals for one time step.

    Drawn from a Philox stream keyed by ``seed`` whose counter starts at
    ``step``, so the increments depend only on ``(seed, step, path index)``
    and not on the order in which steps or paths are evaluated.
    """
    bitgen = np.random.Philox(key=int(seed), counter=[0, 0, int(step), 0])
    return np.random.Generator(bitgen).standard_normal(shape)


@dataclass
class SDEResult:
    times: np.ndarray  # checkpoint times
    samples: list[SampleSet]
    final: np.ndarray

    def at(self, t: float) -> SampleSet:
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9:
            raise KeyError(t)
        return self.samples[i]


def sde_sample(
    drift_backend,
    score_backend,
    eps: float,
    x0_samples,
    n_steps: int,
    seed: int,
    checkpoints=(1.0,),
    t_span: tuple[float, float] | None = None,
    scheme: str = "euler_maruyama",
) -> SDEResult:
    """Simulate ``dX = [v_t + (1 - eps) s_t](X) dt + sqrt(2 (1 - eps)) dW``.

    ``v_t`` is the interpolant drift and ``s_t`` the score of ``mu_t``; every
    ``eps`` in ``[0, 1]`` preserves the marginals and ``eps = 1`` is the
    deterministic flow.  ``scheme="euler_maruyama"`` takes explicit Euler
    drift steps; ``scheme="rk4_additive"`` advances the drift with RK4 and
    adds the (state-independent) noise increment, so that ``eps = 1``
    reproduces :func:`integrate_flow` exactly.
    """
    if not 0.0 <= eps <= 1.0:
        raise ParameterError(f"eps must lie in [0, 1], got {eps}")
    if scheme not in ("euler_maruyama", "rk4_additive"):
        raise ParameterError(f"unknown scheme {scheme!r}")
    times = _time_grid(drift_backend, n_steps, t_span)
    x = _as_states(x0_samples.points if isinstance(x0_samples, SampleSet) else x0_samples,
                   getattr(drift_backend, "dim", None))
    if x.ndim == 1:
        x = x[None, :]
    checkpoints = np.atleast_1d(np.asarray(checkpoints, dtype=float))
    idx = np.rint((checkpoints - times[0]) / (times[1] - times[0])).astype(int)
    if np.any(idx < 0) or np.any(idx > n_steps) or np.any(np.abs(times[np.clip(idx, 0, n_steps)] - checkpoints) > 1e-9):
        raise ParameterError("checkpoints must lie on the integration grid")

    mix = 1.0 - eps
    noise_scale = math.sqrt(2.0 * mix)

    def rhs(t, y):
        v = drift_backend.velocity(t, y[0])
        if mix > 0.0:
            v = v + mix * score_backend.score(t, y[0])
        return [v]

    stepper = _euler_step if scheme == "euler_maruyama" else _rk4_step
    saved = {}
    if 0 in idx:
        saved[0] = x.copy()
    for k in range(n_steps):
        h = times[k + 1] - times[k]
        (x,) = stepper(rhs, times[k], h, [x])
        if noise_scale > 0.0:
            x = x + noise_scale * math.sqrt(h) * step_noise(seed, k, x.shape)
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite state after step {k + 1}", k + 1)
        if k + 1 in idx:
            saved[k + 1] = x.copy()
    samples = [SampleSet(saved[i], seed, f"sde(eps={eps:g}, t={times[i]:.6g})") for i in idx]
    return SDEResult(times[idx], samples, x)
