"""Command-line front end.

Every run resolves one configuration (built-in defaults, then an optional JSON
file given by ``--config``, then explicit flags) and writes into ``--out``:

* ``curves.csv`` -- per-time (or per-point) data with a header row;
* ``summary.json`` -- results, named checks and the resolved configuration;
* ``samples.csv`` -- final states, for commands that sample.

The exit code is 0 when every embedded check passes, 1 when a check fails and
2 for configuration or precondition errors.  All randomness comes from the
configured seeds, so repeating a run reproduces its files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds, verify
from .drift import EmpiricalDrift, GaussianDrift, QuadratureConfig, QuadratureDrift
from .errors import ConfigError, InterpFlowError
from .flow import integrate_flow, sde_sample
from .measures import (
    GaussianMeasure,
    as_gaussian,
    gaussian_scaled,
    logcosh1d,
    quartic1d,
    sample,
    standard_gaussian,
    to_potential,
)
from .schedules import (
    DEFAULT_TIME_CLAMP,
    check_admissible,
    check_derivatives,
    check_endpoints,
    from_expressions,
    make_builtin,
)

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2

DEFAULTS = {
    "schedule": "trig",
    "base": "std",
    "target": "gaussian_scaled:4",
    "dim": None,
    "backend": "auto",
    "nodes": 64,
    "time_clamp": DEFAULT_TIME_CLAMP,
    "steps": 1000,
    "seed": 0,
    "tol": None,
    "t": 0.5,
    "eps": 1.0,
    "scheme": "euler_maruyama",
    "paths": 200,
    "checkpoints": 10,
    "n": 1000,
    "bandwidth": 0.0,
    "threshold": 1e-4,
    "kappa": None,
    "kappa0": None,
    "eta0": None,
    "theorem": "thm1",
    "trials": 1000,
    "commuting": False,
    "f": "x",
    "n_list": [100, 1000, 10000],
    "seeds": 10,
}

# keys whose values must be numbers / integers / strings
_FLOATS = {"time_clamp", "tol", "t", "eps", "bandwidth", "threshold", "kappa", "kappa0", "eta0"}
_INTS = {"dim", "nodes", "steps", "seed", "paths", "checkpoints", "n", "trials"}
_CHOICES = {
    "backend": ("auto", "gaussian_closed", "quadrature", "empirical"),
    "scheme": ("euler_maruyama", "rk4_additive"),
    "theorem": ("thm1", "thm2"),
    "f": ("x", "x2", "x3"),
}
_TEST_FUNCTIONS = {
    "x": (lambda x: x, lambda x: 1.0),
    "x2": (lambda x: x**2, lambda x: 2.0 * x),
    "x3": (lambda x: x**3, lambda x: 3.0 * x**2),
}


# ---------------------------------------------------------------------------
# Configuration


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return data


def resolve_config(file_cfg: dict, flags: dict) -> dict:
    """Merge defaults, file values and flags (flags win) and type-check the result."""
    cfg = dict(DEFAULTS)
    for source, values in (("config", file_cfg), ("flag", flags)):
        for key, value in values.items():
            if key not in DEFAULTS:
                raise ConfigError(f"{source}: unknown key {key!r}")
            if value is not None:
                cfg[key] = value
    errors = []
    for key in sorted(cfg):
        value = cfg[key]
        if value is None:
            continue
        if key in _INTS and (isinstance(value, bool) or not isinstance(value, int)):
            errors.append(f"key {key!r}: expected an integer, got {value!r}")
        elif key in _FLOATS and (isinstance(value, bool) or not isinstance(value, (int, float))):
            errors.append(f"key {key!r}: expected a number, got {value!r}")
        elif key in _CHOICES and value not in _CHOICES[key]:
            errors.append(f"key {key!r}: expected one of {', '.join(_CHOICES[key])}, got {value!r}")
    if isinstance(cfg["seeds"], int) and not isinstance(cfg["seeds"], bool):
        if cfg["seeds"] < 1:
            errors.append("key 'seeds': need at least one seed")
    elif not (isinstance(cfg["seeds"], list) and cfg["seeds"] and all(isinstance(s, int) for s in cfg["seeds"])):
        errors.append("key 'seeds': expected a positive count or a list of integers")
    if not (isinstance(cfg["n_list"], list) and cfg["n_list"] and all(isinstance(n, int) and n > 0 for n in cfg["n_list"])):
        errors.append("key 'n_list': expected a list of positive integers")
    if not isinstance(cfg["commuting"], bool):
        errors.append("key 'commuting': expected true or false")
    if errors:
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))
    return cfg


def parse_schedule(spec, time_clamp: float):
    """Built-in name, ``expr:<alpha>;<beta>`` or ``{"alpha": ..., "beta": ...}``.

    The schedule must pass the endpoint and derivative checks; otherwise every
    failed clause is listed in the raised :class:`ConfigError`.
    """
    if isinstance(spec, dict):
        if "alpha" in spec and "beta" in spec:
            sched = from_expressions(str(spec["alpha"]), str(spec["beta"]))
        elif "kind" in spec:
            sched = make_builtin(str(spec["kind"]), spec.get("kappa"), time_clamp)
        else:
            raise ConfigError("key 'schedule': object needs 'alpha' and 'beta' expressions or a 'kind'")
    elif isinstance(spec, str) and spec.startswith("expr:"):
        parts = spec[5:].split(";")
        if len(parts) != 2:
            raise ConfigError("key 'schedule': expected expr:<alpha>;<beta>")
        sched = from_expressions(parts[0], parts[1])
    elif isinstance(spec, str):
        sched = make_builtin(spec, time_clamp=time_clamp)
    else:
        raise ConfigError(f"key 'schedule': cannot interpret {spec!r}")
    failed = check_endpoints(sched).failures() + check_derivatives(sched).failures()
    if failed:
        lines = [f"{item.clause} violated (residual {item.residual:.3g})" for item in failed]
        raise ConfigError(f"schedule {sched.name!r} failed validation:\n  " + "\n  ".join(lines))
    return sched


def parse_measure(spec, dim: int, key: str):
    if isinstance(spec, str) and spec.lstrip().startswith("{"):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"key {key!r}: {exc.msg} at column {exc.colno}") from exc
    if isinstance(spec, dict):
        if "mean" not in spec or "cov" not in spec:
            raise ConfigError(f"key {key!r}: a Gaussian needs 'mean' and 'cov'")
        return GaussianMeasure(spec["mean"], spec["cov"])
    if not isinstance(spec, str):
        raise ConfigError(f"key {key!r}: cannot interpret {spec!r}")
    name, _, arg = spec.partition(":")
    if name in ("std", "standard"):
        return standard_gaussian(dim)
    if name in ("gaussian_scaled", "normal"):
        try:
            value = float(arg)
        except ValueError as exc:
            raise ConfigError(f"key {key!r}: {name} needs a numeric argument") from exc
        if name == "gaussian_scaled":
            return gaussian_scaled(value, dim)
        return GaussianMeasure(np.zeros(dim), value * np.eye(dim))
    if name in ("quartic1d", "logcosh1d"):
        if dim != 1:
            raise ConfigError(f"key {key!r}: {name} is one-dimensional")
        return quartic1d() if name == "quartic1d" else logcosh1d()
    raise ConfigError(f"key {key!r}: unknown measure {spec!r}")


def _explicit_dim(spec):
    if isinstance(spec, str) and spec.lstrip().startswith("{"):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError:
            return None
    if isinstance(spec, dict) and "mean" in spec:
        return int(np.size(spec["mean"]))
    return None


class Experiment:
    """Resolved configuration with the objects it names."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        dims = {d for d in (_explicit_dim(cfg["base"]), _explicit_dim(cfg["target"])) if d is not None}
        if len(dims) > 1:
            raise ConfigError("base and target dimensions differ")
        dim = cfg["dim"] if cfg["dim"] is not None else (dims.pop() if dims else 1)
        if dim < 1:
            raise ConfigError("key 'dim': must be >= 1")
        self.dim = dim
        self.schedule = parse_schedule(cfg["schedule"], cfg["time_clamp"])
        self.base = parse_measure(cfg["base"], dim, "base")
        self.target = parse_measure(cfg["target"], dim, "target")
        self.quad = QuadratureConfig(nodes_per_dim=cfg["nodes"], time_clamp=cfg["time_clamp"])

    def backend(self):
        kind = self.cfg["backend"]
        g0, g1 = as_gaussian(self.base), as_gaussian(self.target)
        if kind == "auto":
            kind = "gaussian_closed" if g0 is not None and g1 is not None and _commute(g0, g1) else "quadrature"
        if kind == "gaussian_closed":
            return GaussianDrift(self.base, self.target, self.schedule)
        if kind == "quadrature":
            return QuadratureDrift(self.base, self.target, self.schedule, self.quad)
        if not to_potential(self.base).is_standard_gaussian:
            raise ConfigError("backend 'empirical' needs base 'std'")
        pts = sample(self.target, self.cfg["n"], self.cfg["seed"])
        return EmpiricalDrift(pts, self.schedule, self.cfg["bandwidth"], self.cfg["threshold"], self.cfg["time_clamp"])


def _commute(g0, g1) -> bool:
    return bool(np.allclose(g0.cov @ g1.cov, g1.cov @ g0.cov, atol=1e-10))


# ---------------------------------------------------------------------------
# Output


def _plain(value):
    """Convert numpy scalars and arrays to JSON-ready Python objects."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else repr(v)
    return value


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    return "%.17g" % float(value)


def write_csv(path: Path, columns: list[str], rows) -> None:
    lines = [",".join(columns)]
    lines += [",".join(_cell(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


class Output:
    def __init__(self, out_dir: str, command: str, cfg: dict):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command, self.cfg = command, cfg
        self.checks: dict[str, bool] = {}
        self.results: dict = {}

    def curves(self, columns, rows):
        write_csv(self.dir / "curves.csv", columns, rows)

    def samples(self, points: np.ndarray):
        points = np.asarray(points).reshape(points.shape[0], -1)
        write_csv(self.dir / "samples.csv", [f"x{i}" for i in range(points.shape[1])], points.tolist())

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def finish(self) -> int:
        summary = {
            "command": self.command,
            "passed": self.passed,
            "checks": self.checks,
            "results": self.results,
            "config": self.cfg,
        }
        text = json.dumps(_plain(summary), indent=2, allow_nan=False)
        (self.dir / "summary.json").write_text(text + "\n")
        return EXIT_OK if self.passed else EXIT_CHECK_FAILED


# ---------------------------------------------------------------------------
# Commands


def _time_grid(exp: Experiment, t_range=None) -> np.ndarray:
    lo, hi = t_range or (exp.cfg["time_clamp"], 1.0 - exp.cfg["time_clamp"])
    return np.linspace(lo, hi, exp.cfg["steps"] + 1)


def cmd_schedule(exp: Experiment, out: Output):
    s = exp.schedule
    t = np.linspace(0.0, 1.0, exp.cfg["steps"] + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a, b, ad, bd = s._raw(t)
    rows = zip(t, a, b, ad, bd, a**2 + b**2)
    out.curves(["t", "alpha", "beta", "alpha_dot", "beta_dot", "alpha2_plus_beta2"], rows)
    ok, adm = check_admissible(s)
    out.checks["endpoints"] = check_endpoints(s).passed
    out.checks["derivatives"] = check_derivatives(s).passed
    out.results = {
        "name": s.name,
        "params": s.params,
        "endpoints": check_endpoints(s).to_dict(),
        "derivatives": check_derivatives(s).to_dict(),
        "admissible": adm.to_dict(),
    }


def cmd_drift(exp: Experiment, out: Output):
    t = exp.cfg["t"]
    backend = exp.backend()
    xs = verify.quantile_grid(exp.base, exp.target, exp.schedule, t)
    v = backend.velocity(t, xs)
    jac = backend.jacobian(t, xs)
    op = np.linalg.norm(jac, ord=2, axis=(-2, -1))
    top = np.linalg.eigvalsh(0.5 * (jac + np.swapaxes(jac, -1, -2)))[:, -1]
    d = exp.dim
    cols = ["t"] + [f"x{i}" for i in range(d)] + [f"v{i}" for i in range(d)] + ["dv_op", "dv_max_eig"]
    out.curves(cols, ([t, *x, *vv, o, e] for x, vv, o, e in zip(xs, v, op, top)))
    out.checks["finite"] = bool(np.all(np.isfinite(v)) and np.all(np.isfinite(jac)))
    out.results = {"backend": type(backend).__name__, "t": t, "max_dv_op": float(op.max()), "max_dv_eig": float(top.max())}


def _moment_rows(times, states):
    mean = states.mean(axis=1)
    var = states.var(axis=1)
    return mean, var


def cmd_flow(exp: Experiment, out: Output):
    backend = exp.backend()
    x0 = sample(exp.base, exp.cfg["paths"], exp.cfg["seed"]).points
    res = integrate_flow(backend, x0, n_steps=exp.cfg["steps"], with_jacobian=True)
    mean, var = _moment_rows(res.times, res.states)
    df = res.op_norms.max(axis=1)
    d = exp.dim
    cols = ["t", "measured_df"] + [f"mean{i}" for i in range(d)] + [f"var{i}" for i in range(d)]
    out.curves(cols, ([t, f, *m, *v] for t, f, m, v in zip(res.times, df, mean, var)))
    out.samples(res.endpoint)
    out.checks["finite"] = True
    out.results = {"backend": type(backend).__name__, "t_end": float(res.times[-1]), "endpoint_df": float(df[-1])}
    if isinstance(backend, GaussianDrift):
        exact = backend.flow_map(res.times[-1], x0)
        err = float(np.max(np.abs(exact - res.endpoint)))
        tol = exp.cfg["tol"] if exp.cfg["tol"] is not None else 1e-6
        out.results["closed_form_max_error"] = err
        out.checks["matches_closed_form"] = err <= tol


def cmd_sde(exp: Experiment, out: Output):
    backend = exp.backend()
    cfg = exp.cfg
    x0 = sample(exp.base, cfg["paths"], cfg["seed"]).points
    lo, hi = backend.t_range
    grid = np.linspace(lo, hi, cfg["steps"] + 1)
    every = max(1, cfg["steps"] // cfg["checkpoints"])
    marks = grid[::every]
    if marks[-1] != grid[-1]:
        marks = np.append(marks, grid[-1])
    res = sde_sample(backend, backend, cfg["eps"], x0, cfg["steps"], cfg["seed"] + 1, marks, scheme=cfg["scheme"])
    d, n = exp.dim, cfg["paths"]
    rows, worst_z = [], 0.0
    gaussian = isinstance(backend, GaussianDrift)
    for t, s in zip(res.times, res.samples):
        pts = s.points
        m, v = pts.mean(axis=0), pts.var(axis=0)
        if gaussian:
            ref_m, ref_S, _, _ = backend.moments(t)
            ref_v = np.diag(ref_S)
            se_m = np.sqrt(v / n)
            se_v = np.sqrt(np.var((pts - m) ** 2, axis=0) / n)
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.concatenate([np.abs(m - ref_m) / se_m, np.abs(v - ref_v) / se_v])
            z = np.where(np.isfinite(z), z, 0.0)
            worst_z = max(worst_z, float(z.max()))
        else:
            ref_m = ref_v = np.full(d, np.nan)
        rows.append([t, *m, *v, *ref_m, *ref_v])
    cols = ["t"] + [f"{p}{i}" for p in ("mean", "var", "ref_mean", "ref_var") for i in range(d)]
    out.curves(cols, rows)
    out.samples(res.final)
    out.checks["finite"] = True
    out.results = {"backend": type(backend).__name__, "eps": cfg["eps"], "scheme": cfg["scheme"]}
    if gaussian:
        # moments at every checkpoint within 4 Monte Carlo standard errors
        out.results["worst_standard_error_ratio"] = worst_z
        out.checks["moments_match"] = worst_z <= 4.0


def cmd_bounds(exp: Experiment, out: Output):
    cfg, s = exp.cfg, exp.schedule
    t = _time_grid(exp)
    p0, p1 = to_potential(exp.base), to_potential(exp.target)
    if cfg["theorem"] == "thm1":
        kappa = cfg["kappa"] if cfg["kappa"] is not None else p1.kappa
        curve = bounds.thm1_curve(s, kappa, t)
        out.results = {"theorem": "thm1", "kappa": kappa}
        if s.name.startswith("vm:"):
            report = bounds.suggested_schedule_bound(float(s.params["kappa"]), time_clamp=cfg["time_clamp"])
            out.results["variance_matched"] = report.to_dict()
    else:
        k0 = cfg["kappa0"] if cfg["kappa0"] is not None else p0.kappa
        e0 = cfg["eta0"] if cfg["eta0"] is not None else p0.eta
        k1 = cfg["kappa"] if cfg["kappa"] is not None else p1.kappa
        curve = bounds.thm2_curve(s, k0, e0, k1, t)
        out.results = {
            "theorem": "thm2",
            "kappa0": k0,
            "eta0": e0,
            "kappa1": k1,
            "corollary_constant": bounds.corollary_constant(k0, e0, k1),
            "caffarelli_constant": bounds.caffarelli_constant(e0, k1),
        }
    out.results["sup_abs_lambda"] = float(np.max(np.abs(curve.lam)))
    out.results["final_flow_bound"] = float(curve.flow_bound[-1])
    out.curves(["t", "lambda", "flow_bound"], zip(curve.times, curve.lam, curve.flow_bound))
    out.checks["finite"] = bool(np.all(np.isfinite(curve.lam)))


_CURVE_COLUMNS = ["t", "lambda", "flow_bound", "measured_dv", "measured_df", "margin"]


def _verify_bound(exp: Experiment, out: Output, which: str):
    cfg = exp.cfg
    backend = exp.backend()
    kw = dict(n_steps=cfg["steps"], tol=cfg["tol"], backend=backend)
    if which == "thm1":
        if not to_potential(exp.base).is_standard_gaussian:
            raise ConfigError("verify thm1 needs base 'std'")
        report = verify.verify_thm1(exp.target, exp.schedule, kappa=cfg["kappa"], **kw)
    else:
        report = verify.verify_thm2(
            exp.base, exp.target, exp.schedule, kappa0=cfg["kappa0"], eta0=cfg["eta0"], kappa1=cfg["kappa"], **kw
        )
    rows = report.curve_rows()
    out.curves(_CURVE_COLUMNS, ([r[c] for c in _CURVE_COLUMNS] for r in rows))
    out.results = report.summary()
    out.checks["bound_holds"] = report.passed


def cmd_verify_bl(exp: Experiment, out: Output):
    p = to_potential(exp.target)
    f, df = _TEST_FUNCTIONS[exp.cfg["f"]]
    res = verify.brascamp_lieb_check_1d(p, f, df)
    out.curves(["f", "variance", "bound", "margin"], [[exp.cfg["f"], res.variance, res.bound, res.margin]])
    out.results = {"variance": res.variance, "bound": res.bound, "margin": res.margin}
    out.checks["inequality_holds"] = res.passed


def cmd_verify_lemma(exp: Experiment, out: Output):
    cfg = exp.cfg
    dim = cfg["dim"] if cfg["dim"] is not None else 4
    rep = verify.matrix_lemma_check(cfg["trials"], dim, cfg["seed"], commuting=cfg["commuting"])
    tol = rep.tol if cfg["tol"] is None else cfg["tol"]
    out.curves(
        ["trial", "min_eigenvalue", "passed"],
        ([k, e, bool(e >= -tol)] for k, e in enumerate(rep.eigenvalues)),
    )
    out.results = {
        "trials": rep.trials,
        "dim": rep.dim,
        "commuting": cfg["commuting"],
        "min_eigenvalue": rep.min_eigenvalue,
        "failures": int(np.sum(rep.eigenvalues < -tol)),
        "worst": rep.worst,
    }
    out.checks["lemma_holds"] = out.results["failures"] == 0


def cmd_verify_estimator(exp: Experiment, out: Output):
    cfg = exp.cfg
    seeds = list(range(cfg["seeds"])) if isinstance(cfg["seeds"], int) else cfg["seeds"]
    rows = verify.estimator_study(
        exp.target, exp.schedule, cfg["n_list"], seeds, t=cfg["t"], h=cfg["bandwidth"], eps=cfg["threshold"]
    )
    out.curves(
        ["n", "median_error", "min_error", "max_error"],
        ([r.n, r.median_error, min(r.errors), max(r.errors)] for r in rows),
    )
    med = [r.median_error for r in rows]
    out.results = {"n_list": [r.n for r in rows], "median_errors": med, "errors": [r.errors for r in rows]}
    out.checks["strictly_decreasing"] = all(b < a for a, b in zip(med, med[1:]))


def cmd_estimate(exp: Experiment, out: Output):
    cfg = exp.cfg
    if not to_potential(exp.base).is_standard_gaussian:
        raise ConfigError("estimate needs base 'std'")
    t = cfg["t"]
    est = EmpiricalDrift(
        sample(exp.target, cfg["n"], cfg["seed"]), exp.schedule, cfg["bandwidth"], cfg["threshold"], cfg["time_clamp"]
    )
    exact = verify._exact_backend(exp.target, exp.schedule)
    xs = verify.quantile_grid(exp.base, exp.target, exp.schedule, t)
    v_hat, v_ref = est.velocity(t, xs), exact.velocity(t, xs)
    err = np.linalg.norm(v_hat - v_ref, axis=-1)
    d = exp.dim
    cols = ["t"] + [f"x{i}" for i in range(d)] + [f"v_hat{i}" for i in range(d)] + [f"v_exact{i}" for i in range(d)] + ["error"]
    out.curves(cols, ([t, *x, *a, *b, e] for x, a, b, e in zip(xs, v_hat, v_ref, err)))
    out.results = {"t": t, "n": cfg["n"], "rms_error": float(np.sqrt(np.mean(err**2))), "max_error": float(err.max())}
    out.checks["finite"] = bool(np.all(np.isfinite(v_hat)))


COMMANDS = {
    "schedule": cmd_schedule,
    "drift": cmd_drift,
    "flow": cmd_flow,
    "sde": cmd_sde,
    "bounds": cmd_bounds,
    "estimate": cmd_estimate,
    "verify thm1": lambda e, o: _verify_bound(e, o, "thm1"),
    "verify thm2": lambda e, o: _verify_bound(e, o, "thm2"),
    "verify bl": cmd_verify_bl,
    "verify lemma-a2": cmd_verify_lemma,
    "verify estimator": cmd_verify_estimator,
}


# ---------------------------------------------------------------------------
# Argument parsing


def _theorem(value: str) -> str:
    value = {"1": "thm1", "2": "thm2"}.get(value, value)
    if value not in _CHOICES["theorem"]:
        raise argparse.ArgumentTypeError(f"expected thm1 or thm2, got {value!r}")
    return value


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="JSON file of configuration keys (flags take precedence)")
    p.add_argument("--out", default="out", help="output directory (default: out)")
    p.add_argument("--schedule", help="linear | trig | vm:<kappa> | ou | expr:<alpha>;<beta>")
    p.add_argument("--base", help="std | gaussian_scaled:<k> | normal:<var> | quartic1d | logcosh1d | JSON {mean, cov}")
    p.add_argument("--target", help="same forms as --base")
    p.add_argument("--dim", type=int)
    p.add_argument("--backend", choices=_CHOICES["backend"])
    p.add_argument("--nodes", type=int, help="quadrature nodes per dimension")
    p.add_argument("--time-clamp", dest="time_clamp", type=float)
    p.add_argument("--steps", type=int, help="time steps (grid intervals)")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--t", type=float, help="evaluation time")
    p.add_argument("--eps", type=float, help="SDE knob: 1 is the deterministic flow")
    p.add_argument("--scheme", choices=_CHOICES["scheme"])
    p.add_argument("--paths", type=int)
    p.add_argument("--checkpoints", type=int)
    p.add_argument("--n", type=int, help="target sample size for empirical estimates")
    p.add_argument("--bandwidth", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--kappa", type=float, help="override the target's log-concavity constant")
    p.add_argument("--kappa0", type=float, help="override the base's log-concavity constant")
    p.add_argument("--eta0", type=float, help="override the base's log-convexity constant")
    p.add_argument("--theorem", "--thm", dest="theorem", type=_theorem, help="thm1 | thm2 (or 1 | 2)")
    p.add_argument("--trials", type=int)
    p.add_argument("--commuting", action="store_true", default=None)
    p.add_argument("--f", choices=_CHOICES["f"], help="test function for the Brascamp-Lieb check")
    p.add_argument("--n-list", dest="n_list", type=lambda s: [int(v) for v in s.split(",")])
    p.add_argument("--seeds", type=int, help="number of seeds 0..k-1")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="interpflow", description="Stochastic interpolant flows and their Lipschitz bounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "schedule": ("check", "evaluate and validate a schedule"),
        "drift": ("eval", "evaluate the drift and its Jacobian at one time"),
        "flow": ("run", "integrate the flow map with its Jacobian"),
        "sde": ("run", "simulate the stochastic sampler"),
        "bounds": ("eval", "evaluate the closed-form bound curves"),
        "estimate": ("run", "compare the empirical drift estimator with the exact drift"),
    }
    for name, (action, text) in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        # optional action word, e.g. `bounds eval`, accepted for readability
        p.add_argument("action", nargs="?", choices=[action])
    ver = sub.add_parser("verify", help="run a verification harness")
    vsub = ver.add_subparsers(dest="check", required=True)
    for name in ("thm1", "thm2", "bl", "lemma-a2", "estimator"):
        vsub.add_parser(name, parents=[common])
    return parser


_NON_CONFIG = {"command", "check", "action", "config", "out"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command if args.command != "verify" else f"verify {args.check}"
    flags = {k: v for k, v in vars(args).items() if k not in _NON_CONFIG}
    try:
        file_cfg = load_config_file(args.config) if args.config else {}
        cfg = resolve_config(file_cfg, flags)
        exp = Experiment(cfg)
        out = Output(args.out, command, cfg)
        COMMANDS[command](exp, out)
    except InterpFlowError as exc:
        print(f"interpflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = out.finish()
    status = "passed" if code == EXIT_OK else "FAILED"
    failed = [k for k, v in out.checks.items() if not v]
    print(f"{command}: {status}" + (f" ({', '.join(failed)})" if failed else "") + f" -> {out.dir}")
    return code
