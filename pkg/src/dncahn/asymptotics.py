"""Parameter sweeps for the singular limits delta -> 0 and eps -> 0,
continuous-dependence probes and log-log rate fitting.

Every sweep member is compared with a reference computed on the same grid,
time step and lambda, so that discretization bias cancels in differences.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .grid import spacetime_norms
from .monotone import truncation
from .presets import WaveForcing
from .stepper import NonConvergence, solve

PARAMETERS = ("eps", "delta")
REFERENCES = ("limit_solve", "finest")


class DegenerateFit(ValueError):
    """All errors are at roundoff level; the slope is undefined."""


@dataclass(frozen=True)
class SweepConfig:
    """A sweep over ``parameter`` in ``values`` (strictly decreasing).

    ``reference="limit_solve"`` compares with a solve at parameter 0,
    ``"finest"`` with the smallest listed value (which then drops out of the fit).
    ``prepare_data=False`` keeps u0 and g fixed across a delta sweep instead of
    smoothing them with alpha = sqrt(delta).
    """

    base: object
    parameter: str
    values: tuple
    reference: str = "limit_solve"
    norms: tuple = ("L2V0", "H1H")
    prepare_data: bool = True

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if self.parameter not in PARAMETERS:
            raise ValueError(f"sweep parameter must be one of {PARAMETERS}")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference strategy must be one of {REFERENCES}")
        if len(values) < 3:
            raise ValueError("a sweep needs at least three parameter values")
        if not all(v > 0 for v in values):
            raise ValueError("sweep values must be positive")
        if not all(a > b for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly decreasing")
        other = "delta" if self.parameter == "eps" else "eps"
        if self.reference == "limit_solve" and not getattr(self.base, other) > 0:
            raise ValueError(f"a limit_solve reference needs {other} > 0")


@dataclass
class RatePoint:
    value: float
    error: float
    err_mu: float
    err_u: float
    extra: dict = field(default_factory=dict)


@dataclass
class RateReport:
    """Sweep outcome.  ``slope`` fits ``error`` against the parameter;
    ``slopes`` holds fits of the individual quantities."""

    parameter: str
    points: list
    slope: float
    fit_residual: float
    n_points: int
    slopes: dict
    reference: dict
    constant: Optional[float] = None
    bound_holds: Optional[bool] = None

    @property
    def values(self):
        return np.array([p.value for p in self.points])

    @property
    def errors(self):
        return np.array([p.error for p in self.points])

    def monotone(self, key="error"):
        """True if the quantity does not increase as the parameter decreases."""
        vals = [getattr(p, key) if hasattr(p, key) else p.extra[key] for p in self.points]
        return bool(all(b <= a for a, b in zip(vals, vals[1:])))


# ---------------------------------------------------------------------------
# data preparation


def smooth_data(f, alpha, grid):
    """Solve v - alpha * lap_N(v) = f (an elliptic smoothing that keeps the
    mean and the range of f)."""
    if not alpha > 0:
        raise ValueError("smoothing parameter must be positive")
    v = grid.solve_shifted_neumann(alpha, f)
    if not np.all(np.isfinite(v)):
        raise np.linalg.LinAlgError("smoothing system is singular")
    return v


@dataclass(frozen=True)
class SmoothedForcing:
    """g_alpha(t) = smooth_data(g(t), alpha), applied at each sampled time."""

    base: object
    alpha: float
    grid: object

    def __call__(self, x, t):
        return smooth_data(np.asarray(self.base(x, t), dtype=float), self.alpha, self.grid)

    def describe(self):
        inner = getattr(self.base, "describe", lambda: repr(self.base))()
        return f"smoothed(alpha={self.alpha!r}, {inner})"


@dataclass(frozen=True)
class TruncatedForcing:
    """g_eps(t) = T_eps(g(t)), entrywise clamp at 1/eps."""

    base: object
    eps: float

    def __call__(self, x, t):
        return truncation(self.eps, np.asarray(self.base(x, t), dtype=float))

    def describe(self):
        inner = getattr(self.base, "describe", lambda: repr(self.base))()
        return f"truncated(eps={self.eps!r}, {inner})"


def _forcing_l2h(spec, f1, f2):
    """Time-discrete L2(0,T;H) distance of two forcing rules on the step times."""
    grid = spec.grid
    diffs = np.array([f1(grid.x, t) - f2(grid.x, t) for t in spec.times[1:]])
    return spacetime_norms(grid, spec.tau, u=diffs, which="L2H")


def prepare_delta_data(spec, delta):
    """Smoothed data (u0_delta, g_delta) with alpha = sqrt(delta).

    Returns ``(u0d, gd, info)`` where ``info`` holds the discrepancies
    ``u0`` (l2 norm of u0d - u0) and ``g`` (L2H norm of gd - g).
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return np.array(spec.u0), spec.forcing, {"u0": 0.0, "g": 0.0}
    alpha = float(np.sqrt(delta))
    grid = spec.grid
    u0d = smooth_data(spec.u0, alpha, grid)
    gd = SmoothedForcing(spec.forcing, alpha, grid)
    info = {"u0": grid.norm_l2(u0d - spec.u0), "g": _forcing_l2h(spec, gd, spec.forcing)}
    return u0d, gd, info


def prepare_eps_forcing(g, eps):
    """Truncate a forcing rule at level 1/eps."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return TruncatedForcing(g, float(eps))


# ---------------------------------------------------------------------------
# sweeps


def _solve_tagged(spec, label):
    try:
        return solve(spec)
    except NonConvergence as exc:
        raise type(exc)(f"{label}: {exc}", exc.residual, exc.step) from exc


def _differences(a, b):
    grid, tau = a.spec.grid, a.spec.tau
    err_mu = spacetime_norms(grid, tau, mu=a.mu - b.mu, which="L2V0")
    err_u = spacetime_norms(grid, tau, u=a.u[1:] - b.u[1:], u0=a.u[0] - b.u[0], which="H1H")
    return err_mu, err_u


def _fit_all(values, points, keys):
    slopes = {}
    for key in keys:
        ys = [getattr(p, key) if hasattr(p, key) else p.extra[key] for p in points]
        try:
            slopes[key] = fit_rate(list(zip(values, ys)))[0]
        except (DegenerateFit, ValueError):
            slopes[key] = float("nan")
    return slopes


def _run_sweep(cfg, member_spec, extras):
    """Shared driver; ``member_spec(value)`` returns (spec, extra dict)."""
    base, name = cfg.base, cfg.parameter
    if cfg.reference == "limit_solve":
        ref_value = 0.0
        ref_spec = base.replace(**{name: 0.0})
    else:
        ref_value = cfg.values[-1]
        ref_spec, _ = member_spec(ref_value)
    ref = _solve_tagged(ref_spec, f"{name}={ref_value!r} (reference)")

    points = []
    for v in sorted(cfg.values, reverse=True):
        if cfg.reference == "finest" and v == ref_value:
            continue
        spec, extra = member_spec(v)
        traj = _solve_tagged(spec, f"{name}={v!r}")
        err_mu, err_u = _differences(traj, ref)
        extra.update(extras(v, traj))
        points.append(RatePoint(v, err_mu + err_u, err_mu, err_u, extra))

    values = [p.value for p in points]
    slope, resid = fit_rate([(p.value, p.error) for p in points])
    slopes = _fit_all(values, points, ["err_mu", "err_u"] + sorted(points[0].extra))
    reference = {"strategy": cfg.reference, name: ref_value, "lam": base.lam,
                 "tau": base.tau, "N": base.grid.N, "L": base.grid.L}
    return RateReport(name, points, slope, resid, len(points), slopes, reference)


def delta_sweep(cfg):
    """Error of the delta-regularized solution against the delta = 0 limit.

    error = L2V0 norm of the mu difference + H1H norm of the u difference;
    rhs = delta**(1/4) + |u0d - u0| + |gd - g|.  The constant C is the
    largest error/rhs ratio, so every point satisfies error <= C * rhs.
    """
    if cfg.parameter != "delta":
        raise ValueError("delta_sweep needs parameter = 'delta'")
    base = cfg.base
    if not base.eps > 0:
        raise ValueError("delta_sweep needs eps > 0 in the base problem")

    def member(d):
        if cfg.prepare_data:
            u0d, gd, info = prepare_delta_data(base, d)
        else:
            u0d, gd, info = base.u0, base.forcing, {"u0": 0.0, "g": 0.0}
        extra = {"data_u0": info["u0"], "data_g": info["g"],
                 "rhs": d ** 0.25 + info["u0"] + info["g"]}
        return base.replace(delta=d, u0=u0d, forcing=gd), extra

    report = _run_sweep(cfg, member, lambda v, traj: {})
    ratios = np.array([p.error / p.extra["rhs"] for p in report.points])
    report.constant = float(ratios.max())
    report.bound_holds = bool(np.all(report.errors <= report.constant * np.array(
        [p.extra["rhs"] for p in report.points]) * (1 + 1e-12)))
    return report


def eps_sweep(cfg):
    """Error of the eps-regularized solution against the eps = 0 limit, plus
    the vanishing-viscosity witness V_eps = eps * max_k |w^k|."""
    if cfg.parameter != "eps":
        raise ValueError("eps_sweep needs parameter = 'eps'")
    base = cfg.base
    if not base.delta > 0:
        raise ValueError("eps_sweep needs delta > 0 in the base problem")

    def member(e):
        return base.replace(eps=e, forcing=prepare_eps_forcing(base.forcing, e)), {}

    def witness(e, traj):
        grid = traj.spec.grid
        return {"V": e * max(grid.norm_l2(w) for w in traj.w)}

    return _run_sweep(cfg, member, witness)


# ---------------------------------------------------------------------------
# continuous dependence


@dataclass
class DependenceReport:
    scales: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def ratios(self):
        return self.lhs / self.rhs

    @property
    def spread(self):
        r = self.ratios
        return float(r.max() / r.min())


def default_profiles(grid):
    """Perturbation shapes: 0.5*cos(2 pi x/L) for u0 and cos(2 pi x/L) for g."""
    return 0.5 * np.cos(2 * np.pi * grid.x / grid.L), WaveForcing(1.0, 2, 0.0, grid.L)


def _perturbed(spec, eta, u_profile, g_profile):
    from .presets import PerturbedForcing

    return spec.replace(u0=spec.u0 + eta * u_profile, a0=None, b0=None,
                        forcing=PerturbedForcing(spec.forcing, g_profile, eta))


def continuous_dependence_probe(spec, scales, u_profile=None, g_profile=None):
    """LHS/RHS of the stability estimate for data perturbed by eta * profile.

    LHS = |mu1 - mu2|^2_{L2V0} + |u1 - u2|^2_{H1H} + |u1 - u2|^2_{LinfV},
    RHS = |u0_1 - u0_2|^2_V + |g1 - g2|^2_{L2H}.
    """
    if not (spec.eps > 0 and spec.delta > 0):
        raise ValueError("continuous dependence needs eps > 0 and delta > 0")
    grid = spec.grid
    du, dg = default_profiles(grid)
    u_profile = du if u_profile is None else grid.check(u_profile)
    g_profile = dg if g_profile is None else g_profile
    ref = _solve_tagged(spec, "unperturbed")
    lhs, rhs = [], []
    for eta in scales:
        pert = _perturbed(spec, float(eta), u_profile, g_profile)
        traj = _solve_tagged(pert, f"eta={eta!r}")
        err_mu, err_u = _differences(traj, ref)
        du_all = traj.u[1:] - ref.u[1:]
        linf_v = spacetime_norms(grid, spec.tau, u=du_all, which="LinfV")
        lhs.append(err_mu ** 2 + err_u ** 2 + linf_v ** 2)
        rhs.append(grid.norm_h1(pert.u0 - spec.u0) ** 2
                   + _forcing_l2h(spec, pert.forcing, spec.forcing) ** 2)
    return DependenceReport(np.asarray(scales, float), np.array(lhs), np.array(rhs))


# ---------------------------------------------------------------------------


def fit_rate(values):
    """Least-squares slope of log(error) against log(param).

    Returns ``(slope, residual)`` with residual the largest absolute deviation
    of log(error) from the fitted line.
    """
    pairs = np.asarray(values, dtype=float)
    if pairs.ndim != 2 or pairs.shape[1] != 2 or pairs.shape[0] < 3:
        raise ValueError("fit_rate needs at least three (param, error) pairs")
    p, e = pairs[:, 0], pairs[:, 1]
    if np.all(np.abs(e) < 1e-13):
        raise DegenerateFit("exact: all errors below 1e-13, slope undefined")
    if not (np.all(p > 0) and np.all(e > 0)):
        raise ValueError("fit_rate needs positive parameters and errors")
    X, Y = np.log(p), np.log(e)
    slope, icept = np.polyfit(X, Y, 1)
    return float(slope), float(np.max(np.abs(Y - (slope * X + icept))))
