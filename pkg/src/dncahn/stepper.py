"""Implicit Euler (Rothe) time stepping for the Yosida-regularized system.

Per step the unknown is the difference quotient w = (u^k - u^{k-1})/tau.
The chemical potential is eliminated,

    mu = eps*w + beta_lam(w) - delta*lap_N(u) + lam*u + gamma_lam(u)
         - K*T_lam(J_lam(u)) + g^k,          u = u^{k-1} + tau*w,

and the remaining equation w - lap_D(mu) = 0 is solved by damped Newton.

Convergence is measured on lap_D^{-1} w - mu, the same equation with the
Dirichlet Laplacian inverted.  The raw residual w - lap_D(mu) cannot drop
below roughly eps_mach * delta * 16/h^4 * |u| because rounding u to a float
is amplified by the fourth-order operator (about 3e-8 at N = 64, delta = 1);
the inverted form has a floor near eps_mach * delta * 4/h^2.

The stored chemical potential of an accepted step is mu = lap_D^{-1} w, so
the conservation law w = lap_D(mu) (and with it the boundary-flux balance)
holds to roundoff, while the constitutive relation carries the Newton
residual, reported as ``residual``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from .grid import Grid1D, spacetime_norms
from .monotone import DomainError, GraphSpec, PotentialSpec

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-10
NEWTON_MAXITER = 50
LINE_SEARCH_HALVINGS = 30
FIXED_POINT_RELAXATION = 0.5
FIXED_POINT_MAXITER = 500
POLISH_STEPS = 3
POLISH_FLOOR = 1e-3


class NonConvergence(RuntimeError):
    def __init__(self, message, residual=np.nan, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class DomainEscape(NonConvergence):
    """Newton iterates could not be kept inside (a, b)."""


def _zero_forcing(x, t):
    return np.zeros_like(x)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A complete problem instance.

    ``forcing`` is any callable ``(x, t) -> array`` (see :mod:`dncahn.presets`).
    ``a0``/``b0`` bound the initial datum; they default to its range.
    """

    grid: Grid1D
    graph: GraphSpec
    potential: PotentialSpec
    u0: np.ndarray
    forcing: Callable = _zero_forcing
    eps: float = 1.0
    delta: float = 1.0
    lam: float = 1e-5
    tau: float = 1e-3
    T: float = 0.1
    a0: Optional[float] = None
    b0: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        u0 = self.grid.check(np.array(self.u0, dtype=float))
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        if self.eps < 0 or self.delta < 0:
            raise ValueError("eps and delta must be nonnegative")
        if self.eps == 0 and self.delta == 0:
            raise ValueError("eps = 0 and delta = 0 together: at least one regularization must be active")
        if not (self.lam > 0 and self.tau > 0 and self.T > 0):
            raise ValueError("lam, tau and T must be positive")
        n = self.T / self.tau
        if abs(n - round(n)) > 1e-9 * max(1.0, n) or round(n) < 1:
            raise ValueError(f"T/tau = {n!r} is not a positive integer")
        if not np.all(np.isfinite(u0)):
            raise ValueError("initial datum has non-finite entries")
        a0 = float(u0.min()) if self.a0 is None else float(self.a0)
        b0 = float(u0.max()) if self.b0 is None else float(self.b0)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "b0", b0)
        pot = self.potential
        if not (pot.a < a0 <= b0 < pot.b):
            raise ValueError(f"[a0, b0] = [{a0}, {b0}] is not inside ({pot.a}, {pot.b})")
        if u0.min() < a0 - 1e-14 or u0.max() > b0 + 1e-14:
            raise ValueError("initial datum leaves [a0, b0]")

    @property
    def n_steps(self):
        return int(round(self.T / self.tau))

    @property
    def times(self):
        return self.tau * np.arange(self.n_steps + 1)

    def g(self, t):
        return self.grid.check(np.asarray(self.forcing(self.grid.x, t), dtype=float))

    def replace(self, **changes):
        return replace(self, **changes)

    def parameters(self):
        """Every parameter that influences a computation, for run headers."""
        describe = getattr(self.forcing, "describe", None)
        return {
            "name": self.name,
            "L": self.grid.L, "N": self.grid.N,
            "eps": self.eps, "delta": self.delta, "lam": self.lam,
            "tau": self.tau, "T": self.T, "a0": self.a0, "b0": self.b0,
            "graph": self.graph.describe(),
            "potential": self.potential.describe(),
            "forcing": describe() if describe else repr(self.forcing),
        }


@dataclass
class StepState:
    k: int
    t: float
    u: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    xi: np.ndarray
    newton_iters: int
    residual: float
    residual_w: float = np.nan


@dataclass
class Trajectory:
    """Step values of a solve; index 0 of ``u`` and ``t`` is the initial state."""

    spec: ProblemSpec
    t: np.ndarray
    u: np.ndarray
    mu: np.ndarray
    w: np.ndarray
    xi: np.ndarray
    g: np.ndarray
    newton_iters: np.ndarray
    residual: np.ndarray
    residual_w: Optional[np.ndarray] = None
    ledger: object = field(default=None, repr=False)

    @property
    def n_steps(self):
        return self.mu.shape[0]

    def state(self, k):
        """StepState of step k >= 1."""
        return StepState(k, float(self.t[k]), self.u[k], self.mu[k - 1], self.w[k - 1],
                         self.xi[k - 1], int(self.newton_iters[k - 1]),
                         float(self.residual[k - 1]),
                         np.nan if self.residual_w is None else float(self.residual_w[k - 1]))

    @property
    def states(self):
        return [self.state(k) for k in range(1, self.n_steps + 1)]

    def norm(self, which):
        return spacetime_norms(self.spec.grid, self.spec.tau, u=self.u[1:], mu=self.mu,
                               u0=self.u[0], which=which)


# ---------------------------------------------------------------------------
# residual and Jacobian


def _potential_part(pot, lam, u):
    """Value and derivative of lam*u + gamma_lam(u) - K*T_lam(J_lam(u))."""
    J = np.asarray(pot.gamma_resolvent(lam, u))
    gp = np.asarray(pot.gamma_prime(J))
    inside = np.abs(J) < 1.0 / lam
    value = lam * u + pot._yosida_from(lam, u, J) - pot.K * np.clip(J, -1.0 / lam, 1.0 / lam)
    deriv = lam + (gp - pot.K * inside) / (1.0 + lam * gp)
    return value, deriv


def _assemble(spec, u_prev, w, g_k):
    grid = spec.grid
    u = u_prev + spec.tau * w
    if not np.all(spec.potential.in_domain(u)):
        raise DomainError("iterate left the domain of the potential")
    xi = np.asarray(spec.graph.yosida(spec.lam, w))
    pv, pd = _potential_part(spec.potential, spec.lam, u)
    mu = spec.eps * w + xi - spec.delta * grid.lap_neumann(u) + pv + g_k
    r1 = w - grid.lap_dirichlet(mu)
    diag = spec.eps + np.asarray(spec.graph.yosida_derivative(spec.lam, w)) + spec.tau * pd
    return r1, mu, xi, u, diag


def step_residual(spec, u_prev, w, g_k):
    """Residual (r1, r2, mu) of one implicit step; r2 is identically zero.

    Raises :class:`DomainError` if u = u_prev + tau*w leaves (a, b).
    """
    r1, mu, _, _, _ = _assemble(spec, np.asarray(u_prev, float), np.asarray(w, float),
                                np.asarray(g_k, float))
    return r1, np.zeros_like(r1), mu


def _jacobian(grid, diag, stiff):
    """Banded d r1/dw = I - lap_D @ (diag(diag) - stiff*lap_N)."""
    ab = stiff * grid.bilaplacian_banded
    ab[1:4] -= grid.lap_dirichlet_banded * diag[None, :]
    ab[2] += 1.0
    return ab


def _newton(evaluate, w0, tol, stiff, grid, what="step"):
    """Damped Newton on r(w) = 0 with a chord fixed-point fallback.

    ``evaluate(w)`` returns (r, aux, diag) or raises DomainError.  The merit
    and stopping test use |lap_D^{-1} r|_sup.  Returns (w, aux, iters,
    merit, |r|_sup).
    """
    lap_d = grid.lap_dirichlet_banded

    def _sup(r):
        return float(np.max(np.abs(solve_banded((1, 1), lap_d, r))))

    w = np.array(w0, dtype=float)
    try:
        r, aux, diag = evaluate(w)
    except DomainError:
        w = np.zeros_like(w)
        r, aux, diag = evaluate(w)
    res = _sup(r)
    iters = 0
    escaped = False
    stagnated = False
    while res > tol and iters < NEWTON_MAXITER:
        d = solve_banded((2, 2), _jacobian(grid, diag, stiff), -r)
        iters += 1
        alpha, accepted = 1.0, False
        for _ in range(LINE_SEARCH_HALVINGS + 1):
            trial = w + alpha * d
            try:
                rt, auxt, diagt = evaluate(trial)
            except DomainError:
                escaped = True
                alpha *= 0.5
                continue
            if _sup(rt) < (1.0 - 1e-4 * alpha) * res:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            stagnated = True
            break
        escaped = False
        w, r, aux, diag = trial, rt, auxt, diagt
        res = _sup(r)

    if res <= tol:
        # a few extra steps drive the residual to roundoff level
        for _ in range(POLISH_STEPS):
            if res <= POLISH_FLOOR * tol:
                break
            d = solve_banded((2, 2), _jacobian(grid, diag, stiff), -r)
            try:
                rt, auxt, diagt = evaluate(w + d)
            except DomainError:
                break
            if _sup(rt) >= 0.5 * res:
                if _sup(rt) < res:
                    w, r, aux, diag, res = w + d, rt, auxt, diagt, _sup(rt)
                break
            w, r, aux, diag = w + d, rt, auxt, diagt
            res = _sup(r)
            iters += 1
        return w, aux, iters, res, float(np.max(np.abs(r)))

    if stagnated or iters >= NEWTON_MAXITER:
        log.debug("%s: Newton stagnated at residual %.3e, chord fallback", what, res)
        ab = _jacobian(grid, diag, stiff)
        for _ in range(FIXED_POINT_MAXITER):
            trial = w - FIXED_POINT_RELAXATION * solve_banded((2, 2), ab, r)
            try:
                rt, auxt, diagt = evaluate(trial)
            except DomainError:
                escaped = True
                break
            w, r, aux, diag = trial, rt, auxt, diagt
            res = _sup(r)
            iters += 1
            if res <= tol:
                return w, aux, iters, res, float(np.max(np.abs(r)))
            if not np.isfinite(res):
                break
    if escaped:
        raise DomainEscape(f"{what}: iterates escape the domain of the potential", res)
    raise NonConvergence(f"{what}: no convergence, residual {res:.3e}", res)


def newton_step_solve(spec, u_prev, g_k, w_init=None, k=None):
    """Solve one implicit step and return its :class:`StepState`."""
    u_prev = spec.grid.check(u_prev)
    g_k = spec.grid.check(g_k)
    if not np.all(spec.potential.in_domain(u_prev)):
        raise DomainError("previous state outside the domain of the potential")
    tol = NEWTON_TOL * (1.0 + float(np.max(np.abs(g_k))))

    def evaluate(w):
        r1, mu, xi, u, diag = _assemble(spec, u_prev, w, g_k)
        return r1, (mu, xi, u), diag

    w0 = np.zeros(spec.grid.N) if w_init is None else w_init
    w, (mu_c, xi, u), iters, _, _ = _newton(evaluate, w0, tol, spec.tau * spec.delta,
                                             spec.grid, what=f"step {k}")
    mu = solve_banded((1, 1), spec.grid.lap_dirichlet_banded, w)
    res = float(np.max(np.abs(mu - mu_c)))
    res_w = float(np.max(np.abs(w - spec.grid.lap_dirichlet(mu))))
    k = 0 if k is None else k
    return StepState(k, k * spec.tau, u, mu, w, xi, iters, res, res_w)


def solve(spec, warm_start=True):
    """Run all T/tau steps; the energy ledger is filled on return."""
    from .diagnostics import energy_ledger

    n, N = spec.n_steps, spec.grid.N
    u = np.empty((n + 1, N))
    mu, w, xi, g = (np.empty((n, N)) for _ in range(4))
    iters = np.zeros(n, dtype=int)
    res = np.zeros(n)
    res_w = np.zeros(n)
    u[0] = spec.u0
    times = spec.times
    w_prev = np.zeros(N)
    for k in range(1, n + 1):
        g_k = spec.g(times[k])
        try:
            st = newton_step_solve(spec, u[k - 1], g_k, w_prev if warm_start else None, k=k)
        except NonConvergence as exc:
            exc.step = k
            raise
        u[k], mu[k - 1], w[k - 1], xi[k - 1], g[k - 1] = st.u, st.mu, st.w, st.xi, g_k
        iters[k - 1], res[k - 1], res_w[k - 1] = st.newton_iters, st.residual, st.residual_w
        w_prev = st.w
    traj = Trajectory(spec, times, u, mu, w, xi, g, iters, res, res_w)
    traj.ledger = energy_ledger(traj)
    return traj


def initial_rates(spec):
    """Initial (mu0, w0, xi0) from w0 = lap_D(mu0), mu0 = eps*w0 + beta_lam(w0) + z0.

    z0 = -delta*lap_N(u0) + psi'(u0) + g(0) uses the unregularized psi'.
    """
    if not spec.eps > 0:
        raise ValueError("initial rates need eps > 0")
    grid = spec.grid
    z0 = (-spec.delta * grid.lap_neumann(spec.u0)
          + np.asarray(spec.potential.psi_prime(spec.u0)) + spec.g(0.0))
    tol = NEWTON_TOL * (1.0 + float(np.max(np.abs(z0))))

    def evaluate(w):
        xi = np.asarray(spec.graph.yosida(spec.lam, w))
        mu = spec.eps * w + xi + z0
        diag = spec.eps + np.asarray(spec.graph.yosida_derivative(spec.lam, w))
        return w - grid.lap_dirichlet(mu), (mu, xi), diag

    w, (_, xi), _, _, _ = _newton(evaluate, np.zeros(grid.N), tol, 0.0, grid,
                                  what="initial rates")
    mu = solve_banded((1, 1), grid.lap_dirichlet_banded, w)
    return mu, w, xi
