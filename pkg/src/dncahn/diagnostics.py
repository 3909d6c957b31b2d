"""Discrete counterparts of the structural estimates: energy ledger,
maximum-principle bounds and the mass/flux identity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize


class ThresholdNotFound(RuntimeError):
    """psi' never reaches the requested level on the domain."""


@dataclass
class EnergyLedger:
    """Per-step energy bookkeeping; ``F`` has n+1 entries, the rest n."""

    F: np.ndarray
    D_grad: np.ndarray
    D_visc: np.ndarray
    D_beta: np.ndarray
    S: np.ndarray
    C: np.ndarray

    def imbalance(self):
        """F_k - F_{k-1} + dissipation - source - correction, per step."""
        return (np.diff(self.F) + self.D_grad + self.D_visc + self.D_beta
                - self.S - self.C)


@dataclass
class BoundReport:
    M: float
    a_bar: float
    b_bar: float
    a0_prime: float
    b0_prime: float
    u_min: float
    u_max: float
    passed: bool
    strictly_inside: bool


def free_energy(spec, u):
    """h*sum psi(u) + delta/2 |u|_{1,N}^2 + lam/2 |u|^2."""
    grid = spec.grid
    u = grid.check(u)
    bulk = grid.integral(np.asarray(spec.potential.psi(u)))
    return (bulk + 0.5 * spec.delta * grid.h1_seminorm(u, "neumann") ** 2
            + 0.5 * spec.lam * grid.norm_l2(u) ** 2)


def energy_ledger(traj):
    spec, grid = traj.spec, traj.spec.grid
    tau, h = spec.tau, grid.h
    F = np.array([free_energy(spec, u) for u in traj.u])
    D_grad = tau * np.array([grid.h1_seminorm(m, "dirichlet") ** 2 for m in traj.mu])
    D_visc = tau * spec.eps * h * np.sum(traj.w ** 2, axis=1)
    D_beta = tau * h * np.sum(traj.xi * traj.w, axis=1)
    S = -tau * h * np.sum(traj.g * traj.w, axis=1)
    du = np.diff(traj.u, axis=0)
    C = 0.5 * spec.potential.K * h * np.sum(du ** 2, axis=1)
    return EnergyLedger(F, D_grad, D_visc, D_beta, S, C)


def energy_inequality_check(traj):
    """Largest positive part of the per-step energy imbalance."""
    ledger = traj.ledger if traj.ledger is not None else energy_ledger(traj)
    if ledger.D_grad.size == 0:
        return 0.0
    return float(max(0.0, np.max(ledger.imbalance())))


def flux_identity_check(traj):
    """max_k |L*(mean u^k - mean u^{k-1})/tau - (flux_R - flux_L)(mu^k)|,
    normalized by max(1, |mu^k|_sup)."""
    spec, grid = traj.spec, traj.spec.grid
    worst = 0.0
    for k in range(1, traj.u.shape[0]):
        mu = traj.mu[k - 1]
        lhs = grid.L * (grid.mean(traj.u[k]) - grid.mean(traj.u[k - 1])) / spec.tau
        left, right = grid.boundary_flux(mu)
        v = abs(lhs - (right - left)) / max(1.0, float(np.max(np.abs(mu))))
        worst = max(worst, v)
    return worst


def _upper_threshold(potential, level, start):
    """Least r >= start with psi' >= level on all of [r, b)."""
    dpsi = potential.psi_prime
    b = potential.b
    if np.isfinite(b):
        # sample up to the last representable points below b
        gaps = np.geomspace(b - start, 1e-15 * max(1.0, abs(b)), 4000) if b > start else np.array([])
        xs = np.concatenate(([start], b - gaps[1:]))
    else:
        hi = max(start + 1.0, 1.0)
        while not (dpsi(hi) >= level and potential.psi_second(hi) > 0):
            hi = start + 2 * (hi - start)
            if hi > 1e12:
                raise ThresholdNotFound(f"psi' stays below {level} on [{start}, inf)")
        xs = np.linspace(start, hi, 4001)
    xs = xs[(xs > potential.a) & (xs < b)]
    vals = np.asarray(dpsi(xs))
    below = np.flatnonzero(vals < level)
    if below.size == 0:
        return float(start)
    last = below[-1]
    if last == xs.size - 1:
        raise ThresholdNotFound(f"psi' does not reach {level} before b = {b}")
    return float(optimize.brentq(lambda r: dpsi(r) - level, xs[last], xs[last + 1], xtol=1e-15))


def thresholds(potential, M, a0, b0):
    """Crossing points (a_bar, b_bar) of psi' through -(M+1) and M+1 and the
    enlarged bounds (a0', b0')."""
    level = M + 1.0
    r0 = potential.r0
    b_bar = _upper_threshold(potential, level, max(b0, r0))
    mirrored = _Mirror(potential)
    a_bar = -_upper_threshold(mirrored, level, -min(a0, r0))
    a, b = potential.a, potential.b
    a0p = a_bar - (a_bar - a) / 2 if np.isfinite(a) else a_bar - 1.0
    b0p = b_bar + (b - b_bar) / 2 if np.isfinite(b) else b_bar + 1.0
    return a_bar, b_bar, a0p, b0p


class _Mirror:
    """The potential r -> psi(-r), so lower thresholds reuse the upper search."""

    def __init__(self, pot):
        self.pot = pot
        self.a, self.b = -pot.b, -pot.a

    def psi_prime(self, r):
        return -np.asarray(self.pot.psi_prime(-np.asarray(r)))

    def psi_second(self, r):
        return self.pot.psi_second(-np.asarray(r))


def max_principle_report(traj):
    """A posteriori bounds: M = max_k |mu^k - g^k|_sup, thresholds and pass flag."""
    spec = traj.spec
    pot = spec.potential
    M = float(np.max(np.abs(traj.mu - traj.g))) if traj.mu.size else 0.0
    a_bar, b_bar, a0p, b0p = thresholds(pot, M, spec.a0, spec.b0)
    u_min, u_max = float(traj.u.min()), float(traj.u.max())
    passed = bool(a0p <= u_min and u_max <= b0p)
    inside = bool(pot.a < u_min and u_max < pot.b)
    return BoundReport(M, a_bar, b_bar, a0p, b0p, u_min, u_max, passed, inside)
