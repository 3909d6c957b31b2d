"""Forcing rules, initial profiles and the named scenario catalogue."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .grid import Grid1D
from .monotone import GraphSpec, PotentialSpec
from .stepper import ProblemSpec, _potential_part


@dataclass(frozen=True)
class ZeroForcing:
    def __call__(self, x, t):
        return np.zeros_like(x, dtype=float)

    def describe(self):
        return "zero"


@dataclass(frozen=True)
class ConstantForcing:
    value: float = 0.0

    def __call__(self, x, t):
        return np.full_like(x, self.value, dtype=float)

    def describe(self):
        return f"constant(value={self.value!r})"


@dataclass(frozen=True)
class WaveForcing:
    """g(x, t) = amplitude * cos(mode*pi*x/L) * cos(omega*t)."""

    amplitude: float = 1.0
    mode: int = 1
    omega: float = 0.0
    L: float = 1.0

    def __call__(self, x, t):
        return self.amplitude * np.cos(self.mode * np.pi * x / self.L) * np.cos(self.omega * t)

    def describe(self):
        return (f"wave(amplitude={self.amplitude!r}, mode={self.mode!r}, "
                f"omega={self.omega!r}, L={self.L!r})")


@dataclass(frozen=True)
class PerturbedForcing:
    """base + eta * profile."""

    base: object
    profile: object
    eta: float

    def __call__(self, x, t):
        return self.base(x, t) + self.eta * self.profile(x, t)

    def describe(self):
        return f"{self.base.describe()} + {self.eta!r}*[{self.profile.describe()}]"


def cosine_profile(grid, amplitude=0.9, mode=1, shift=0.0):
    return shift + amplitude * np.cos(mode * np.pi * grid.x / grid.L)


def constant_profile(grid, value):
    return np.full(grid.N, float(value))


def regularized_equilibrium(potential, lam, near):
    """Root of lam*r + gamma_lam(r) - K*T_lam(J_lam(r)) next to ``near``.

    A constant field at this value is an exact fixed point of the regularized
    scheme when g = 0 (mu vanishes identically).
    """
    def f(r):
        return float(_potential_part(potential, lam, np.array([r]))[0][0])

    width = 0.25 * min(1.0, potential.b - near, near - potential.a)
    lo, hi = near - width, near + width
    return float(optimize.brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    regimes: tuple


PRESETS = {
    "logwell-sign": Preset(
        "logwell-sign",
        "logarithmic potential (c=1, c0=2), sign graph, u0 = 0.9 cos(pi x/L), g = 0",
        ("well-posedness and bounds for eps, delta > 0", "continuous dependence",
         "delta -> 0 with error estimate")),
    "quartic-zero": Preset(
        "quartic-zero",
        "double-well potential, beta = 0 (viscous Cahn-Hilliard), u0 = 0.9 cos(pi x/L), g = 0",
        ("well-posedness and bounds for eps, delta > 0", "continuous dependence")),
    "quartic-power": Preset(
        "quartic-power",
        "double-well potential, linear graph beta(r) = r (linear growth), u0 = 0.9 cos(pi x/L), g = 0",
        ("well-posedness and bounds for eps, delta > 0", "eps -> 0 under linear growth of beta")),
    "stationary": Preset(
        "stationary",
        "double-well potential, sign graph, u0 constant at the regularized well bottom",
        ("well-posedness and bounds for eps, delta > 0",)),
}


def make_preset(name, **overrides):
    """Build the ProblemSpec of a named scenario; keyword overrides replace fields.

    Grid overrides may be given as ``L`` and ``N``.
    """
    if name not in PRESETS:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(PRESETS)}")
    L = overrides.pop("L", 1.0)
    N = overrides.pop("N", 64)
    grid = overrides.pop("grid", None) or Grid1D(L, N)
    base = dict(lam=1e-5, tau=1e-3, T=0.1, forcing=ZeroForcing(), name=name)
    if name == "logwell-sign":
        base.update(graph=GraphSpec.sign(), potential=PotentialSpec.logarithmic(1.0, 2.0),
                    eps=1.0, delta=1.0, a0=-0.9, b0=0.9)
    elif name == "quartic-zero":
        base.update(graph=GraphSpec.zero(), potential=PotentialSpec.double_well(),
                    eps=0.1, delta=0.01, a0=-0.9, b0=0.9)
    elif name == "quartic-power":
        base.update(graph=GraphSpec.power(1.0, 1.0), potential=PotentialSpec.double_well(),
                    eps=0.1, delta=1.0, a0=-0.9, b0=0.9)
    elif name == "stationary":
        base.update(graph=GraphSpec.sign(), potential=PotentialSpec.double_well(),
                    eps=1.0, delta=1.0)
    base.update(overrides)
    if "u0" not in base:
        if name == "stationary":
            r = regularized_equilibrium(base["potential"], base["lam"], 1.0)
            base["u0"] = constant_profile(grid, r)
            base.setdefault("a0", r)
            base.setdefault("b0", r)
        else:
            base["u0"] = cosine_profile(grid, 0.9)
    return ProblemSpec(grid=grid, **base)
