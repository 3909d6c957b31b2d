"""Cell-centered finite differences on the interval (0, L).

Fields are plain 1-D numpy arrays of length ``N`` holding cell averages at
x_i = (i + 1/2) h.  Boundary conditions enter only through ghost cells:
mirrored ghosts give homogeneous Neumann data (used for u), antisymmetric
ghosts put a zero at the domain faces (Dirichlet, used for mu).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded


@dataclass(frozen=True)
class Grid1D:
    L: float = 1.0
    N: int = 64

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("domain length must be positive")
        if int(self.N) != self.N or self.N < 4:
            raise ValueError("need an integer cell count N >= 4")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self):
        return self.L / self.N

    @cached_property
    def x(self):
        return (np.arange(self.N) + 0.5) * self.h

    def check(self, f):
        f = np.asarray(f, dtype=float)
        if f.shape != (self.N,):
            raise ValueError(f"field has shape {f.shape}, expected ({self.N},)")
        return f

    # --- operators ---------------------------------------------------------

    def _pad(self, f, sign):
        return np.concatenate(([sign * f[0]], f, [sign * f[-1]]))

    def lap_neumann(self, f):
        g = self._pad(self.check(f), 1.0)
        return (g[:-2] - 2.0 * g[1:-1] + g[2:]) / self.h ** 2

    def lap_dirichlet(self, f):
        g = self._pad(self.check(f), -1.0)
        return (g[:-2] - 2.0 * g[1:-1] + g[2:]) / self.h ** 2

    def face_gradient(self, f, bc="neumann"):
        """Differences across all N+1 faces, boundary faces included."""
        g = self._pad(self.check(f), 1.0 if bc == "neumann" else -1.0)
        return np.diff(g) / self.h

    def boundary_flux(self, mu):
        """Face derivatives (left, right) of mu with the Dirichlet ghost.

        h * sum(lap_dirichlet(mu)) == right - left.
        """
        mu = self.check(mu)
        return 2.0 * mu[0] / self.h, -2.0 * mu[-1] / self.h

    # banded forms (scipy.linalg.solve_banded layout)

    @cached_property
    def lap_neumann_banded(self):
        return self._tridiag_banded(-1.0)

    @cached_property
    def lap_dirichlet_banded(self):
        return self._tridiag_banded(-3.0)

    def _tridiag_banded(self, corner):
        n, h2 = self.N, self.h ** 2
        ab = np.zeros((3, n))
        ab[0, 1:] = 1.0 / h2
        ab[1, :] = -2.0 / h2
        ab[1, [0, -1]] = corner / h2
        ab[2, :-1] = 1.0 / h2
        return ab

    @cached_property
    def bilaplacian_banded(self):
        """lap_dirichlet @ lap_neumann in (2, 2) banded layout."""
        prod = banded_to_dense(self.lap_dirichlet_banded, 1, 1) @ banded_to_dense(
            self.lap_neumann_banded, 1, 1)
        return dense_to_banded(prod, 2, 2)

    def solve_shifted_neumann(self, alpha, f):
        """Solve (I - alpha * lap_neumann) v = f."""
        ab = -alpha * self.lap_neumann_banded
        ab[1] += 1.0
        return solve_banded((1, 1), ab, self.check(f))

    # --- norms ---------------------------------------------------------------

    def integral(self, f):
        return self.h * float(np.sum(f))

    def mean(self, f):
        return self.integral(self.check(f)) / self.L

    def norm_l2(self, f):
        f = self.check(f)
        return float(np.sqrt(self.h * np.dot(f, f)))

    def norm_sup(self, f):
        return float(np.max(np.abs(self.check(f))))

    def h1_seminorm(self, f, bc="neumann"):
        """Discrete gradient seminorm.

        With the Dirichlet convention the two half-cells next to the faces
        carry weight h/2, which makes -h*sum(f*lap_dirichlet(f)) equal to the
        squared seminorm exactly (same for Neumann, where boundary jumps vanish).
        """
        d = self.face_gradient(f, bc)
        w = np.full(d.size, self.h)
        w[[0, -1]] = 0.5 * self.h
        return float(np.sqrt(np.dot(w, d * d)))

    def norm_h1(self, f):
        return float(np.hypot(self.norm_l2(f), self.h1_seminorm(f, "neumann")))


def banded_to_dense(ab, l, u):
    n = ab.shape[1]
    a = np.zeros((n, n))
    for k in range(-l, u + 1):
        row = u - k
        if k >= 0:
            a[np.arange(n - k), np.arange(k, n)] = ab[row, k:]
        else:
            a[np.arange(-k, n), np.arange(n + k)] = ab[row, :n + k]
    return a


def dense_to_banded(a, l, u):
    n = a.shape[0]
    ab = np.zeros((l + u + 1, n))
    for k in range(-l, u + 1):
        row = u - k
        if k >= 0:
            ab[row, k:] = np.diagonal(a, k)
        else:
            ab[row, :n + k] = np.diagonal(a, k)
    return ab


def spacetime_norms(grid, tau, u=None, mu=None, u0=None, which="L2H"):
    """Time-discrete norms over the step values k = 1..n (right endpoints).

    ``u`` and ``mu`` are (n, N) arrays of step values; ``u0`` is the initial
    field, needed for the backward difference quotient in ``H1H``.  Supported:
    ``L2V0`` (of mu, Dirichlet gradient seminorm), ``H1H``, ``L2H``, ``LinfH``,
    ``LinfV`` (all of u).
    """
    if which == "L2V0":
        vals = np.array([grid.h1_seminorm(m, "dirichlet") for m in np.atleast_2d(mu)])
        return float(np.sqrt(tau * np.sum(vals ** 2)))
    u = np.atleast_2d(u)
    l2 = np.array([grid.norm_l2(v) for v in u])
    if which == "L2H":
        return float(np.sqrt(tau * np.sum(l2 ** 2)))
    if which == "LinfH":
        return float(np.max(l2))
    if which == "LinfV":
        return float(max(grid.norm_h1(v) for v in u))
    if which == "H1H":
        if u0 is None:
            raise ValueError("H1H needs the initial field")
        full = np.vstack([np.asarray(u0, dtype=float)[None, :], u])
        rate = np.diff(full, axis=0) / tau
        dl2 = np.array([grid.norm_l2(v) for v in rate])
        return float(np.sqrt(tau * np.sum(l2 ** 2) + tau * np.sum(dl2 ** 2)))
    raise ValueError(f"unknown space-time norm {which!r}")
