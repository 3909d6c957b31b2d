"""Independent reference computations used by the tests.

Nothing here calls into the package except for plain data (graph kind and
parameters); every formula is re-derived from scratch, mostly by brute force.
"""
import numpy as np


# --- scalar graphs -----------------------------------------------------------

def beta_point(kind, s, p=1.0, coeff=1.0, breakpoints=(), slopes=()):
    """A single-valued representative of beta (0 at the sign jump)."""
    s = float(s)
    if kind == "zero":
        return 0.0
    if kind == "sign":
        return float(np.sign(s))
    if kind == "power":
        return coeff * abs(s) ** p * np.sign(s)
    if kind == "piecewise_linear":
        # integrate the slopes from 0 to s
        knots = [-np.inf, *breakpoints, np.inf]
        total = 0.0
        lo, hi = (0.0, s) if s >= 0 else (s, 0.0)
        for i, m in enumerate(slopes):
            a, b = max(lo, knots[i]), min(hi, knots[i + 1])
            if b > a:
                total += m * (b - a)
        return total if s >= 0 else -total
    raise ValueError(kind)


def beta_hat_point(kind, s, **kw):
    """Primitive of beta vanishing at 0."""
    if kind == "sign":
        return abs(s)
    if kind == "zero":
        return 0.0
    if kind == "power":
        return kw.get("coeff", 1.0) * abs(s) ** (kw.get("p", 1.0) + 1) / (kw.get("p", 1.0) + 1)
    # beta is linear between kinks, so the trapezoid rule on 0, s and the
    # kinks in between is exact
    kinks = [b for b in kw.get("breakpoints", ()) if min(0, s) < b < max(0, s)]
    xs = np.array(sorted([0.0, s, *kinks]))
    vals = np.array([beta_point(kind, x, **kw) for x in xs])
    area = float(np.trapezoid(vals, xs))
    return area if s >= 0 else -area


def resolvent_bisect(kind, lam, r, iters=300, **kw):
    """Bisection on s + lam*beta(s) = r; jumps handled by the sign of the
    one-sided residual, so the dead zone of sign returns 0."""
    lo, hi = min(r, 0.0) - 1.0, max(r, 0.0) + 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if mid + lam * beta_point(kind, mid, **kw) < r:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def moreau_bruteforce(kind, lam, r, **kw):
    """min_s beta_hat(s) + (r - s)^2/(2 lam) by grid search plus refinement."""
    from scipy.optimize import minimize_scalar

    f = lambda s: beta_hat_point(kind, s, **kw) + (r - s) ** 2 / (2 * lam)
    grid = np.linspace(min(r, 0) - 1, max(r, 0) + 1, 2001)
    vals = [f(s) for s in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return min(float(res.fun), float(vals[i]))


def conjugate_gridsearch(kind, s, R=50.0, n=200001, **kw):
    """sup_r s*r - beta_hat(r) on [-R, R]; returns (value, value on [-2R, 2R])
    so that unbounded suprema show up as growth."""
    out = []
    for rad in (R, 2 * R):
        rs = np.linspace(-rad, rad, n)
        if kind == "sign":
            bh = np.abs(rs)
        elif kind == "zero":
            bh = np.zeros_like(rs)
        elif kind == "power":
            p, c = kw.get("p", 1.0), kw.get("coeff", 1.0)
            bh = c * np.abs(rs) ** (p + 1) / (p + 1)
        else:
            raise ValueError(kind)
        out.append(float(np.max(s * rs - bh)))
    return tuple(out)


def fd(f, x, h=1e-6):
    return (f(x + h) - f(x - h)) / (2 * h)


# --- potentials ----------------------------------------------------------------

def dw_prime(r, scale=0.25, well=1.0):
    return 4 * scale * r * (r * r - well * well)


def log_prime(r, c=1.0, c0=2.0):
    return 0.5 * c * np.log((1 + r) / (1 - r)) - c0 * r


def root_bisect(f, lo, hi, iters=300):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cubic_gamma_resolvent(lam, r, iters=200):
    """Solve s + lam*s^3 = r (double well with K = 1); vectorized bisection."""
    r = np.asarray(r, dtype=float)
    lo, hi = -np.abs(r) - 1, np.abs(r) + 1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = mid + lam * mid ** 3 > r
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
    out = 0.5 * (lo + hi)
    return float(out) if out.ndim == 0 else out


# --- grids -----------------------------------------------------------------------

def dense_laplacian(N, h, bc):
    """Dense matrix built entry by entry from the ghost-cell rule."""
    A = np.zeros((N, N))
    ghost = 1.0 if bc == "neumann" else -1.0
    for i in range(N):
        A[i, i] -= 2.0
        if i > 0:
            A[i, i - 1] += 1.0
        else:
            A[i, i] += ghost
        if i < N - 1:
            A[i, i + 1] += 1.0
        else:
            A[i, i] += ghost
    return A / h ** 2


def double_well_step_fixed_point(u_prev, g, tau, eps, lam, h, iters=200):
    """Step of the eps > 0, delta = 0, beta = 0 scheme with the quartic
    potential (K = 1), by Picard iteration on dense matrices (a contraction
    when tau*max|pot'|/eps < 1)."""
    N = u_prev.size
    LD = dense_laplacian(N, h, "dirichlet")
    M = np.eye(N) - eps * LD

    def pot(u):
        J = cubic_gamma_resolvent(lam, u)
        return lam * u + (u - J) / lam - np.clip(J, -1 / lam, 1 / lam)

    w = np.zeros(N)
    for _ in range(iters):
        new = np.linalg.solve(M, LD @ (pot(u_prev + tau * w) + g))
        if np.max(np.abs(new - w)) < 1e-12:
            return new
        w = new
    raise RuntimeError("Picard iteration did not converge")
