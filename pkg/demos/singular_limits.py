"""The two singular limits and the stability probe, printed as tables.

    python3 demos/singular_limits.py

delta -> 0 on logwell-sign (eps = 1), once with fixed data and once with
data smoothed at alpha = sqrt(delta); eps -> 0 on quartic-power (delta = 1)
with the vanishing-viscosity witness V = eps * max_k |w^k|; and the
LHS/RHS ratio of the continuous-dependence estimate on quartic-zero.
"""
from dncahn import (SweepConfig, continuous_dependence_probe, delta_sweep, eps_sweep,
                    make_preset)


def show(rep, extra=()):
    print(f"  {'value':>8} {'error':>11} {'err_mu':>11} {'err_u':>11}"
          + "".join(f" {k:>11}" for k in extra))
    for p in rep.points:
        print(f"  {p.value:8.0e} {p.error:11.3e} {p.err_mu:11.3e} {p.err_u:11.3e}"
              + "".join(f" {p.extra[k]:11.3e}" for k in extra))
    print(f"  slope {rep.slope:.3f} (fit residual {rep.fit_residual:.2e}), "
          f"monotone {rep.monotone()}")


def main():
    base = make_preset("logwell-sign", N=128, tau=5e-4)
    deltas = (1e-2, 1e-3, 1e-4, 1e-5)
    for prepare in (False, True):
        print(f"delta sweep, {'smoothed' if prepare else 'fixed'} data")
        rep = delta_sweep(SweepConfig(base, "delta", deltas, prepare_data=prepare))
        show(rep, ("rhs",))
        print(f"  C = {rep.constant:.3e}, error <= C*rhs everywhere: {rep.bound_holds}")

    print("eps sweep")
    rep = eps_sweep(SweepConfig(make_preset("quartic-power", delta=1.0), "eps",
                                (1e-1, 1e-2, 1e-3)))
    show(rep, ("V",))
    print(f"  V slope {rep.slopes['V']:.3f}")

    print("continuous dependence")
    dep = continuous_dependence_probe(make_preset("quartic-zero"), [1e-1, 1e-2, 1e-3, 1e-4])
    for eta, ratio in zip(dep.scales, dep.ratios):
        print(f"  eta {eta:7.0e}  LHS/RHS {ratio:.5f}")
    print(f"  spread {dep.spread:.4f}")


if __name__ == "__main__":
    main()
