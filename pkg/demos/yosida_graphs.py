"""Resolvents, Yosida approximations and Moreau envelopes of the graph
catalogue on a few sample points, plus the regularized potential chain.

    python3 demos/yosida_graphs.py
"""
import numpy as np

from dncahn import GraphSpec, PotentialSpec


def main():
    r = np.array([-3.0, -1.0, -0.2, 0.0, 0.05, 0.5, 2.0])
    graphs = [GraphSpec.zero(), GraphSpec.sign(), GraphSpec.power(1.0), GraphSpec.power(3.0),
              GraphSpec.piecewise_linear((-1.0, 1.0), (0.5, 0.0, 2.0))]
    np.set_printoptions(precision=4, suppress=True, linewidth=100)
    print("r =", r)
    for lam in (1.0, 0.1):
        print(f"lam = {lam}")
        for g in graphs:
            print(f"  {g.describe()}")
            print("    resolvent", np.asarray(g.resolvent(lam, r)))
            print("    yosida   ", np.asarray(g.yosida(lam, r)))
            print("    envelope ", np.asarray(g.moreau_envelope(lam, r)))

    pot = PotentialSpec.logarithmic(1.0, 2.0)
    u = np.array([-0.999, -0.5, 0.0, 0.5, 0.999])
    print(pot.describe(), "at u =", u)
    for lam in (1e-2, 1e-4, 1e-6):
        print(f"  lam = {lam:.0e}  gamma_lam = {np.asarray(pot.gamma_yosida(lam, u))}")
    print(f"  gamma     = {np.asarray(pot.gamma(u))}")


if __name__ == "__main__":
    main()
