"""Solve every preset and print the energy ledger, flux identity and bounds.

    python3 demos/run_presets.py
"""
import numpy as np

from dncahn import (PRESETS, energy_inequality_check, flux_identity_check, make_preset,
                    max_principle_report, solve)


def main():
    for name in PRESETS:
        traj = solve(make_preset(name))
        led = traj.ledger
        rep = max_principle_report(traj)
        print(f"{name}: {traj.n_steps} steps, {int(traj.newton_iters.sum())} Newton iterations")
        print(f"  free energy      {led.F[0]:.6f} -> {led.F[-1]:.6f}")
        print(f"  dissipated       grad {led.D_grad.sum():.4e}  visc {led.D_visc.sum():.4e}"
              f"  beta {led.D_beta.sum():.4e}")
        print(f"  correction sum   {led.C.sum():.4e}")
        print(f"  energy excess    {energy_inequality_check(traj):.2e}")
        print(f"  flux identity    {flux_identity_check(traj):.2e}")
        print(f"  u range          [{rep.u_min:.6f}, {rep.u_max:.6f}] inside "
              f"[{rep.a0_prime:.4f}, {rep.b0_prime:.4f}]: {rep.passed}")
        mass = [traj.spec.grid.integral(u) for u in traj.u]
        print(f"  mass             {mass[0]:.3e} -> {mass[-1]:.3e} (Dirichlet mu, not conserved)")
        print(f"  max |w|          {np.abs(traj.w).max():.3e}")


if __name__ == "__main__":
    main()
