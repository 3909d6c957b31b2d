"""Numerical toolkit for the viscous Cahn-Hilliard system with a nonsmooth
rate-dependent dissipation graph and singular potentials: scalar monotone
calculus, a cell-centered 1-D grid, implicit Euler stepping, structural
diagnostics and singular-limit sweeps."""
from .asymptotics import (DegenerateFit, RateReport, SweepConfig, continuous_dependence_probe,
                          delta_sweep, eps_sweep, fit_rate, prepare_delta_data,
                          prepare_eps_forcing, smooth_data)
from .diagnostics import (BoundReport, EnergyLedger, energy_inequality_check, energy_ledger,
                          flux_identity_check, free_energy, max_principle_report, thresholds)
from .grid import Grid1D, spacetime_norms
from .monotone import (BracketError, DomainError, GraphSpec, PotentialSpec, conjugate_eval,
                       moreau_envelope, resolvent, truncation, yosida, yosida_derivative)
from .presets import PRESETS, make_preset
from .stepper import (DomainEscape, NonConvergence, ProblemSpec, StepState, Trajectory,
                      initial_rates, newton_step_solve, solve, step_residual)

__version__ = "0.1.0"
