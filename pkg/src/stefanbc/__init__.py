"""Backstepping boundary control of the one-phase Stefan problem."""

from .controller import closed_loop_run, control_law, predicted_energy, predicted_flux
from .core import ZINC, PhysicalParams, Scenario, build_initial_profile, derive_coefficients, feasible_setpoint
from .diagnostics import decay_certificate, h1_norm_sq, lyapunov_v1, neumann_oracle
from .solver import Solver, SolverState, run
from .transforms import KernelSet, direct_transform, inverse_transform, kernel_residuals

__version__ = "0.1.0"
