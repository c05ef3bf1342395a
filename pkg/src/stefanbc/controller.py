"""Full-state backstepping feedback and the closed-loop harness."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Scenario, StefanError, trapezoid
from .solver import Solver, SolverState, StepResult, run


@dataclass(frozen=True)
class ControlInput:
    q_c: float
    energy_E: float
    t: float


def energy(u: np.ndarray, s: float, alpha: float, beta: float) -> float:
    """Scaled enthalpy ``(1/alpha) * int_0^s u dx + s / beta``.

    Along plant solutions it obeys ``dE/dt = q_c / k``.
    """
    return trapezoid(u, s) / alpha + s / beta


def control_law(state: SolverState, scenario: Scenario) -> ControlInput:
    """Boundary heat flux ``-c k [ (1/alpha) int u dx + (s - s_r) / beta ]``.

    Equivalently ``-c k (E - s_r / beta)``, which makes the closed-loop flux
    decay exactly like ``exp(-c t)``.
    """
    e = energy(state.u, state.s, scenario.alpha, scenario.beta)
    q = -scenario.gain_c * scenario.params.k * (e - scenario.setpoint_sr / scenario.beta)
    return ControlInput(q_c=q, energy_E=e, t=state.t)


def predicted_flux(t, q_c0: float, c: float):
    return q_c0 * np.exp(-c * np.asarray(t, dtype=float))


def predicted_energy(t, scenario: Scenario, e0: float):
    e_inf = scenario.setpoint_sr / scenario.beta
    return e_inf + (e0 - e_inf) * np.exp(-scenario.gain_c * np.asarray(t, dtype=float))


def closed_loop_snapshots(
    scenario: Scenario,
    initial: SolverState | None = None,
    solver: Solver | None = None,
) -> list[StepResult]:
    """Run the plant under feedback and return raw solver snapshots."""
    if scenario.bc_mode != "controlled-flux":
        raise StefanError(f"closed-loop runs need bc_mode=controlled-flux, got {scenario.bc_mode}")
    return run(scenario, lambda state: control_law(state, scenario).q_c, initial=initial, solver=solver)


def closed_loop_run(scenario: Scenario, initial: SolverState | None = None, solver: Solver | None = None):
    """Closed-loop simulation with every diagnostic attached.

    Returns the list of ``TraceRecord`` rows. Constraint violations are
    flagged on the rows, never raised.
    """
    from .diagnostics import build_trace

    snapshots = closed_loop_snapshots(scenario, initial=initial, solver=solver)
    return build_trace(snapshots, scenario)
