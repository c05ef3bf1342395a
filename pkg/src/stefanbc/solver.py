"""Finite-difference solver for the moving-boundary plant on the immobilized grid.

With ``xi = x / s(t)`` the liquid region maps onto ``[0, 1]`` and the plant
becomes

    u_t = (alpha / s^2) u_xixi + xi (s_dot / s) u_xi,
    s_dot = -(beta / s) u_xi(1),

with ``u(1) = 0`` and either ``-(k / s) u_xi(0) = q`` (flux boundary) or
``u(0) = u_b`` (temperature boundary). Second-order central differences are
used inside, a ghost node closes the flux boundary and the Stefan condition
uses the three-point one-sided difference.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
from scipy.linalg.lapack import dgtsv

from .core import (
    DivergenceError,
    InterfaceCollapseError,
    Scenario,
    StefanError,
    StepSizeError,
    build_initial_profile,
)

logger = logging.getLogger(__name__)

S_MIN = 1e-6
AUTO_IMPLICIT_STEPS = 5000
AUTO_EXPLICIT_FRACTION = 0.9


@dataclass
class SolverState:
    u: np.ndarray
    s: float
    t: float

    def copy(self) -> SolverState:
        return SolverState(self.u.copy(), self.s, self.t)


@dataclass
class StepResult:
    state: SolverState
    s_dot: float
    flux_in: float


def interface_slope(u: np.ndarray) -> float:
    """Three-point one-sided ``du/dxi`` at ``xi = 1``."""
    n = len(u) - 1
    return (3.0 * u[-1] - 4.0 * u[-2] + u[-3]) * n / 2.0


def interface_velocity(u: np.ndarray, s: float, beta: float) -> float:
    return -beta / s * interface_slope(u)


def _check_interface(s: float, s_min: float) -> None:
    if not s > s_min:
        raise InterfaceCollapseError(f"interface position {s:.3e} m fell below the floor {s_min:.1e} m")


def immobilized_rhs(
    state: SolverState,
    flux: float,
    alpha: float,
    beta: float,
    k: float,
    boundary: str = "flux",
    s_min: float = S_MIN,
) -> tuple[np.ndarray, float]:
    """Semi-discrete time derivative ``(du/dt, ds/dt)``.

    With ``boundary="temperature"`` the ``flux`` argument is ignored and node 0
    is held fixed.
    """
    u, s = state.u, state.s
    _check_interface(s, s_min)
    n = len(u) - 1
    dxi = 1.0 / n
    xi = np.linspace(0.0, 1.0, n + 1)
    s_dot = interface_velocity(u, s, beta)
    diff = alpha / s**2
    adv = s_dot / s

    du = np.zeros_like(u)
    du[1:-1] = (
        diff * (u[2:] - 2.0 * u[1:-1] + u[:-2]) / dxi**2
        + adv * xi[1:-1] * (u[2:] - u[:-2]) / (2.0 * dxi)
    )
    if boundary == "flux":
        ghost = u[1] + 2.0 * dxi * s * flux / k
        du[0] = diff * (ghost - 2.0 * u[0] + u[1]) / dxi**2
    return du, s_dot


def explicit_dt_limit(s: float, n_cells: int, alpha: float, cfl: float = 1.0) -> float:
    return cfl * s**2 / (2.0 * alpha * n_cells**2)


class Solver:
    """Single-owner time stepper for one scenario.

    Parameters
    ----------
    scenario : Scenario
        Supplies material constants, grid size, integrator and boundary mode.
    cfl : float
        Courant factor for the explicit integrator, at most 1.
    sweeps : int
        Fixed-point sweeps of the implicit integrator. Each sweep freezes the
        interface velocity, solves the tridiagonal backward-Euler system and
        updates the velocity from the new profile.
    """

    def __init__(self, scenario: Scenario, cfl: float = 1.0, sweeps: int = 2, s_min: float = S_MIN):
        if not 0 < cfl <= 1:
            raise StepSizeError(f"CFL factor must lie in (0, 1], got {cfl}")
        self.scenario = scenario
        self.alpha = scenario.alpha
        self.beta = scenario.beta
        self.k = scenario.params.k
        self.n = scenario.n_cells
        self.cfl = cfl
        self.sweeps = sweeps
        self.s_min = s_min
        self.boundary = "temperature" if scenario.bc_mode == "prescribed-temperature" else "flux"
        self.xi = scenario.grid

    def step(self, state: SolverState, flux: float, dt: float) -> StepResult:
        """Advance ``state`` by ``dt`` with boundary value ``flux`` held fixed."""
        if not dt > 0:
            raise StepSizeError(f"time step must be positive, got {dt}")
        _check_interface(state.s, self.s_min)
        if self.scenario.integrator == "explicit":
            u, s = self._explicit(state, flux, dt)
        else:
            u, s = self._implicit(state, flux, dt)
        if not (np.all(np.isfinite(u)) and math.isfinite(s)):
            raise DivergenceError(f"non-finite state after step to t={state.t + dt:.6g} s")
        _check_interface(s, self.s_min)
        new = SolverState(u, s, state.t + dt)
        return StepResult(new, interface_velocity(u, s, self.beta), flux)

    def _explicit(self, state: SolverState, flux: float, dt: float) -> tuple[np.ndarray, float]:
        limit = explicit_dt_limit(state.s, self.n, self.alpha, self.cfl)
        if dt > limit * (1 + 1e-12):
            raise StepSizeError(f"explicit step dt={dt:.3e} s exceeds the stability limit {limit:.3e} s")
        du, s_dot = immobilized_rhs(state, flux, self.alpha, self.beta, self.k, self.boundary, self.s_min)
        u = state.u + dt * du
        if self.boundary == "temperature":
            u[0] = flux
        u[-1] = 0.0
        return u, state.s + dt * s_dot

    def _implicit(self, state: SolverState, flux: float, dt: float) -> tuple[np.ndarray, float]:
        n, dxi = self.n, 1.0 / self.n
        xi = self.xi[:-1]
        s_dot = interface_velocity(state.u, state.s, self.beta)
        u = state.u
        for _ in range(self.sweeps):
            s_new = state.s + dt * s_dot
            _check_interface(s_new, self.s_min)
            diff = dt * self.alpha / (s_new**2 * dxi**2)
            adv = dt * s_dot / s_new * xi / (2.0 * dxi)

            main = np.full(n, 1.0 + 2.0 * diff)
            upper = -(diff + adv[:-1])
            lower = -(diff - adv[1:])
            rhs = state.u[:-1].copy()
            if self.boundary == "flux":
                upper[0] = -2.0 * diff
                rhs[0] += 2.0 * diff * dxi * s_new * flux / self.k
            else:
                main[0] = 1.0
                upper[0] = 0.0
                rhs[0] = flux
            *_, solution, info = dgtsv(lower, main, upper, rhs, 1, 1, 1, 1)
            if info != 0:
                raise DivergenceError(f"tridiagonal solve failed (info={info})")
            u = np.empty(n + 1)
            u[:-1] = solution
            u[-1] = 0.0
            if self.boundary == "temperature":
                # pivoting in the tridiagonal solve can perturb the pinned row by rounding
                u[0] = flux
            s_dot = interface_velocity(u, s_new, self.beta)
        return u, state.s + dt * s_dot

    def auto_dt(self, state: SolverState) -> float:
        if self.scenario.integrator == "explicit":
            return AUTO_EXPLICIT_FRACTION * explicit_dt_limit(state.s, self.n, self.alpha, self.cfl)
        return self.scenario.t_final / AUTO_IMPLICIT_STEPS


FluxSource = Callable[[SolverState], float]


def initial_state(scenario: Scenario, profile: np.ndarray | None = None, t0: float = 0.0) -> SolverState:
    u = build_initial_profile(scenario) if profile is None else np.array(profile, dtype=float)
    return SolverState(u, float(scenario.s0), float(t0))


def run(
    scenario: Scenario,
    flux_source: FluxSource | None = None,
    initial: SolverState | None = None,
    solver: Solver | None = None,
    sink: Callable[[StepResult], None] | None = None,
) -> list[StepResult]:
    """Integrate ``scenario`` from its initial state up to ``t0 + t_final``.

    ``flux_source`` returns the boundary value (flux or superheat) applied over
    the coming step, evaluated at the beginning-of-step state. In the
    prescribed modes it defaults to the constant ``scenario.bc_value``.
    Records are emitted at ``t0``, every ``output_interval`` seconds and at the
    final time; each record's ``flux_in`` is the boundary value the source
    prescribes at that state.
    """
    solver = solver or Solver(scenario)
    state = (initial or initial_state(scenario)).copy()
    if flux_source is None:
        if scenario.bc_mode == "controlled-flux":
            raise StefanError("controlled-flux mode needs a flux source")
        flux_source = lambda _state: scenario.bc_value  # noqa: E731

    t_start = state.t
    t_end = t_start + scenario.t_final
    fixed_dt = None
    n_steps = None
    if scenario.t_final > 0 and (scenario.dt != "auto" or scenario.integrator == "implicit"):
        requested = solver.auto_dt(state) if scenario.dt == "auto" else float(scenario.dt)
        n_steps = max(1, math.ceil(scenario.t_final / requested - 1e-9))
        fixed_dt = scenario.t_final / n_steps

    records: list[StepResult] = []

    def emit(result: StepResult) -> None:
        records.append(result)
        if sink is not None:
            sink(result)

    flux = flux_source(state)
    emit(StepResult(state.copy(), interface_velocity(state.u, state.s, solver.beta), flux))
    interval = scenario.output_interval
    next_output = t_start + interval
    step_index = 0
    while True:
        if n_steps is not None:
            if step_index >= n_steps:
                break
            dt = fixed_dt
        else:
            remaining = t_end - state.t
            if remaining <= 1e-12 * max(1.0, t_end):
                break
            dt = min(solver.auto_dt(state), remaining)
        try:
            result = solver.step(state, flux, dt)
        except StefanError as exc:
            wrapped = type(exc)(f"{exc} (at t={state.t:.6g} s)")
            wrapped.t = state.t
            raise wrapped from exc
        step_index += 1
        state = result.state
        if n_steps is not None:
            state.t = t_start + step_index * fixed_dt
            final = step_index == n_steps
        else:
            final = t_end - state.t <= 1e-12 * max(1.0, t_end)
        flux = flux_source(state)
        tol = 1e-9 * max(1.0, abs(state.t))
        if interval == 0 or final or state.t >= next_output - tol:
            emit(StepResult(state.copy(), result.s_dot, flux))
            while interval > 0 and next_output <= state.t + tol:
                next_output += interval
    logger.debug("run %s finished after %d steps", scenario.name, step_index)
    return records
