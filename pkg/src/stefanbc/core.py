"""Material parameters, scenarios and initial data for the one-phase Stefan plant.

Temperatures are carried as the superheat ``u = T - T_m`` throughout the
package. Spatial fields live on the immobilized grid ``xi_i = i / n`` so that
``x = xi * s(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

BC_MODES = ("controlled-flux", "prescribed-flux", "prescribed-temperature")
INTEGRATORS = ("implicit", "explicit")


class StefanError(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(StefanError, ValueError):
    pass


class InterfaceCollapseError(StefanError):
    pass


class StepSizeError(StefanError):
    pass


class DivergenceError(StefanError):
    pass


@dataclass(frozen=True)
class PhysicalParams:
    """Constant liquid-phase material properties (SI units)."""

    rho: float
    cp: float
    k: float
    dh: float
    t_melt: float

    def __post_init__(self):
        for name in ("rho", "cp", "k", "dh", "t_melt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"{name} must be a positive finite number, got {value!r}")

    @property
    def alpha(self) -> float:
        return self.k / (self.rho * self.cp)

    @property
    def beta(self) -> float:
        return self.k / (self.rho * self.dh)


ZINC = PhysicalParams(rho=6570.0, cp=389.5687, k=116.0, dh=111961.0, t_melt=692.68)


def derive_coefficients(params: PhysicalParams) -> tuple[float, float]:
    """Return ``(alpha, beta)``: thermal diffusivity and interface-velocity coefficient."""
    return params.alpha, params.beta


@dataclass(frozen=True)
class Scenario:
    """Complete description of one simulation experiment.

    ``dt`` is either a positive float or the string ``"auto"``.
    ``bc_value`` is the boundary flux (W/m^2) in prescribed-flux mode and the
    boundary superheat (K) in prescribed-temperature mode; it is unused under
    feedback control. ``output_interval`` of 0 records every step.
    """

    params: PhysicalParams
    gain_c: float
    setpoint_sr: float
    s0: float
    h_slope: float
    t_final: float
    domain_length: float | None = None
    n_cells: int = 200
    dt: float | str = "auto"
    bc_mode: str = "controlled-flux"
    integrator: str = "implicit"
    bc_value: float = 0.0
    output_interval: float = 0.0
    name: str = field(default="scenario", compare=False)

    def __post_init__(self):
        if self.domain_length is None:
            object.__setattr__(self, "domain_length", 1.2 * self.setpoint_sr)
        if self.bc_mode not in BC_MODES:
            raise InvalidParameterError(f"bc_mode must be one of {BC_MODES}, got {self.bc_mode!r}")
        if self.integrator not in INTEGRATORS:
            raise InvalidParameterError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if not self.gain_c > 0:
            raise InvalidParameterError(f"gain_c must be positive, got {self.gain_c}")
        if not self.h_slope >= 0:
            raise InvalidParameterError(f"h_slope must be non-negative, got {self.h_slope}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 8:
            raise InvalidParameterError(f"n_cells must be an integer >= 8, got {self.n_cells}")
        if not self.s0 > 0:
            raise InvalidParameterError(f"s0 must be positive, got {self.s0}")
        if not self.t_final >= 0:
            raise InvalidParameterError(f"t_final must be non-negative, got {self.t_final}")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise InvalidParameterError(f"dt must be positive or 'auto', got {self.dt!r}")
        if self.output_interval < 0:
            raise InvalidParameterError("output_interval must be non-negative")
        if self.bc_mode == "controlled-flux":
            if not (self.s0 <= self.setpoint_sr <= self.domain_length):
                raise InvalidParameterError(
                    "controlled-flux mode requires 0 < s0 <= setpoint_sr <= domain_length, got "
                    f"s0={self.s0}, setpoint_sr={self.setpoint_sr}, domain_length={self.domain_length}"
                )

    @property
    def alpha(self) -> float:
        return self.params.alpha

    @property
    def beta(self) -> float:
        return self.params.beta

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n_cells + 1)

    def with_(self, **changes) -> Scenario:
        return replace(self, **changes)


def trapezoid(values: np.ndarray, s: float) -> float:
    """Integral over ``[0, s]`` of a field sampled on the uniform immobilized grid."""
    n = len(values) - 1
    dxi = 1.0 / n
    return float(s * dxi * (values.sum() - 0.5 * (values[0] + values[-1])))


def build_initial_profile(scenario: Scenario) -> np.ndarray:
    """Linear superheat ``H * (s0 - x)`` sampled on the immobilized grid."""
    xi = scenario.grid
    u0 = scenario.h_slope * scenario.s0 * (1.0 - xi)
    u0[-1] = 0.0
    return u0


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    margin: float
    threshold: float
    stored_heat: float


def feasible_setpoint(scenario: Scenario, profile: np.ndarray) -> Feasibility:
    """Check that the setpoint lies beyond the interface reachable from stored superheat.

    The threshold is ``s0 + (cp / dh) * integral(u0)``; a setpoint above it
    keeps the feedback flux positive for all time.
    """
    stored = trapezoid(np.asarray(profile, dtype=float), scenario.s0)
    threshold = scenario.s0 + scenario.params.cp / scenario.params.dh * stored
    margin = scenario.setpoint_sr - threshold
    return Feasibility(feasible=margin > 0, margin=margin, threshold=threshold, stored_heat=stored)


def validate_profile(scenario: Scenario, profile: np.ndarray) -> None:
    """Raise if ``profile`` breaks the isothermal interface or the slope bound."""
    profile = np.asarray(profile, dtype=float)
    if profile.shape != (scenario.n_cells + 1,):
        raise InvalidParameterError(f"profile must have {scenario.n_cells + 1} nodes, got {profile.shape}")
    if profile[-1] != 0.0:
        raise InvalidParameterError("profile must vanish at the interface")
    x = scenario.grid * scenario.s0
    bound = scenario.h_slope * (scenario.s0 - x)
    slack = 1e-12 * max(scenario.h_slope * scenario.s0, 1.0)
    if np.any(profile < -slack) or np.any(profile > bound + slack):
        raise InvalidParameterError("profile must satisfy 0 <= u0(x) <= H (s0 - x)")
