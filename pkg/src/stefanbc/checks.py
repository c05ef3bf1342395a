"""Pass/fail checks evaluated over a finished run."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Scenario, build_initial_profile, feasible_setpoint
from .diagnostics import (
    DecayCertificate,
    Tolerances,
    TraceRecord,
    l2_norm_sq,
    norm_sandwich,
    plant_decay_envelope,
)
from .transforms import direct_transform, inverse_transform

CHECK_GROUPS = ("constraints", "lyapunov", "transforms", "oracle")
ORACLE_TOL = 0.02
ROUND_TRIP_TOL = 1e-3


@dataclass(frozen=True)
class Check:
    group: str
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


def parse_check_selection(text: str) -> tuple[str, ...]:
    text = text.strip().lower()
    if text == "all":
        return CHECK_GROUPS
    if text == "none":
        return ()
    chosen = tuple(part.strip() for part in text.split(",") if part.strip())
    unknown = [c for c in chosen if c not in CHECK_GROUPS]
    if unknown:
        raise ValueError(f"unknown check group(s) {unknown}; choose from {CHECK_GROUPS}, 'all' or 'none'")
    return chosen


def constraint_checks(records: list[TraceRecord], scenario: Scenario, feasible: bool) -> list[Check]:
    flags = {
        "input_positive": [r.flag_qc for r in records],
        "interface_monotone": [r.flag_sdot for r in records],
        "interface_in_band": [r.flag_band for r in records],
        "liquid_above_melting": [r.flag_temp for r in records],
    }
    if feasible:
        return [
            Check("constraints", name, not any(raised), float(sum(raised)), 0.0, "records flagged")
            for name, raised in flags.items()
        ]
    # an infeasible setpoint must visibly break the physical constraints
    qc_at_start = records[0].flag_qc
    sdot_somewhere = any(flags["interface_monotone"])
    overshoot = any(r.s > scenario.setpoint_sr for r in records)
    return [
        Check("constraints", "expected_negative_input_at_start", qc_at_start, records[0].q_c, 0.0,
              "infeasible setpoint: q_c(0) must be negative"),
        Check("constraints", "expected_interface_retreat", sdot_somewhere, min(r.s_dot for r in records), 0.0,
              "infeasible setpoint: s_dot must become negative"),
        Check("constraints", "expected_overshoot", overshoot, max(r.s for r in records), scenario.setpoint_sr,
              "infeasible setpoint: s must exceed s_r"),
    ]


def lyapunov_checks(records: list[TraceRecord], scenario: Scenario, cert: DecayCertificate, tol: Tolerances) -> list[Check]:
    ratio = max(r.v1 / r.envelope_bound for r in records)
    v = np.array([r.v for r in records])
    rise = float(np.max(np.diff(v))) if len(v) > 1 else 0.0
    sandwich = [norm_sandwich(r.u, r.s, scenario, cert) for r in records if r.u is not None]
    lower_margin = min((s.middle - s.lower) / max(s.middle, 1e-300) for s in sandwich) if sandwich else 0.0
    upper_margin = min((s.upper - s.middle) / max(s.upper, 1e-300) for s in sandwich) if sandwich else 0.0
    envelope = plant_decay_envelope(records, cert)
    plant = np.array([r.h1_sq + r.x_sq for r in records])
    return [
        Check("lyapunov", "v1_envelope", ratio <= 1.0, ratio, 1.0, "max V1 / (V1(0) e^{a(s_r-s0)} e^{-bt})"),
        Check("lyapunov", "v_nonincreasing", rise <= tol.eps * v[0], rise, tol.eps * v[0], "max step increase of V"),
        Check("lyapunov", "norm_equivalence_lower", lower_margin >= 0, lower_margin, 0.0, "min relative margin"),
        Check("lyapunov", "norm_equivalence_upper", upper_margin >= 0, upper_margin, 0.0, "min relative margin"),
        Check("lyapunov", "plant_decay_envelope", bool(np.all(plant <= envelope)), float(np.max(plant / envelope)), 1.0,
              "max (H1^2 + X^2) / (D (H1^2 + X^2)(0) e^{-bt})"),
    ]


def transform_checks(records: list[TraceRecord], scenario: Scenario, tol: Tolerances) -> list[Check]:
    w_s = max(abs(r.w_interface) for r in records)
    # the initial profile need not satisfy the feedback flux condition; check from the first step on
    later = records[1:] or records
    wx_0 = max(abs(r.wx_origin) for r in later)
    worst = 0.0
    for r in records[:: max(1, len(records) // 20)]:
        if r.u is None or not np.any(r.u):
            continue
        target = direct_transform(r.u, r.s, scenario)
        back = inverse_transform(target.w, target.X, scenario)
        worst = max(worst, np.sqrt(l2_norm_sq(back - r.u, r.s) / l2_norm_sq(r.u, r.s)))
    return [
        Check("transforms", "w_vanishes_at_interface", w_s <= tol.w_interface, w_s, tol.w_interface),
        Check("transforms", "wx_vanishes_at_origin", wx_0 <= tol.wx_origin, wx_0, tol.wx_origin, "records with t > 0"),
        Check("transforms", "round_trip", worst <= ROUND_TRIP_TOL, worst, ROUND_TRIP_TOL, "relative L2, sampled records"),
    ]


def oracle_checks(records: list[TraceRecord]) -> list[Check]:
    q0 = abs(records[0].q_c)
    q_err = max(abs(r.q_c - r.q_c_predicted) for r in records) / q0 if q0 > 0 else max(abs(r.q_c) for r in records)
    e_err = max(abs(r.energy_E - r.energy_predicted) / abs(r.energy_predicted) for r in records)
    return [
        Check("oracle", "flux_exponential_decay", q_err <= ORACLE_TOL, q_err, ORACLE_TOL, "max |q_c - q_c(0)e^{-ct}| / |q_c(0)|"),
        Check("oracle", "energy_decay", e_err <= ORACLE_TOL, e_err, ORACLE_TOL, "max relative error vs closed-form energy"),
    ]


def evaluate_checks(
    records: list[TraceRecord],
    scenario: Scenario,
    cert: DecayCertificate,
    groups=CHECK_GROUPS,
    tol: Tolerances | None = None,
) -> list[Check]:
    feasible = feasible_setpoint(scenario, build_initial_profile(scenario)).feasible
    tol = tol or Tolerances.for_run(scenario, records[0].u if records[0].u is not None else build_initial_profile(scenario), records[0].q_c)
    closed_loop = scenario.bc_mode == "controlled-flux"
    out: list[Check] = []
    if "constraints" in groups:
        out += constraint_checks(records, scenario, feasible)
    if "lyapunov" in groups and closed_loop and feasible:
        out += lyapunov_checks(records, scenario, cert, tol)
    if "transforms" in groups and closed_loop:
        out += transform_checks(records, scenario, tol)
    if "oracle" in groups and closed_loop:
        out += oracle_checks(records)
    return out

