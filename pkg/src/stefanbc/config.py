"""Flat ``key = value`` scenario files.

Example::

    # zinc strip, feasible setpoint
    rho = 6570
    cp = 389.5687
    ...
    dt = auto
"""

from __future__ import annotations

import logging
from importlib import resources
from pathlib import Path

from .core import InvalidParameterError, PhysicalParams, Scenario, StefanError, build_initial_profile, feasible_setpoint

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("rho", "cp", "k", "dh", "t_melt", "gain_c", "setpoint_sr", "s0", "h_slope", "t_final")
OPTIONAL_KEYS = ("domain_length", "n_cells", "dt", "bc_mode", "integrator", "bc_value", "output_interval")
_STRING_KEYS = {"bc_mode", "integrator"}


class ScenarioParseError(StefanError):
    pass


def bundled_scenarios() -> list[str]:
    folder = resources.files("stefanbc") / "scenarios"
    return sorted(p.name[: -len(".cfg")] for p in folder.iterdir() if p.name.endswith(".cfg"))


def resolve_scenario_path(name_or_path: str | Path) -> Path:
    """Accept a file path or the name of a bundled scenario (``zinc_feasible``)."""
    path = Path(name_or_path)
    if path.exists():
        return path
    bundled = resources.files("stefanbc") / "scenarios" / f"{name_or_path}.cfg"
    if bundled.is_file():
        return Path(str(bundled))
    raise ScenarioParseError(f"scenario file not found: {name_or_path}")


def _number(key: str, text: str, lineno: int):
    try:
        if key == "n_cells":
            return int(text)
        if key == "dt" and text.lower() == "auto":
            return "auto"
        return float(text)
    except ValueError:
        raise ScenarioParseError(f"line {lineno}: cannot parse {key} = {text!r} as a number") from None


def parse_scenario_text(text: str, name: str = "scenario") -> Scenario:
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in REQUIRED_KEYS and key not in OPTIONAL_KEYS:
            raise ScenarioParseError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ScenarioParseError(f"line {lineno}: duplicate key {key!r}")
        values[key] = value if key in _STRING_KEYS else _number(key, value, lineno)

    missing = [key for key in REQUIRED_KEYS if key not in values]
    if missing:
        raise ScenarioParseError("missing required keys: " + ", ".join(missing))

    try:
        params = PhysicalParams(*(values.pop(key) for key in ("rho", "cp", "k", "dh", "t_melt")))
        scenario = Scenario(params=params, name=name, **values)
    except InvalidParameterError as exc:
        raise ScenarioParseError(f"invalid scenario: {exc}") from exc

    verdict = feasible_setpoint(scenario, build_initial_profile(scenario))
    logger.info(
        "%s: setpoint %s (threshold %.6g m, margin %.6g m)",
        name,
        "feasible" if verdict.feasible else "INFEASIBLE",
        verdict.threshold,
        verdict.margin,
    )
    return scenario


def parse_scenario(path: str | Path) -> Scenario:
    path = resolve_scenario_path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioParseError(f"cannot read {path}: {exc}") from exc
    return parse_scenario_text(text, name=path.stem)


def format_scenario(scenario: Scenario) -> str:
    """Inverse of :func:`parse_scenario_text` (every key written explicitly)."""
    p = scenario.params
    rows = [
        ("rho", p.rho), ("cp", p.cp), ("k", p.k), ("dh", p.dh), ("t_melt", p.t_melt),
        ("gain_c", scenario.gain_c), ("setpoint_sr", scenario.setpoint_sr), ("s0", scenario.s0),
        ("h_slope", scenario.h_slope), ("domain_length", scenario.domain_length),
        ("n_cells", scenario.n_cells), ("dt", scenario.dt), ("t_final", scenario.t_final),
        ("bc_mode", scenario.bc_mode), ("integrator", scenario.integrator),
        ("bc_value", scenario.bc_value), ("output_interval", scenario.output_interval),
    ]
    return "".join(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n" for key, value in rows)
