"""Command-line entry point: ``stefanbc run|certify|verify-kernels|oracle``.

Exit codes: 0 success, 1 check failure, 2 input error, 3 numerical divergence.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checks import Check, evaluate_checks, parse_check_selection
from .config import ScenarioParseError, parse_scenario
from .controller import closed_loop_snapshots
from .core import (
    DivergenceError,
    InterfaceCollapseError,
    InvalidParameterError,
    Scenario,
    StefanError,
    StepSizeError,
    ZINC,
    build_initial_profile,
    feasible_setpoint,
)
from .diagnostics import (
    CertificateInfeasibleError,
    build_trace,
    decay_certificate,
    neumann_comparison,
    neumann_lambda,
    observed_orders,
)
from .report import (
    CERTIFICATE_FILE,
    CHECKS_FILE,
    PLOT_SCRIPT_FILE,
    TRACE_FILE,
    write_certificate,
    write_checks_csv,
    write_gnuplot_script,
    write_trace_csv,
)
from .solver import run
from .transforms import KernelSet, kernel_residuals

logger = logging.getLogger("stefanbc")

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2, 3
NUMERICAL_ERRORS = (DivergenceError, InterfaceCollapseError, StepSizeError)
SWEEP_ALIASES = {"c": "gain_c", "sr": "setpoint_sr", "H": "h_slope"}
SWEEPABLE = ("s0", "gain_c", "setpoint_sr", "h_slope", "n_cells", "t_final")


@dataclass
class RunManifest:
    scenario_path: str
    out_dir: Path
    checks: tuple[str, ...] = ("constraints", "lyapunov", "transforms", "oracle")
    sweep: tuple[str, list[float]] | None = None
    refine: int = 0
    figures: bool = True


def parse_sweep(text: str) -> tuple[str, list[float]]:
    if "=" not in text:
        raise ValueError(f"sweep must look like key=a,b,c, got {text!r}")
    key, values = text.split("=", 1)
    key = SWEEP_ALIASES.get(key.strip(), key.strip())
    if key not in SWEEPABLE:
        raise ValueError(f"cannot sweep over {key!r}; choose from {SWEEPABLE}")
    return key, [float(v) for v in values.split(",") if v.strip()]


def _single_run(scenario: Scenario, out: Path, manifest: RunManifest):
    out.mkdir(parents=True, exist_ok=True)
    cert = decay_certificate(scenario)
    if scenario.bc_mode == "controlled-flux":
        snapshots = closed_loop_snapshots(scenario)
    else:
        snapshots = run(scenario)
    records = build_trace(snapshots, scenario, cert)
    checks = evaluate_checks(records, scenario, cert, manifest.checks)
    verdict = feasible_setpoint(scenario, build_initial_profile(scenario))

    write_trace_csv(records, out / TRACE_FILE)
    write_checks_csv(checks, out / CHECKS_FILE)
    write_certificate(cert, out / CERTIFICATE_FILE, {
        "feasible_setpoint": verdict.feasible,
        "feasibility_threshold": repr(verdict.threshold),
        "feasibility_margin": repr(verdict.margin),
        "q_c0": repr(records[0].q_c),
    })
    write_gnuplot_script(out / PLOT_SCRIPT_FILE, scenario.setpoint_sr)
    return records, checks


def _refinement(scenario: Scenario, levels: int, out: Path) -> list[Check]:
    """Re-run at doubled grids (dt halved alongside) and tabulate oracle errors."""
    base_dt = scenario.t_final / 5000 if scenario.dt == "auto" else float(scenario.dt)
    rows = []
    for j in range(levels):
        level = scenario.with_(n_cells=scenario.n_cells * 2**j, dt=base_dt / 2**j)
        records = build_trace(closed_loop_snapshots(level), level)
        q0 = abs(records[0].q_c)
        q_err = max(abs(r.q_c - r.q_c_predicted) for r in records) / q0 if q0 else 0.0
        e_err = max(abs(r.energy_E - r.energy_predicted) / abs(r.energy_predicted) for r in records)
        rows.append((level.n_cells, level.dt, q_err, e_err, records[-1].s))
    with open(out / "refinement.csv", "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n_cells", "dt", "flux_error", "energy_error", "s_final"])
        writer.writerows([[n] + [repr(float(v)) for v in rest] for n, *rest in rows])
    errors = [r[2] for r in rows]
    decreasing = all(b < a for a, b in zip(errors, errors[1:]))
    orders = observed_orders(errors) if len(errors) > 1 else np.array([])
    return [Check("oracle", "refinement_flux_error_decreasing", decreasing,
                  float(orders.min()) if orders.size else 0.0, 0.0, "min observed order")]


def run_command(manifest: RunManifest) -> int:
    try:
        base = parse_scenario(manifest.scenario_path)
        if manifest.sweep:
            key, values = manifest.sweep
            entries = [(f"{key}={v:g}", base.with_(**{key: int(v) if key == "n_cells" else v})) for v in values]
        else:
            entries = [(base.name, base)]
    except (ScenarioParseError, InvalidParameterError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    out = Path(manifest.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"input error: cannot create {out}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    runs, all_checks = [], []
    for label, scenario in entries:
        target = out / label if manifest.sweep else out
        try:
            records, checks = _single_run(scenario, target, manifest)
            if manifest.refine > 1:
                checks = checks + _refinement(scenario, manifest.refine, target)
                write_checks_csv(checks, target / CHECKS_FILE)
        except NUMERICAL_ERRORS as exc:
            target.mkdir(parents=True, exist_ok=True)
            (target / "error.txt").write_text(f"{type(exc).__name__}: {exc}\nfailing_time = {getattr(exc, 't', 'unknown')}\n")
            print(f"{label}: numerical failure: {exc}", file=sys.stderr)
            return EXIT_DIVERGED
        except CertificateInfeasibleError as exc:
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        runs.append((label, records))
        all_checks += checks
        for c in checks:
            print(f"{label}: [{'PASS' if c.passed else 'FAIL'}] {c.group}/{c.name} value={c.value:.6g} tol={c.tolerance:.6g}")

    if manifest.figures:
        from .plotting import render_figures

        render_figures(runs, base.setpoint_sr, out / "figures")
    failed = [c for c in all_checks if not c.passed]
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def certify_command(args) -> int:
    try:
        scenario = parse_scenario(args.scenario)
        cert = decay_certificate(scenario, p=args.p)
    except (ScenarioParseError, CertificateInfeasibleError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    for key, value in cert.as_dict().items():
        print(f"{key} = {value!r}")
    return EXIT_OK


def verify_kernels_command(args) -> int:
    try:
        scenario = parse_scenario(args.scenario)
    except ScenarioParseError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    results = kernel_residuals(KernelSet.from_scenario(scenario), scenario.setpoint_sr, args.samples)
    for r in results:
        print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name:16s} {r.method:17s} residual={r.residual:.3e} tol={r.tolerance:.3e}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def oracle_command(args) -> int:
    try:
        params = parse_scenario(args.scenario).params if args.scenario else ZINC
        lam = neumann_lambda(args.stefan)
    except StefanError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    t_start = args.t_final / 10.0
    print(f"lambda = {lam!r}")
    errors = []
    try:
        for j in range(max(1, args.refine)):
            n = args.n_cells * 2**j
            dt = args.dt / 4**j
            cmp = neumann_comparison(args.stefan, params, t_start, args.t_final, n, dt)
            errors.append(cmp.linf_error)
            print(f"n_cells = {n} dt = {dt!r} s_exact = {cmp.s_exact_final!r} s_numeric = {cmp.s_numeric_final!r} linf_error = {cmp.linf_error!r}")
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    if len(errors) > 1:
        orders = observed_orders(errors)
        print("observed_orders = " + ", ".join(f"{o:.3f}" for o in orders))
        if orders.min() < args.min_order:
            return EXIT_CHECK_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stefanbc", description="Backstepping control of the one-phase Stefan problem")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="closed-loop simulation with checks, CSV output and figures")
    p_run.add_argument("--scenario", required=True, help="scenario file or bundled name (zinc_feasible, zinc_infeasible)")
    p_run.add_argument("--out", required=True, type=Path)
    p_run.add_argument("--checks", default="all", help="all | none | comma list of constraints,lyapunov,transforms,oracle")
    p_run.add_argument("--sweep", default=None, help="key=a,b,c over s0, c, setpoint_sr, h_slope, n_cells or t_final")
    p_run.add_argument("--refine", type=int, default=0, help="number of grid levels for a refinement study")
    p_run.add_argument("--no-figures", action="store_true", help="skip matplotlib figure rendering")

    p_cert = sub.add_parser("certify", help="print the decay-certificate constants")
    p_cert.add_argument("--scenario", required=True)
    p_cert.add_argument("--p", type=float, default=None, help="Lyapunov weight (default: half its upper bound)")

    p_ker = sub.add_parser("verify-kernels", help="evaluate the inverse-kernel conditions")
    p_ker.add_argument("--scenario", required=True)
    p_ker.add_argument("--samples", type=int, default=1000)

    p_or = sub.add_parser("oracle", help="compare the solver with the Neumann similarity solution")
    p_or.add_argument("--stefan", type=float, required=True)
    p_or.add_argument("--t-final", type=float, required=True)
    p_or.add_argument("--scenario", default=None, help="take material constants from this scenario (default: zinc)")
    p_or.add_argument("--n-cells", type=int, default=16)
    p_or.add_argument("--dt", type=float, default=1.0)
    p_or.add_argument("--refine", type=int, default=1, help="grid doublings (dt divided by 4 per level)")
    p_or.add_argument("--min-order", type=float, default=1.8)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        try:
            checks = parse_check_selection(args.checks)
            sweep = parse_sweep(args.sweep) if args.sweep else None
        except ValueError as exc:
            print(f"input error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        manifest = RunManifest(args.scenario, args.out, checks, sweep, args.refine, not args.no_figures)
        return run_command(manifest)
    if args.command == "certify":
        return certify_command(args)
    if args.command == "verify-kernels":
        return verify_kernels_command(args)
    return oracle_command(args)


if __name__ == "__main__":
    sys.exit(main())
