"""Delimited output: trace and check CSVs, certificate report, gnuplot script."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .diagnostics import CSV_COLUMNS, DecayCertificate, TraceRecord

TRACE_FILE = "trace.csv"
CHECKS_FILE = "checks.csv"
CERTIFICATE_FILE = "certificate.txt"
PLOT_SCRIPT_FILE = "plots.gp"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"refusing to write non-finite value {value!r}")
    return repr(value)


def write_trace_csv(records: list[TraceRecord], path: Path) -> Path:
    """One row per record; flag columns are 1 where a constraint is violated."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([_fmt(getattr(r, name)) for name in CSV_COLUMNS])
    return path


def read_trace_csv(path: Path) -> list[dict[str, float]]:
    with open(path, newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_checks_csv(checks, path: Path) -> Path:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["group", "name", "passed", "value", "tolerance", "detail"])
        for c in checks:
            writer.writerow([c.group, c.name, "1" if c.passed else "0", repr(float(c.value)), repr(float(c.tolerance)), c.detail])
    return path


def format_certificate(cert: DecayCertificate) -> str:
    return "".join(f"{key} = {value!r}\n" for key, value in cert.as_dict().items())


def write_certificate(cert: DecayCertificate, path: Path, extra: dict[str, object] | None = None) -> Path:
    lines = format_certificate(cert)
    for key, value in (extra or {}).items():
        lines += f"{key} = {value}\n"
    Path(path).write_text(lines)
    return path


def write_gnuplot_script(path: Path, setpoint: float, trace: str = TRACE_FILE) -> Path:
    """Standalone gnuplot script reproducing the three report figures from the trace CSV."""
    script = f"""# gnuplot {Path(path).name}
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 800,500
set xlabel 'time [s]'

set output 'gp_interface.png'
set ylabel 'interface position s(t) [m]'
plot '{trace}' using 't':'s' with lines dt 2 title 's(t)', \\
     {setpoint!r} with lines lc 'black' title 's_r'

set output 'gp_h1_norm.png'
set logscale y
set ylabel '||T - T_m||_{{H1}}'
plot '{trace}' using 't':(sqrt(column('h1_sq'))) with lines dt 2 title 'H1 norm'
unset logscale y

set output 'gp_control.png'
set ylabel 'q_c(t) [W/m^2]'
plot '{trace}' using 't':'q_c' with lines dt 2 title 'q_c(t)', \\
     '{trace}' using 't':'q_c_predicted' with lines dt 3 title 'q_c(0) exp(-ct)'
"""
    Path(path).write_text(script)
    return path
