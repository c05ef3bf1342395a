"""Figure rendering for run reports (interface, H1 norm, control input)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 5.0
colors = ["#1f4e9c", "#c0392b", "#2e8b57", "#8e44ad", "#d68910"]

params = {
    "axes.prop_cycle": matplotlib.cycler(color=colors),
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1.4,
    "savefig.bbox": "tight",
}

FIGURE_NAMES = ("interface.png", "h1_norm.png", "control.png")


def _column(records, name):
    return np.array([getattr(r, name) for r in records], dtype=float)


def plot_interface(runs, setpoint: float, path: Path) -> Path:
    """``runs`` is a list of ``(label, records)`` pairs."""
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, records in runs:
            ax.plot(_column(records, "t"), _column(records, "s"), "--", label=label)
        ax.axhline(setpoint, color="k", lw=0.8, label=r"$s_r$")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("interface position $s(t)$ [m]")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_h1(runs, path: Path) -> Path:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for label, records in runs:
            h1 = np.sqrt(np.maximum(_column(records, "h1_sq"), 1e-300))
            ax.semilogy(_column(records, "t"), h1, "--", label=label)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(r"$\|T - T_m\|_{H^1}$")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return path


def plot_control(runs, path: Path) -> Path:
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        for i, (label, records) in enumerate(runs):
            t = _column(records, "t")
            color = colors[i % len(colors)]
            ax.plot(t, _column(records, "q_c"), "--", color=color, label=label)
            ax.plot(t, _column(records, "q_c_predicted"), ":", color=color, lw=0.9, label=f"{label}, $q_c(0)e^{{-ct}}$")
        ax.axhline(0.0, color="k", lw=0.6)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(r"heat flux $q_c(t)$ [W m$^{-2}$]")
        ax.legend()
        fig.savefig(path)
        plt.close(fig)
    return path


def render_figures(runs, setpoint: float, folder: Path) -> list[Path]:
    folder = Path(folder)
    folder.mkdir(parents=True, exist_ok=True)
    return [
        plot_interface(runs, setpoint, folder / FIGURE_NAMES[0]),
        plot_h1(runs, folder / FIGURE_NAMES[1]),
        plot_control(runs, folder / FIGURE_NAMES[2]),
    ]
