"""Backstepping transformation, its inverse, and residual checks.

The direct map sends the plant state ``(u, X)`` with ``X = s - s_r`` to

    w(x) = u(x) + (c/alpha) int_x^s (y - x) u(y) dy + (c/beta) (s - x) X,

and the inverse uses the sine kernels

    u(x) = w(x) + h(s - x) X + int_x^s l(x, y) w(y) dy,
    h(r) = -(sqrt(c alpha)/beta) sin(k r),   l(x, y) = -k sin(k (y - x)),

with ``k = sqrt(c / alpha)``. All integrals use the trapezoid rule on the
immobilized-grid nodes at or beyond ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .core import Scenario, StefanError


@dataclass
class TargetState:
    w: np.ndarray
    X: float


def _tail_integrals(values: np.ndarray) -> np.ndarray:
    """``int_{xi_i}^1 values dxi`` for every node, by the trapezoid rule."""
    n = len(values) - 1
    cum = cumulative_trapezoid(values, dx=1.0 / n, initial=0.0)
    return cum[-1] - cum


def direct_transform(u: np.ndarray, s: float, scenario: Scenario) -> TargetState:
    c, alpha, beta = scenario.gain_c, scenario.alpha, scenario.beta
    u = np.asarray(u, dtype=float)
    xi = np.linspace(0.0, 1.0, len(u))
    x_err = s - scenario.setpoint_sr
    moment = _tail_integrals(xi * u) - xi * _tail_integrals(u)
    w = u + c / alpha * s**2 * moment + c / beta * s * (1.0 - xi) * x_err
    return TargetState(w, x_err)


def inverse_transform(w: np.ndarray, x_err: float, scenario: Scenario) -> np.ndarray:
    c, alpha, beta = scenario.gain_c, scenario.alpha, scenario.beta
    w = np.asarray(w, dtype=float)
    s = x_err + scenario.setpoint_sr
    k = math.sqrt(c / alpha)
    xi = np.linspace(0.0, 1.0, len(w))
    phase = k * s * xi
    # sin(k(y - x)) split into products so the tail integrals stay cumulative
    sin_part = _tail_integrals(np.sin(phase) * w)
    cos_part = _tail_integrals(np.cos(phase) * w)
    integral = k * s * (np.cos(phase) * sin_part - np.sin(phase) * cos_part)
    return w - math.sqrt(c * alpha) / beta * np.sin(k * s * (1.0 - xi)) * x_err - integral


def boundary_values(target: TargetState, s: float) -> tuple[float, float]:
    """``(w(s), w_x(0))`` with the three-point one-sided difference at ``x = 0``."""
    w = target.w
    n = len(w) - 1
    wx0 = (-3.0 * w[0] + 4.0 * w[1] - w[2]) * n / (2.0 * s)
    return float(w[-1]), float(wx0)


@dataclass(frozen=True)
class KernelSet:
    gain_c: float
    alpha: float
    beta: float

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> KernelSet:
        return cls(scenario.gain_c, scenario.alpha, scenario.beta)

    @property
    def wavenumber(self) -> float:
        return math.sqrt(self.gain_c / self.alpha)

    @property
    def h_amplitude(self) -> float:
        return math.sqrt(self.gain_c * self.alpha) / self.beta

    def h(self, r):
        return -self.h_amplitude * np.sin(self.wavenumber * r)

    def dh(self, r):
        return -self.gain_c / self.beta * np.cos(self.wavenumber * r)

    def l(self, x, y):
        k = self.wavenumber
        return -k * np.sin(k * (np.asarray(y) - np.asarray(x)))


@dataclass(frozen=True)
class KernelCheck:
    name: str
    method: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance


CLOSED_FORM_TOL = 1e-8


def kernel_residuals(kernels: KernelSet, s: float, n_samples: int = 1000, fd_step: float | None = None) -> list[KernelCheck]:
    """Residuals of the six kernel conditions, each scaled by its natural magnitude.

    Finite-difference checks use ``fd_step`` (default ``0.01 / k``) and are
    judged against twice their leading truncation term; the integral
    condition uses an ``n_samples``-panel trapezoid rule per sample point.
    """
    if not s > 0:
        raise StefanError("kernel residuals need a positive interface position")
    c, alpha, beta = kernels.gain_c, kernels.alpha, kernels.beta
    k = kernels.wavenumber
    step = 0.01 / k if fd_step is None else fd_step
    kd2 = (k * step) ** 2
    x = np.linspace(0.0, s, n_samples)
    r = s - x

    h_scale = kernels.h_amplitude
    h_dd = (kernels.h(r + step) - 2.0 * kernels.h(r) + kernels.h(r - step)) / step**2
    ode = np.max(np.abs(alpha * h_dd + c * kernels.h(r))) / (c * h_scale)

    dh0 = (kernels.h(step) - kernels.h(-step)) / (2.0 * step)
    initial = max(abs(kernels.h(0.0)) / h_scale, abs(dh0 + c / beta) / (c / beta))

    y = x[::-1]
    l_xx = (kernels.l(x + step, y) - 2.0 * kernels.l(x, y) + kernels.l(x - step, y)) / step**2
    l_yy = (kernels.l(x, y + step) - 2.0 * kernels.l(x, y) + kernels.l(x, y - step)) / step**2
    wave = np.max(np.abs(l_xx - l_yy)) / k**3

    diag = (kernels.l(x + step, x + step) - kernels.l(x - step, x - step)) / (2.0 * step)
    diagonal = np.max(np.abs(diag)) / k**2

    integral_res = 0.0
    for xj in x[:-1]:
        ys = np.linspace(xj, s, n_samples + 1)
        integral = np.trapezoid(kernels.l(xj, ys), ys)
        res = abs(c / beta * (1.0 + integral) + kernels.dh(s - xj))
        integral_res = max(integral_res, res)
    integral_res /= c / beta
    ks = k * s
    quad_tol = (ks / n_samples) ** 2 * max(1.0, ks) / 6.0

    boundary = np.max(np.abs(alpha * kernels.l(x, s) - beta * kernels.h(r))) / (alpha * k)

    return [
        KernelCheck("h_ode", "finite-difference", float(ode), kd2 / 6.0),
        KernelCheck("h_initial", "finite-difference", float(initial), kd2 / 3.0),
        KernelCheck("kernel_wave", "finite-difference", float(wave), kd2 / 6.0 + 1e-10),
        KernelCheck("kernel_diagonal", "finite-difference", float(diagonal), CLOSED_FORM_TOL),
        KernelCheck("kernel_integral", "quadrature", float(integral_res), quad_tol),
        KernelCheck("kernel_boundary", "closed-form", float(boundary), CLOSED_FORM_TOL),
    ]


@dataclass(frozen=True)
class TargetResidual:
    pde_abs: float
    pde_rel: float
    ode_abs: float
    ode_rel: float
    w_at_interface: float
    wx_at_origin: float


def target_residual(snapshots, scenario: Scenario) -> TargetResidual:
    """Check the transformed trajectory against the target PDE and interface ODE.

    ``snapshots`` are consecutive solver records at a uniform time step. Time
    derivatives are central differences at fixed ``x``; the forcing term uses
    each snapshot's recorded interface velocity.
    """
    if len(snapshots) < 3:
        raise StefanError(f"target residual needs at least 3 consecutive states, got {len(snapshots)}")
    c, alpha, beta = scenario.gain_c, scenario.alpha, scenario.beta
    times = np.array([snap.state.t for snap in snapshots])
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise StefanError("target residual needs a uniform time step")
    dt = steps[0]
    targets = [direct_transform(snap.state.u, snap.state.s, scenario) for snap in snapshots]

    n = scenario.n_cells
    dxi = 1.0 / n
    xi = np.linspace(0.0, 1.0, n + 1)
    pde_abs = pde_rel = ode_abs = ode_rel = 0.0
    w_s = wx_0 = 0.0
    for j in range(1, len(snapshots) - 1):
        snap = snapshots[j]
        s, s_dot = snap.state.s, snap.s_dot
        w = targets[j].w
        x_err = targets[j].X
        w_xi = (w[2:] - w[:-2]) / (2.0 * dxi)
        w_xixi = (w[2:] - 2.0 * w[1:-1] + w[:-2]) / dxi**2
        dw_fixed_xi = (targets[j + 1].w[1:-1] - targets[j - 1].w[1:-1]) / (2.0 * dt)
        w_t = dw_fixed_xi - xi[1:-1] * s_dot / s * w_xi
        diffusion = alpha * w_xixi / s**2
        forcing = c / beta * s_dot * x_err
        pde = np.abs(w_t - diffusion - forcing)
        pde_abs = max(pde_abs, float(pde.max()))
        pde_rel = max(pde_rel, float(pde.max() / (np.abs(diffusion).max() + abs(forcing) + 1e-300)))

        x_dot = (snapshots[j + 1].state.s - snapshots[j - 1].state.s) / (2.0 * dt)
        wx_s = (3.0 * w[-1] - 4.0 * w[-2] + w[-3]) / (2.0 * dxi * s)
        ode = abs(x_dot + c * x_err + beta * wx_s)
        ode_abs = max(ode_abs, ode)
        ode_rel = max(ode_rel, ode / (abs(c * x_err) + abs(beta * wx_s) + 1e-300))

        ws, wx0 = boundary_values(targets[j], s)
        w_s = max(w_s, abs(ws))
        wx_0 = max(wx_0, abs(wx0))
    return TargetResidual(pde_abs, pde_rel, ode_abs, ode_rel, w_s, wx_0)
