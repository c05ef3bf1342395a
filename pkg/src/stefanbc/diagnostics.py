"""Norms, Lyapunov functionals, decay constants, constraint monitors and oracles."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy.optimize import bisect
from scipy.special import erf

from .controller import energy, predicted_energy, predicted_flux
from .core import PhysicalParams, Scenario, StefanError, build_initial_profile, trapezoid
from .solver import SolverState, StepResult, run
from .transforms import TargetState, boundary_values, direct_transform

# Leading coefficient of the closed-loop flux error, err ~ C * dxi^2, measured
# on the zinc scenario with dt refined alongside the grid (C ~ 4 at n = 100..800).
TRUNCATION_COEFF = 4.0


class CertificateInfeasibleError(StefanError):
    pass


def discretization_tolerance(n_cells: int, coefficient: float = TRUNCATION_COEFF) -> float:
    """Dimensionless tolerance ``10 * C * dxi^2`` shared by every monitor."""
    return 10.0 * coefficient / n_cells**2


def spatial_derivative(u: np.ndarray, s: float) -> np.ndarray:
    """``du/dx`` on the immobilized grid (central inside, one-sided at both ends)."""
    n = len(u) - 1
    return np.gradient(u, 1.0 / n, edge_order=2) / s


def l2_norm_sq(u: np.ndarray, s: float) -> float:
    return trapezoid(np.asarray(u) ** 2, s)


def h1_norm_sq(u: np.ndarray, s: float) -> float:
    u = np.asarray(u, dtype=float)
    return trapezoid(u**2, s) + trapezoid(spatial_derivative(u, s) ** 2, s)


def lyapunov_v1(target: TargetState, s: float, p: float) -> float:
    """``0.5 int w^2 + 0.5 int w_x^2 + 0.5 p X^2``."""
    if not p > 0:
        raise StefanError(f"Lyapunov weight p must be positive, got {p}")
    return 0.5 * h1_norm_sq(target.w, s) + 0.5 * p * target.X**2


def sinc(x: float) -> float:
    # unnormalized: sin(x)/x, not numpy's sin(pi x)/(pi x)
    return 1.0 if x == 0 else math.sin(x) / x


@dataclass(frozen=True)
class DecayCertificate:
    p: float
    a: float
    b: float
    m1: float
    m2: float
    m3: float
    m4: float
    m5: float
    m6: float
    m7: float
    m8: float
    delta_bar: float
    delta_under: float
    big_d: float

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


def p_upper_bound(scenario: Scenario) -> float:
    return scenario.gain_c * scenario.alpha / (scenario.beta**2 * scenario.setpoint_sr)


def decay_certificate(scenario: Scenario, p: float | None = None) -> DecayCertificate:
    """Evaluate the exponential-decay constants for ``(c, s_r, alpha, beta)``.

    ``p`` defaults to half of its admissible upper bound ``c alpha / (beta^2 s_r)``.
    """
    c, alpha, beta, sr = scenario.gain_c, scenario.alpha, scenario.beta, scenario.setpoint_sr
    if p is None:
        p = 0.5 * p_upper_bound(scenario)
    if not p > 0:
        raise CertificateInfeasibleError(f"p must be positive, got {p}")
    b = min(2.0 * alpha / (4.0 * sr**2 + 1.0), 2.0 * (c - p * beta**2 * sr / alpha))
    if not b > 0:
        raise CertificateInfeasibleError(f"decay rate b={b:.3e} is not positive; p={p:.3e} is too large")
    a = c * alpha / (2.0 * beta) * max(1.0, (1.0 + c * alpha / beta) / p)

    osc = sinc(2.0 * math.sqrt(c / alpha) * sr)
    m1 = 3.0 * (1.0 + c**2 * sr**3 / (3.0 * alpha**2))
    m2 = c**2 * sr**3 / beta**2
    m3 = 3.0 * c**2 * sr / alpha**2
    m4 = 3.0 * c**2 * sr / beta**2
    m5 = 3.0 * (1.0 + c * sr**2 / (2.0 * alpha) * (1.0 - osc))
    m6 = 3.0 * c * alpha * sr / (2.0 * beta**2) * (1.0 - osc)
    m7 = 3.0 * c**2 * sr**2 / (2.0 * alpha**2) * (1.0 + osc)
    m8 = 3.0 * c**2 * sr / (2.0 * beta**2) * (1.0 + osc)
    delta_bar = max(m1 + m3, p + m2 + m4)
    delta_under = min(1.0, p) / max(m5 + m7, m6 + m8 + 1.0)
    big_d = delta_bar / delta_under * math.exp(a * sr)
    return DecayCertificate(p, a, b, m1, m2, m3, m4, m5, m6, m7, m8, delta_bar, delta_under, big_d)


@dataclass(frozen=True)
class Tolerances:
    """Absolute tolerances derived from one dimensionless ``eps`` and run scales."""

    eps: float
    q_c: float
    s_dot: float
    s: float
    u: float
    w_interface: float
    wx_origin: float

    @classmethod
    def for_run(cls, scenario: Scenario, u0: np.ndarray, q_c0: float, eps: float | None = None) -> Tolerances:
        eps = discretization_tolerance(scenario.n_cells) if eps is None else eps
        k, beta = scenario.params.k, scenario.beta
        grad_scale = max(scenario.h_slope, abs(q_c0) / k)
        u_scale = max(float(np.max(np.abs(u0))), grad_scale * scenario.s0)
        return cls(
            eps=eps,
            q_c=eps * abs(q_c0),
            s_dot=eps * beta * grad_scale,
            s=eps * scenario.setpoint_sr,
            u=eps * u_scale,
            w_interface=eps * u_scale,
            wx_origin=eps * grad_scale,
        )


@dataclass(frozen=True)
class ConstraintFlags:
    qc_ok: bool
    sdot_ok: bool
    band_ok: bool
    temp_ok: bool
    qc_violation: float
    sdot_violation: float
    band_violation: float
    temp_violation: float

    @property
    def all_ok(self) -> bool:
        return self.qc_ok and self.sdot_ok and self.band_ok and self.temp_ok


@dataclass
class TraceRecord:
    t: float
    s: float
    s_dot: float
    q_c: float
    q_c_predicted: float
    energy_E: float
    energy_predicted: float
    l2_sq: float
    h1_sq: float
    x_sq: float
    v1: float
    v: float
    envelope_bound: float
    flag_qc: bool
    flag_sdot: bool
    flag_band: bool
    flag_temp: bool
    min_u: float = 0.0
    w_interface: float = 0.0
    wx_origin: float = 0.0
    w_h1_sq: float = 0.0
    u: np.ndarray | None = None


CSV_COLUMNS = tuple(f.name for f in fields(TraceRecord))[:17]


def constraint_monitor(record: TraceRecord, scenario: Scenario, tol: Tolerances) -> ConstraintFlags:
    """Physical-constraint check for one record; violation magnitudes are >= 0."""
    qc_v = max(0.0, -record.q_c)
    sdot_v = max(0.0, -record.s_dot)
    band_v = max(0.0, scenario.s0 - record.s, record.s - scenario.setpoint_sr)
    temp_v = max(0.0, -record.min_u)
    return ConstraintFlags(
        qc_ok=qc_v <= tol.q_c,
        sdot_ok=sdot_v <= tol.s_dot,
        band_ok=band_v <= tol.s,
        temp_ok=temp_v <= tol.u,
        qc_violation=qc_v,
        sdot_violation=sdot_v,
        band_violation=band_v,
        temp_violation=temp_v,
    )


def build_trace(
    snapshots: list[StepResult],
    scenario: Scenario,
    certificate: DecayCertificate | None = None,
    tolerances: Tolerances | None = None,
    keep_profiles: bool = True,
) -> list[TraceRecord]:
    """Turn solver snapshots into diagnostic rows (one per snapshot)."""
    cert = certificate or decay_certificate(scenario)
    first = snapshots[0]
    t0 = first.state.t
    q0 = first.flux_in
    tol = tolerances or Tolerances.for_run(scenario, first.state.u, q0)
    alpha, beta = scenario.alpha, scenario.beta
    e0 = energy(first.state.u, first.state.s, alpha, beta)
    a, b = cert.a, cert.b

    rows: list[TraceRecord] = []
    v1_0 = None
    for snap in snapshots:
        u, s, t = snap.state.u, snap.state.s, snap.state.t
        target = direct_transform(u, s, scenario)
        w_h1 = h1_norm_sq(target.w, s)
        v1 = 0.5 * w_h1 + 0.5 * cert.p * target.X**2
        if v1_0 is None:
            v1_0 = v1
        w_s, wx_0 = boundary_values(target, s)
        row = TraceRecord(
            t=t,
            s=s,
            s_dot=snap.s_dot,
            q_c=snap.flux_in,
            q_c_predicted=float(predicted_flux(t - t0, q0, scenario.gain_c)),
            energy_E=energy(u, s, alpha, beta),
            energy_predicted=float(predicted_energy(t - t0, scenario, e0)),
            l2_sq=l2_norm_sq(u, s),
            h1_sq=h1_norm_sq(u, s),
            x_sq=target.X**2,
            v1=v1,
            v=v1 * math.exp(-a * s),
            envelope_bound=v1_0 * math.exp(a * (scenario.setpoint_sr - scenario.s0)) * math.exp(-b * (t - t0)),
            flag_qc=False,
            flag_sdot=False,
            flag_band=False,
            flag_temp=False,
            min_u=float(np.min(u)),
            w_interface=w_s,
            wx_origin=wx_0,
            w_h1_sq=w_h1,
            u=u.copy() if keep_profiles else None,
        )
        flags = constraint_monitor(row, scenario, tol)
        row.flag_qc = not flags.qc_ok
        row.flag_sdot = not flags.sdot_ok
        row.flag_band = not flags.band_ok
        row.flag_temp = not flags.temp_ok
        rows.append(row)
    return rows


@dataclass(frozen=True)
class NormSandwich:
    lower: float
    middle: float
    upper: float

    @property
    def holds(self) -> bool:
        return self.lower <= self.middle <= self.upper


def norm_sandwich(u: np.ndarray, s: float, scenario: Scenario, cert: DecayCertificate) -> NormSandwich:
    """Both sides of the plant/target norm equivalence at one state."""
    target = direct_transform(u, s, scenario)
    base = h1_norm_sq(u, s) + target.X**2
    middle = h1_norm_sq(target.w, s) + cert.p * target.X**2
    return NormSandwich(cert.delta_under * base, middle, cert.delta_bar * base)


def plant_decay_envelope(records: list[TraceRecord], cert: DecayCertificate) -> np.ndarray:
    """``D * (H1 norm + X^2)(0) * exp(-b t)`` at every record time."""
    t0 = records[0].t
    start = records[0].h1_sq + records[0].x_sq
    return np.array([cert.big_d * start * math.exp(-cert.b * (r.t - t0)) for r in records])


def neumann_lambda(stefan_number: float) -> float:
    """Positive root of ``lam * exp(lam^2) * erf(lam) = St / sqrt(pi)``."""
    if not stefan_number > 0:
        raise StefanError(f"Stefan number must be positive, got {stefan_number}")
    target = stefan_number / math.sqrt(math.pi)

    def f(lam):
        return lam * math.exp(lam * lam) * math.erf(lam) - target

    hi = 1.0
    while f(hi) < 0:
        hi *= 2.0
    return bisect(f, 0.0, hi, xtol=1e-300, rtol=1e-12, maxiter=2000)


def neumann_oracle(stefan_number: float, alpha: float, t):
    lam = neumann_lambda(stefan_number)
    return 2.0 * lam * np.sqrt(alpha * np.asarray(t, dtype=float))


def neumann_profile(xi: np.ndarray, t: float, stefan_number: float, params: PhysicalParams) -> tuple[np.ndarray, float]:
    """Similarity superheat on the immobilized grid at time ``t`` and the interface there."""
    lam = neumann_lambda(stefan_number)
    superheat = stefan_number * params.dh / params.cp
    s = 2.0 * lam * math.sqrt(params.alpha * t)
    u = superheat * (1.0 - erf(lam * xi) / math.erf(lam))
    u[-1] = 0.0
    return u, s


@dataclass(frozen=True)
class NeumannComparison:
    n_cells: int
    dt: float
    linf_error: float
    s_exact_final: float
    s_numeric_final: float


def neumann_comparison(
    stefan_number: float,
    params: PhysicalParams,
    t_start: float,
    t_end: float,
    n_cells: int,
    dt: float,
    integrator: str = "implicit",
) -> NeumannComparison:
    """Run the prescribed-temperature plant from the similarity state at ``t_start``."""
    xi = np.linspace(0.0, 1.0, n_cells + 1)
    u0, s0 = neumann_profile(xi, t_start, stefan_number, params)
    scenario = Scenario(
        params=params,
        gain_c=1.0,
        setpoint_sr=max(1.0, 10 * s0),
        s0=s0,
        h_slope=0.0,
        t_final=t_end - t_start,
        n_cells=n_cells,
        dt=dt,
        bc_mode="prescribed-temperature",
        integrator=integrator,
        bc_value=stefan_number * params.dh / params.cp,
        name=f"neumann-St{stefan_number}",
    )
    records = run(scenario, initial=SolverState(u0, s0, t_start))
    t = np.array([r.state.t for r in records])
    s = np.array([r.state.s for r in records])
    exact = neumann_oracle(stefan_number, params.alpha, t)
    return NeumannComparison(n_cells, dt, float(np.max(np.abs(s - exact))), float(exact[-1]), float(s[-1]))


def observed_orders(errors) -> np.ndarray:
    errors = np.asarray(errors, dtype=float)
    return np.log2(errors[:-1] / errors[1:])


def initial_flux(scenario: Scenario) -> float:
    from .controller import control_law

    u0 = build_initial_profile(scenario)
    return control_law(SolverState(u0, scenario.s0, 0.0), scenario).q_c
