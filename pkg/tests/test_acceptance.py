"""Acceptance criteria, one test each; a summary line per criterion is printed at the end of the run."""

import time

import numpy as np
import pytest

from stefanbc.controller import closed_loop_run
from stefanbc.core import ZINC
from stefanbc.diagnostics import (
    Tolerances,
    decay_certificate,
    l2_norm_sq,
    neumann_comparison,
    norm_sandwich,
    observed_orders,
)
from stefanbc.transforms import KernelSet, direct_transform, inverse_transform, kernel_residuals

ORACLE_HORIZON = 300.0
ORACLE_TOL = 0.02


def _oracle_errors(scenario, n_cells):
    # dt shrinks with the grid so that the time error refines alongside the space error
    level = scenario.with_(t_final=ORACLE_HORIZON, output_interval=0.0, n_cells=n_cells, dt=0.06 * 200 / n_cells)
    start = time.perf_counter()
    records = closed_loop_run(level)
    elapsed = time.perf_counter() - start
    q0 = records[0].q_c
    flux = max(abs(r.q_c - r.q_c_predicted) for r in records) / q0
    energy = max(abs(r.energy_E - r.energy_predicted) / abs(r.energy_predicted) for r in records)
    return flux, energy, elapsed


@pytest.fixture(scope="module")
def oracle_study(feasible):
    return {n: _oracle_errors(feasible, n) for n in (100, 200, 400)}


def _eps_tol(trace, scenario):
    return Tolerances.for_run(scenario, trace[0].u, trace[0].q_c)


@pytest.mark.criterion(1, "exact flux decay q_c(0) exp(-ct)")
def test_criterion_01_flux_decay(oracle_study):
    errors = {n: v[0] for n, v in oracle_study.items()}
    print(f"flux errors {errors}")
    assert errors[200] <= ORACLE_TOL
    assert errors[100] / errors[400] >= 3.0
    assert all(v[2] < 30.0 for v in oracle_study.values())


@pytest.mark.criterion(2, "energy ODE oracle")
def test_criterion_02_energy_oracle(oracle_study):
    errors = {n: v[1] for n, v in oracle_study.items()}
    print(f"energy errors {errors}")
    assert errors[200] <= ORACLE_TOL
    assert errors[100] / errors[400] >= 3.0


@pytest.mark.criterion(3, "Neumann similarity oracle, order >= 1.8")
def test_criterion_03_neumann_order():
    start = time.perf_counter()
    t0 = 100.0
    errors = [
        neumann_comparison(0.2, ZINC, t0, 10 * t0, n, 1.0 * (16 / n) ** 2).linf_error
        for n in (16, 32, 64, 128)
    ]
    orders = observed_orders(errors)
    print(f"errors {errors} orders {orders}")
    assert np.all(orders >= 1.8)
    assert time.perf_counter() - start < 60.0


@pytest.mark.criterion(4, "physical constraints on the feasible run")
def test_criterion_04_constraints(feasible_trace, feasible):
    tol = _eps_tol(feasible_trace, feasible)
    for r in feasible_trace:
        assert r.q_c > -tol.q_c, r.t
        assert r.s_dot > -tol.s_dot, r.t
        assert feasible.s0 - tol.s <= r.s <= feasible.setpoint_sr + tol.s, r.t
        assert r.min_u >= -tol.u, r.t


@pytest.mark.criterion(5, "infeasible setpoint: q_c(0) < 0 and s_dot(0) < 0")
def test_criterion_05_infeasible_start(infeasible_trace):
    first = infeasible_trace[0]
    print(f"q_c(0) = {first.q_c!r}, s_dot(0) = {first.s_dot!r}")
    assert first.q_c < 0
    assert first.s_dot < 0


@pytest.mark.criterion(6, "Lyapunov envelope and non-increasing V")
def test_criterion_06_lyapunov(feasible_trace, feasible):
    cert = decay_certificate(feasible)
    assert cert.b == pytest.approx(6.08e-5, rel=1e-3)
    tol = _eps_tol(feasible_trace, feasible)
    ratio = max(r.v1 / r.envelope_bound for r in feasible_trace)
    v = np.array([r.v for r in feasible_trace])
    rise = float(np.max(np.diff(v)))
    print(f"max V1/envelope = {ratio!r}, max V increase = {rise!r} (allowed {tol.eps * v[0]!r})")
    assert ratio <= 1.0
    assert rise <= tol.eps * v[0]


@pytest.mark.criterion(7, "norm equivalence sandwich")
def test_criterion_07_norm_equivalence(feasible_trace, feasible):
    cert = decay_certificate(feasible)
    for r in feasible_trace:
        bounds = norm_sandwich(r.u, r.s, feasible, cert)
        assert bounds.lower <= bounds.middle <= bounds.upper, r.t


def _smooth_profile(rng, xi):
    coef = rng.normal(size=5) * rng.uniform(1.0, 1e3)
    return (1.0 - xi) * sum(a * np.cos(np.pi * j * xi) for j, a in enumerate(coef))


@pytest.mark.criterion(8, "transform round trip")
def test_criterion_08_round_trip(feasible):
    worst = {}
    for n in (100, 200, 400):
        scenario = feasible.with_(n_cells=n)
        xi = scenario.grid
        rng = np.random.default_rng(20240)
        errs = []
        for _ in range(100):
            u = _smooth_profile(rng, xi)
            s = scenario.setpoint_sr
            target = direct_transform(u, s, scenario)
            back = inverse_transform(target.w, target.X, scenario)
            errs.append(np.sqrt(l2_norm_sq(back - u, s) / l2_norm_sq(u, s)))
        worst[n] = max(errs)
    print(f"worst relative L2 error {worst}")
    assert worst[200] <= 1e-3
    assert worst[100] / worst[200] == pytest.approx(4.0, rel=0.15)
    assert worst[200] / worst[400] == pytest.approx(4.0, rel=0.15)


@pytest.mark.criterion(9, "kernel conditions")
def test_criterion_09_kernels(feasible):
    checks = kernel_residuals(KernelSet.from_scenario(feasible), feasible.setpoint_sr, n_samples=1000)
    assert len(checks) == 6
    for check in checks:
        print(f"{check.name}: {check.residual:.3e} <= {check.tolerance:.3e}")
        if check.method == "closed-form":
            assert check.tolerance <= 1e-8
        assert check.passed, check.name


@pytest.mark.criterion(10, "w(s) and w_x(0) vanish along the feasible trace")
def test_criterion_10_target_boundary(feasible_trace, feasible):
    tol = _eps_tol(feasible_trace, feasible)
    w_s = max(abs(r.w_interface) for r in feasible_trace)
    wx_0 = [abs(r.wx_origin) for r in feasible_trace]
    print(f"max |w(s)| = {w_s!r} (tol {tol.w_interface!r}); |w_x(0)| at t=0: {wx_0[0]!r}, "
          f"max for t>0: {max(wx_0[1:])!r} (tol {tol.wx_origin!r})")
    assert w_s <= tol.w_interface
    assert max(wx_0) <= tol.wx_origin


@pytest.mark.criterion(11, "convergence to the setpoint")
def test_criterion_11_convergence(feasible_run, feasible):
    feasible_trace, elapsed = feasible_run
    last = feasible_trace[-1]
    print(f"s(t_final) = {last.s!r}, H1 ratio = {last.h1_sq / feasible_trace[0].h1_sq!r}, runtime {elapsed:.1f} s")
    assert last.t == pytest.approx(20000.0)
    assert abs(last.s - feasible.setpoint_sr) <= 0.01 * feasible.setpoint_sr
    assert last.h1_sq <= 1e-4 * feasible_trace[0].h1_sq
    assert elapsed < 120.0
