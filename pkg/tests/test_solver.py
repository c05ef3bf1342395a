import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stefanbc.controller import energy
from stefanbc.core import ZINC, InterfaceCollapseError, Scenario, StepSizeError
from stefanbc.solver import Solver, SolverState, explicit_dt_limit, immobilized_rhs, initial_state, run

ALPHA, BETA, K = ZINC.alpha, ZINC.beta, ZINC.k


def _prescribed(**kw):
    base = dict(params=ZINC, gain_c=0.01, setpoint_sr=0.35, s0=0.01, h_slope=1e4, t_final=10.0,
                bc_mode="prescribed-flux", dt=0.01)
    base.update(kw)
    return Scenario(**base)


def test_rhs_equilibrium():
    state = SolverState(np.zeros(51), 0.2, 0.0)
    du, s_dot = immobilized_rhs(state, 0.0, ALPHA, BETA, K)
    assert np.all(du == 0.0)
    assert s_dot == 0.0


def test_rhs_linear_profile():
    h, s = 1e4, 0.01
    xi = np.linspace(0, 1, 201)
    state = SolverState(h * s * (1 - xi), s, 0.0)
    du, s_dot = immobilized_rhs(state, K * h, ALPHA, BETA, K)
    assert s_dot == pytest.approx(BETA * h, rel=1e-12)
    # only the advection term survives on linear data
    expected = xi[1:-1] * s_dot / s * (-h * s)
    np.testing.assert_allclose(du[1:-1], expected, rtol=1e-9)
    assert du[-1] == 0.0


def test_rhs_collapse():
    with pytest.raises(InterfaceCollapseError):
        immobilized_rhs(SolverState(np.zeros(11), 1e-9, 0.0), 0.0, ALPHA, BETA, K)


@pytest.mark.parametrize("integrator", ["implicit", "explicit"])
def test_equilibrium_is_unchanged(integrator):
    sc = _prescribed(integrator=integrator, h_slope=0.0, s0=0.2, dt="auto", t_final=5.0, n_cells=20)
    records = run(sc, initial=SolverState(np.zeros(21), 0.2, 0.0))
    for r in records:
        assert np.all(r.state.u == 0.0)
        assert r.state.s == 0.2


def test_zero_horizon_gives_single_record():
    records = run(_prescribed(t_final=0.0))
    assert len(records) == 1
    assert records[0].state.t == 0.0


def _traveling_wave(xi, s, s_dot0, h):
    return ALPHA * h / s_dot0 * (np.exp(s_dot0 * s * (1 - xi) / ALPHA) - 1.0)


def _traveling_wave_error(n, dt):
    # exact solution advancing at constant speed beta*H under the flux k H exp(s_dot0 s / alpha)
    h, s_init, t_final = 1e3, 0.05, 200.0
    s_dot0 = BETA * h
    sc = _prescribed(n_cells=n, dt=dt, t_final=t_final, s0=s_init, h_slope=h)
    xi = sc.grid
    u0 = _traveling_wave(xi, s_init, s_dot0, h)

    def flux(state):
        # flux at the midpoint of the coming step of the exact trajectory
        s_mid = s_init + s_dot0 * (state.t + 0.5 * dt)
        return K * h * math.exp(s_dot0 * s_mid / ALPHA)

    records = run(sc, flux, initial=SolverState(u0, s_init, 0.0))
    err_s = max(abs(r.state.s - (s_init + s_dot0 * r.state.t)) for r in records)
    err_v = max(abs(r.s_dot - s_dot0) for r in records) / s_dot0
    return err_s, err_v


def test_traveling_wave_manufactured_solution():
    coarse = _traveling_wave_error(20, 0.4)
    fine = _traveling_wave_error(40, 0.1)
    assert coarse[1] < 5e-3
    # halving dxi and quartering dt quarters the error
    assert coarse[0] / fine[0] > 3.0
    assert coarse[1] / fine[1] > 3.0


def test_positive_flux_advances_interface():
    sc = _prescribed(bc_value=2.5e6, t_final=10.0, dt=0.01)
    records = run(sc)
    s = np.array([r.state.s for r in records])
    assert np.all(np.diff(s) > 0)


def _energy_residual(n, dt):
    sc = _prescribed(bc_value=2.5e6, t_final=20.0, dt=dt, n_cells=n)
    records = run(sc)
    worst = 0.0
    for a, b in zip(records, records[1:]):
        d_e = energy(b.state.u, b.state.s, ALPHA, BETA) - energy(a.state.u, a.state.s, ALPHA, BETA)
        expected = a.flux_in / K * (b.state.t - a.state.t)
        worst = max(worst, abs(d_e - expected) / abs(expected))
    return worst


def test_discrete_energy_balance_converges():
    coarse = _energy_residual(50, 0.04)
    fine = _energy_residual(100, 0.01)
    assert fine < coarse
    assert coarse / fine > 2.0


def test_explicit_step_above_limit_raises():
    sc = _prescribed(integrator="explicit")
    solver = Solver(sc)
    state = initial_state(sc)
    limit = explicit_dt_limit(state.s, sc.n_cells, ALPHA)
    solver.step(state, 0.0, 0.5 * limit)
    with pytest.raises(StepSizeError):
        solver.step(state, 0.0, 2.0 * limit)


def test_bad_cfl_and_dt():
    with pytest.raises(StepSizeError):
        Solver(_prescribed(), cfl=1.5)
    sc = _prescribed()
    with pytest.raises(StepSizeError):
        Solver(sc).step(initial_state(sc), 0.0, 0.0)


def test_interface_collapse_reports_time():
    # strong cooling on a thin melt drives the interface back through zero
    sc = _prescribed(s0=0.001, h_slope=0.0, bc_value=-1e7, t_final=1000.0, dt=0.01, n_cells=20)
    with pytest.raises(InterfaceCollapseError) as info:
        run(sc)
    assert info.value.t > 0
    assert "at t=" in str(info.value)


@pytest.mark.parametrize("integrator", ["implicit", "explicit"])
def test_invariants_under_positive_flux(integrator):
    sc = _prescribed(integrator=integrator, bc_value=1e6, t_final=5.0, dt="auto" if integrator == "explicit" else 0.01,
                     n_cells=40)
    for r in run(sc):
        assert r.state.u[-1] == 0.0
        assert r.state.s > 0
        assert np.min(r.state.u) >= -1e-9


def test_integrators_agree():
    implicit = run(_prescribed(n_cells=40, dt=0.001, t_final=2.0, bc_value=1e6))[-1]
    explicit = run(_prescribed(n_cells=40, dt="auto", t_final=2.0, bc_value=1e6, integrator="explicit"))[-1]
    assert explicit.state.s == pytest.approx(implicit.state.s, rel=1e-4)


def test_grid_independence_of_final_interface():
    finals = [run(_prescribed(n_cells=n, dt=0.02, t_final=10.0, bc_value=1e6))[-1].state.s for n in (50, 100, 200)]
    assert abs(finals[2] - finals[1]) < abs(finals[1] - finals[0])
    assert finals[2] == pytest.approx(finals[1], rel=1e-4)


def test_prescribed_temperature_holds_boundary():
    sc = _prescribed(bc_mode="prescribed-temperature", bc_value=50.0, n_cells=20, dt=0.1)
    for r in run(sc)[1:]:
        assert r.state.u[0] == 50.0


def test_output_interval_thins_records():
    sc = _prescribed(dt=0.01, t_final=10.0, output_interval=1.0)
    times = [r.state.t for r in run(sc)]
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(10.0)
    assert len(times) == 11


@settings(max_examples=20, deadline=None)
@given(flux=st.floats(0.0, 5e6), n=st.sampled_from([16, 32, 64]))
def test_non_negative_flux_never_retreats(flux, n):
    sc = _prescribed(bc_value=flux, t_final=2.0, dt=0.05, n_cells=n)
    s = np.array([r.state.s for r in run(sc)])
    assert np.all(np.diff(s) >= -1e-15)
