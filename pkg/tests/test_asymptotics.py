"""Limit experiments: sweeps, wave residuals, gamma traces, lifespan formulas."""

from math import log

import numpy as np
import pytest

from rossbylab import asymptotics as asy
from rossbylab import primitive as pr
from rossbylab import qh
from rossbylab import spectral as sp

from conftest import random_divfree, random_scalar


@pytest.fixture(scope="module")
def params():
    return pr.SolverParams()


@pytest.fixture(scope="module")
def small_sweep(params):
    cfg = asy.SweepConfig(
        grid=sp.GridSpec(32), eps_list=[0.2, 0.1, 0.05], delta=0.1,
        horizon=0.5, seed=1, params=params,
    )
    return asy.run_eps_sweep(cfg)


def test_sweep_errors_decrease(small_sweep):
    finals = small_sweep.final_errors()
    assert len(finals) == 3
    assert all(a > b for a, b in zip(finals, finals[1:]))
    assert small_sweep.empirical_order is not None


def test_sweep_degenerate_delta_zero(params):
    cfg = asy.SweepConfig(
        grid=sp.GridSpec(32), eps_list=[0.2, 0.1], delta=0.0,
        horizon=0.5, seed=2, params=params,
    )
    res = asy.run_eps_sweep(cfg)
    for eps in res.eps_list:
        assert max(res.err[eps]) < 1e-8


def test_sweep_rho_identity(small_sweep):
    # rho - 1 = eps * R identically, so the reported ratio equals max|R|
    for eps in small_sweep.eps_list:
        for ratio, rec in zip(
            small_sweep.rho_dev_over_eps[eps], small_sweep.members[eps].records
        ):
            assert ratio == pytest.approx(rec.linf_R, rel=1e-12)


def test_sweep_requires_decreasing_eps(params):
    with pytest.raises(ValueError, match="strictly decreasing"):
        asy.SweepConfig(grid=sp.GridSpec(32), eps_list=[0.1, 0.2], params=params)


def test_gamma_identity_for_homogeneous(params):
    grid = sp.GridSpec(32)
    cfg = asy.SweepConfig(grid=grid, eps_list=[0.2, 0.1], delta=0.0,
                          horizon=0.4, seed=3, params=params)
    res = asy.run_eps_sweep(cfg)
    for tr in res.gamma_traces:
        for g, w in zip(tr.gamma, tr.omega):
            assert np.abs(g - w).max() < 1e-12
    lips = [tr.lip_gamma for tr in res.gamma_traces]
    assert max(lips) / min(lips) == pytest.approx(1.0, rel=1e-9)


def test_gamma_compactness_report(small_sweep):
    f = small_sweep.qh_trajectory.final
    omega_qh = sp.curl_arrays(
        sp.tables(f.grid), f.u.x_comp.values, f.u.y_comp.values
    )
    rep = asy.gamma_compactness(small_sweep.gamma_traces, omega_qh)
    assert rep.lip_band_ratio <= 3.0
    assert np.isfinite(rep.gamma_omega_K)
    assert rep.distances_decreasing


def test_gamma_traces_must_share_times(small_sweep):
    broken = [small_sweep.gamma_traces[0], small_sweep.gamma_traces[1]]
    broken[1] = asy.GammaTrace(
        broken[1].epsilon, [t + 0.1 for t in broken[1].times],
        broken[1].gamma, broken[1].omega, broken[1].lip_gamma,
        broken[1].lip_grad_momentum,
    )
    with pytest.raises(ValueError, match="share output times"):
        asy.gamma_compactness(broken, broken[0].omega[-1])


# ---------------------------------------------------------------------------
# wave residuals
# ---------------------------------------------------------------------------

def test_wave_residual_stationary(grid64, params):
    X, Y = sp.coordinates(grid64)
    zero = np.zeros((64, 64))
    frames = []
    for t in (0.0, 0.1, 0.2):
        state = pr.PrimitiveState(
            t, 0.1,
            sp.ScalarField(grid64, zero.copy()),
            sp.VectorField(sp.ScalarField(grid64, -np.sin(Y)),
                           sp.ScalarField(grid64, zero.copy())),
            sp.ScalarField(grid64, zero.copy()),
        )
        state, _ = pr._resolve_pressure(state, params)
        frames.append(state)
    res = asy.wave_residual(*frames)
    assert res.r_mass < 1e-12
    assert res.r_mom < 1e-12


def test_wave_residual_identity_and_refinement(grid64, params):
    data = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=4)
    values = []
    for n_out in (5, 9):
        traj = pr.integrate_primitive(
            data, 0.5, params, output_times=list(np.linspace(0, 0.5, n_out))
        )
        res = asy.wave_residual(traj.frames[0], traj.frames[1], traj.frames[2])
        values.append(res)
        # algebraic identity: with div u = 0, the rescaled mass residual is
        # eps times the transport-form residual
        assert res.r_mass == pytest.approx(0.1 * res.r_mass_transport, abs=1e-12)
    assert values[1].r_mass == pytest.approx(values[0].r_mass / 4.0, rel=0.05)


def test_wave_residual_rejects_bad_frames(grid64, params):
    data = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=5)
    traj = pr.integrate_primitive(data, 0.2, params,
                                  output_times=[0.0, 0.1, 0.2])
    with pytest.raises(ValueError, match="ordered"):
        asy.wave_residual(traj.frames[1], traj.frames[0], traj.frames[2])


# ---------------------------------------------------------------------------
# limit constraint
# ---------------------------------------------------------------------------

def test_limit_constraint_divfree(grid64):
    u = random_divfree(grid64, seed=6)
    norm = np.hypot(sp.l2_norm(u.x_comp.values), sp.l2_norm(u.y_comp.values))
    assert asy.limit_constraint_check(u) <= 1e-10 * norm


def test_limit_constraint_zero(grid64):
    zero = np.zeros((64, 64))
    u = sp.VectorField(sp.ScalarField(grid64, zero.copy()),
                       sp.ScalarField(grid64, zero.copy()))
    assert asy.limit_constraint_check(u) == 0.0


def test_limit_constraint_negative_control(grid64):
    # u = grad f is not divergence-free; P(perp(grad f)) is computable
    # directly since perp(grad f) is itself divergence-free: the projector
    # keeps it entirely
    f = sp.dealias(random_scalar(grid64, seed=7))
    gradient = sp.gradient(f)
    value = asy.limit_constraint_check(gradient)
    perp_grad = sp.perp(gradient)
    expected = np.hypot(
        sp.l2_norm(perp_grad.x_comp.values), sp.l2_norm(perp_grad.y_comp.values)
    )
    assert value == pytest.approx(expected, rel=1e-12)
    assert value > 1e-3


# ---------------------------------------------------------------------------
# lifespan formulas and sweep logic
# ---------------------------------------------------------------------------

def test_lower_bound_qh_reference_value():
    assert asy.lower_bound_qh(1.0, 1.0, 1.0) == pytest.approx(
        log(log(2.0) + 1.0), abs=1e-12
    )


def test_lower_bound_qh_diverges_as_r0_vanishes():
    values = [asy.lower_bound_qh(1.0, r, 1.0) for r in (1e-1, 1e-4, 1e-8)]
    assert values[0] < values[1] < values[2]
    assert asy.lower_bound_qh(1.0, 0.0, 1.0) == np.inf


def test_lower_bound_primitive_eps_zero_reduction():
    # B0 = A0 at eps = 0, so the bound collapses to the limit-system shape
    for a0 in (0.5, 1.0, 2.0):
        assert asy.lower_bound_primitive(1.0, a0, 0.0, 1.0, 1.0) == pytest.approx(
            asy.lower_bound_qh(1.0, a0, 1.0), rel=1e-14
        )


def test_lower_bound_monotonicity_grids():
    e_grid = np.linspace(0.5, 3.0, 6)
    a_grid = np.linspace(0.1, 2.0, 7)
    for e0 in e_grid:
        vals = [asy.lower_bound_primitive(e0, a0, 0.1) for a0 in a_grid]
        assert all(x > y for x, y in zip(vals, vals[1:]))
    for a0 in a_grid:
        qh_vals = [asy.lower_bound_qh(u0, a0) for u0 in e_grid]
        assert all(np.isfinite(v) and v > 0 for v in qh_vals)


def test_lower_bound_validation():
    with pytest.raises(ValueError):
        asy.lower_bound_qh(0.0, 1.0)
    with pytest.raises(ValueError):
        asy.lower_bound_primitive(1.0, 1.0, 0.1, lam=0.5)


def test_lifespan_monotone_censoring_rules():
    def rep(delta, t, censored):
        return asy.LifespanReport(delta, None, t, censored, 1.0, 1.0,
                                  (1.0, 1.0), 1.0, 1.0, 1.0)

    # censored runs dominate anything measured
    assert asy.lifespan_monotone([rep(0.4, 2.0, True), rep(0.2, 2.0, True)])
    assert asy.lifespan_monotone([rep(0.4, 1.0, False), rep(0.2, 2.0, True)])
    assert asy.lifespan_monotone([rep(0.4, 1.0, False), rep(0.2, 1.5, False)])
    assert not asy.lifespan_monotone([rep(0.4, 1.5, False), rep(0.2, 1.0, False)])
    assert not asy.lifespan_monotone([rep(0.4, 2.0, True), rep(0.2, 1.0, False)])


def test_loglog_correlation_degenerate():
    def rep(delta, t, censored):
        return asy.LifespanReport(delta, None, t, censored, 1.0, 1.0,
                                  (1.0, 1.0), 1.0, 1.0, 1.0)

    assert np.isnan(asy.loglog_correlation([rep(0.4, 2.0, True)]))
    both = [rep(0.4, 1.0, False), rep(0.2, 1.5, False)]
    assert asy.loglog_correlation(both) == pytest.approx(1.0)


def test_lifespan_measure_censors_at_horizon(params):
    grid = sp.GridSpec(32)
    report = asy.lifespan_measure(grid, 0.1, None, params, seed=8, horizon=0.3)
    assert report.censored
    assert report.t_measured == 0.3
    assert report.epsilon is None
    assert report.t_lower_qh > 0
    assert report.constants_used == (1.0, 1.0)


def test_lifespan_measure_detects_events(params):
    grid = sp.GridSpec(32)
    tight = pr.SolverParams(blowup_threshold=1e-6)
    report = asy.lifespan_measure(grid, 0.1, None, tight, seed=8, horizon=0.3)
    assert not report.censored
    assert report.t_measured == 0.0


def test_lifespan_primitive_mode(params):
    grid = sp.GridSpec(32)
    report = asy.lifespan_measure(grid, 0.1, 0.1, params, seed=9, horizon=0.2)
    assert report.epsilon == 0.1
    assert report.censored
    assert np.isfinite(report.t_lower_primitive)


# ---------------------------------------------------------------------------
# stability twin
# ---------------------------------------------------------------------------

def test_stability_twin_small(params):
    res = asy.run_stability_twin(sp.GridSpec(32), 0.25, params, seed=10)
    assert res.history[0].entropy > 0
    assert res.within_envelope
    assert res.fitted_C <= res.gate_C
