"""Primitive-system solver: pressure, right-hand side, stepping, data,
conserved quantities, relative-entropy stability."""

import numpy as np
import pytest

from rossbylab import primitive as pr
from rossbylab import spectral as sp
from rossbylab.errors import BlowUpError

from conftest import random_divfree


@pytest.fixture(scope="module")
def params():
    return pr.SolverParams()


def shear_state(grid, epsilon=0.1):
    """Stationary solution: a = 0, u = (-sin y, 0)."""
    X, Y = sp.coordinates(grid)
    zero = np.zeros((grid.n, grid.n))
    return pr.PrimitiveState(
        0.0, epsilon,
        sp.ScalarField(grid, zero.copy()),
        sp.VectorField(sp.ScalarField(grid, -np.sin(Y)), sp.ScalarField(grid, zero.copy())),
        sp.ScalarField(grid, zero.copy()),
    )


# ---------------------------------------------------------------------------
# pressure solver
# ---------------------------------------------------------------------------

def test_pressure_constant_coefficient_one_iteration(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.0, epsilon=0.1, seed=1)
    t = sp.tables(grid64)
    f_hat = pr._pressure_forcing_hat(
        t, state.a.values, state.u.x_comp.values, state.u.y_comp.values, 0.1
    )
    _, iters = pr._pressure_hat(t, state.a.values, 0.1, f_hat, params)
    assert iters == 1


def test_pressure_zero_velocity(grid64, params):
    zero = np.zeros((64, 64))
    a = sp.ScalarField(grid64, 0.1 * np.cos(sp.coordinates(grid64)[0]))
    u = sp.VectorField(sp.ScalarField(grid64, zero.copy()), sp.ScalarField(grid64, zero.copy()))
    pi = pr.solve_pressure(a, u, 0.1, params)
    assert np.abs(pi.values).max() < 1e-14


def test_pressure_manufactured_solution(grid64, params):
    # pick Pi*, a, u; build the forcing F = -div((1+eps a) grad Pi*) and
    # check the fixed point recovers Pi* through the same discrete operator
    X, Y = sp.coordinates(grid64)
    eps = 0.1
    pi_star = np.cos(X) * np.sin(2 * Y) + 0.3 * np.cos(3 * Y)
    pi_star -= pi_star.mean()
    a = 0.4 * np.cos(X + Y)
    t = sp.tables(grid64)
    gx, gy = sp.grad_arrays(t, pi_star)
    coeff = 1.0 + eps * a
    f_hat = -(t.ikx * np.fft.fft2(coeff * gx) + t.iky * np.fft.fft2(coeff * gy))
    pi_hat, iters = pr._pressure_hat(t, a, eps, f_hat, params)
    pi = sp.irfft2_real(pi_hat)
    assert np.abs(pi - pi_star).max() < 1e-9
    assert iters <= params.pressure_max_iter


def test_pressure_residual_contract(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=2)
    t = sp.tables(grid64)
    f_hat = pr._pressure_forcing_hat(
        t, state.a.values, state.u.x_comp.values, state.u.y_comp.values, 0.1
    )
    pi_hat, _ = pr._pressure_hat(t, state.a.values, 0.1, f_hat, params)
    gx = sp.irfft2_real(t.ikx * pi_hat)
    gy = sp.irfft2_real(t.iky * pi_hat)
    coeff = 1.0 + 0.1 * state.a.values
    res = (
        t.ikx * np.fft.fft2(coeff * gx) + t.iky * np.fft.fft2(coeff * gy) + f_hat
    )
    res[0, 0] = 0.0
    assert np.linalg.norm(res) <= params.pressure_tol * np.linalg.norm(f_hat)


def test_pressure_nonconvergence_reported(grid64):
    # eps*||a||_inf close to 1 makes the Neumann series useless
    X, _ = sp.coordinates(grid64)
    strong = pr.SolverParams(pressure_max_iter=4, density_bounds=(0.05, 50.0))
    a = 9.0 * np.cos(X)
    t = sp.tables(grid64)
    f_hat = np.fft.fft2(np.sin(X))
    with pytest.raises(pr.PressureConvergenceError):
        pr._pressure_hat(t, a, 1.0, f_hat, strong)


# ---------------------------------------------------------------------------
# right-hand side and stepping
# ---------------------------------------------------------------------------

def test_rhs_stationary_shear(grid64, params):
    da, du = pr.primitive_rhs(shear_state(grid64), params)
    assert np.abs(da.values).max() < 1e-12
    assert np.abs(du.x_comp.values).max() < 1e-12
    assert np.abs(du.y_comp.values).max() < 1e-12


def test_rhs_zero_state(grid64, params):
    zero = np.zeros((64, 64))
    state = pr.PrimitiveState(
        0.0, 0.1,
        sp.ScalarField(grid64, zero.copy()),
        sp.VectorField(sp.ScalarField(grid64, zero.copy()), sp.ScalarField(grid64, zero.copy())),
        sp.ScalarField(grid64, zero.copy()),
    )
    da, du = pr.primitive_rhs(state, params)
    assert np.abs(da.values).max() == 0.0
    assert np.abs(du.x_comp.values).max() == 0.0


def test_rhs_divergence_free(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=3)
    _, du = pr.primitive_rhs(state, params)
    assert np.abs(sp.divergence(du).values).max() < 1e-9


def test_step_euler_consistency(grid64, params):
    # (step - (state + dt*rhs)) must shrink like dt^2
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=3)
    _, du = pr.primitive_rhs(state, params)
    errs = []
    for h in (0.02, 0.01):
        stepped = pr.step_primitive(state, params, dt=h)
        euler = state.u.x_comp.values + h * du.x_comp.values
        errs.append(np.abs(stepped.u.x_comp.values - euler).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)


def test_step_stationary_100_steps(grid64, params):
    state = shear_state(grid64)
    cur = state.copy()
    for _ in range(100):
        cur = pr.step_primitive(cur, params, dt=0.02)
    assert np.abs(cur.u.x_comp.values - state.u.x_comp.values).max() < 1e-10
    assert np.abs(cur.a.values).max() < 1e-12


def test_step_reversibility(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=4)
    h = 0.02
    back = pr.step_primitive(pr.step_primitive(state, params, dt=h), params, dt=-h)
    err = np.abs(back.u.x_comp.values - state.u.x_comp.values).max()
    assert err < h**3


def test_eps_free_dynamics_for_zero_a(grid64, params):
    s1 = pr.make_initial_data(grid64, delta=0.0, epsilon=0.1, seed=5)
    s2 = pr.make_initial_data(grid64, delta=0.0, epsilon=0.01, seed=5)
    t1 = pr.integrate_primitive(s1, 0.5, params, output_times=[0.5])
    t2 = pr.integrate_primitive(s2, 0.5, params, output_times=[0.5])
    assert np.abs(
        t1.final.u.x_comp.values - t2.final.u.x_comp.values
    ).max() < 1e-10


def test_blowup_event_reports_time(grid64):
    tight = pr.SolverParams(blowup_threshold=1e-6)
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=6, params=tight)
    with pytest.raises(BlowUpError) as err:
        pr.step_primitive(state, tight)
    assert err.value.time == state.t
    traj = pr.integrate_primitive(state, 0.5, tight, output_times=[0.25, 0.5])
    assert traj.blowup_time == state.t
    assert not traj.censored


def test_integrate_lands_on_output_times(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=7)
    traj = pr.integrate_primitive(state, 0.3, params, output_times=[0.13, 0.3])
    assert traj.times == pytest.approx([0.13, 0.3], abs=1e-12)


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def test_data_delta_zero_is_homogeneous(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.0, epsilon=0.1, seed=8)
    assert np.abs(state.a.values).max() == 0.0
    assert np.abs(sp.divergence(state.u).values).max() < 1e-9
    assert sp.vector_sobolev_norm(state.u, pr.DATA_SOBOLEV_INDEX) == pytest.approx(
        1.0, rel=1e-12
    )


def test_data_corollary_alpha_scaling(grid64):
    eps = 0.1
    s = pr.make_initial_data(grid64, kind="corollary_alpha", delta=0.5,
                             epsilon=eps, seed=9, alpha=1.0)
    rho_dev = np.abs(1.0 / (1.0 + eps * s.a.values) - 1.0).max()
    # density deviation = eps^(1+alpha) * delta * unit-sup profile
    assert rho_dev == pytest.approx(eps**2 * 0.5, rel=1e-10)


def test_data_limit_profile_eps_independent(grid64):
    u1, p0_a, p1_a = pr.generate_profiles(grid64, "ill_prepared_default", seed=10)
    u2, p0_b, p1_b = pr.generate_profiles(grid64, "ill_prepared_default", seed=10)
    lim_a = pr.fluctuation_profile("ill_prepared_default", 0.2, 0.0, p0_a, p1_a,
                                   grid=grid64)
    lim_b = pr.fluctuation_profile("ill_prepared_default", 0.2, 0.0, p0_b, p1_b,
                                   grid=grid64)
    assert np.abs(lim_a - lim_b).max() < 1e-12
    # but the eps-modulated data differ between eps values
    at_01 = pr.fluctuation_profile("ill_prepared_default", 0.2, 0.1, p0_a, p1_a,
                                   grid=grid64)
    assert np.abs(at_01 - lim_a).max() > 1e-6


def test_data_density_bounds_enforced(grid64):
    with pytest.raises(ValueError, match="density bounds"):
        pr.make_initial_data(grid64, delta=20.0, epsilon=1.0, seed=11)


def test_data_rejects_unknown_kind(grid64):
    with pytest.raises(ValueError, match="unknown data kind"):
        pr.make_initial_data(grid64, kind="bogus")


def test_data_resolution_consistency():
    # shared shells agree between a grid and its refinement (same seed)
    coarse = sp.GridSpec(32)
    fine = sp.GridSpec(64)
    pc = pr._band_profile(coarse, seed=12, stream=1, k_cap=8)
    pf = pr._band_profile(fine, seed=12, stream=1, k_cap=8)
    restricted = pr.restrict_values(pf, coarse)
    assert np.abs(restricted - pc).max() < 1e-12


# ---------------------------------------------------------------------------
# conserved quantities and state checks
# ---------------------------------------------------------------------------

def test_conserved_quantities_zero_velocity(grid64):
    zero = np.zeros((64, 64))
    state = pr.PrimitiveState(
        0.0, 0.1,
        sp.ScalarField(grid64, 0.05 * np.cos(sp.coordinates(grid64)[0])),
        sp.VectorField(sp.ScalarField(grid64, zero.copy()), sp.ScalarField(grid64, zero.copy())),
        sp.ScalarField(grid64, zero.copy()),
    )
    q = pr.conserved_quantities(state)
    assert q.energy == 0.0
    assert q.linf_R > 0


def test_energy_is_l2_for_unit_density(grid64):
    u = random_divfree(grid64, seed=13)
    zero = np.zeros((64, 64))
    state = pr.PrimitiveState(
        0.0, 0.1, sp.ScalarField(grid64, zero.copy()), u,
        sp.ScalarField(grid64, zero.copy()),
    )
    q = pr.conserved_quantities(state)
    l2sq = sp.l2_norm(u.x_comp.values) ** 2 + sp.l2_norm(u.y_comp.values) ** 2
    assert q.energy == pytest.approx(l2sq, rel=1e-12)


def test_fluctuation_identity(grid64):
    state = pr.make_initial_data(grid64, delta=0.3, epsilon=0.2, seed=14)
    rho = state.density()
    np.testing.assert_allclose(rho - 1.0, 0.2 * state.fluctuation(), atol=1e-15)


def test_transport_max_principle_short_run(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=15)
    q0 = pr.conserved_quantities(state)
    traj = pr.integrate_primitive(state, 0.5, params, output_times=[0.25, 0.5])
    for rec in traj.records:
        assert rec.linf_R <= q0.linf_R * (1 + 1e-8)


def test_validate_state_catches_divergence(grid64, params):
    state = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=16)
    bad = state.copy()
    bad.u.x_comp.values[:] += 0.1 * np.cos(sp.coordinates(grid64)[0])
    with pytest.raises(ValueError, match="divergence"):
        pr.validate_state(bad, params)


# ---------------------------------------------------------------------------
# stability: relative entropy and envelope
# ---------------------------------------------------------------------------

def test_stability_identical_states(grid64):
    s = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=17)
    rec = pr.stability_distance(s, s)
    assert rec.entropy == 0.0
    assert rec.a_accum > 0.0


def test_stability_quadratic_in_perturbation(grid64):
    s1 = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=18)
    noise = random_divfree(grid64, seed=19)
    vals = []
    for eta in (1e-3, 2e-3):
        s2 = s1.copy()
        s2.u.x_comp.values[:] += eta * noise.x_comp.values
        s2.u.y_comp.values[:] += eta * noise.y_comp.values
        vals.append(pr.stability_distance(s1, s2).entropy)
    assert vals[1] / vals[0] == pytest.approx(4.0, rel=1e-6)


def test_stability_requires_matching_grid_and_eps(grid32, grid64):
    a = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=20)
    b = pr.make_initial_data(grid32, delta=0.1, epsilon=0.1, seed=20)
    with pytest.raises(ValueError, match="shared grid"):
        pr.stability_distance(a, b)
    c = pr.make_initial_data(grid64, delta=0.1, epsilon=0.2, seed=20)
    with pytest.raises(ValueError, match="epsilon"):
        pr.stability_distance(a, c)


def test_gronwall_envelope_monotone():
    history = [
        pr.StabilityRecord(0.0, 1e-6, 2.0),
        pr.StabilityRecord(0.5, 1.5e-6, 2.0),
        pr.StabilityRecord(1.0, 2e-6, 2.0),
    ]
    env = pr.gronwall_envelope(history, C=1.0)
    assert env[0] == pytest.approx(1e-6)
    assert env[1] == pytest.approx(1e-6 * np.exp(1.0))
    assert env[2] == pytest.approx(1e-6 * np.exp(2.0))
    fitted = pr.fit_gronwall_constant(history)
    assert fitted == pytest.approx(max(np.log(1.5) / 1.0, np.log(2.0) / 2.0))


def test_restrict_state_keeps_low_modes(grid32, grid64):
    fine = pr.make_initial_data(grid64, delta=0.1, epsilon=0.1, seed=21)
    coarse = pr.restrict_state(fine, grid32)
    # restriction then re-restriction is idempotent on shared modes
    back = pr.restrict_values(
        np.kron(coarse.a.values, np.ones((1, 1))), grid32
    )
    assert np.abs(back - coarse.a.values).max() < 1e-13
    assert np.abs(sp.divergence(coarse.u).values).max() < 1e-9
