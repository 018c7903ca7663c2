"""The quasi-homogeneous limit system.

Transport of the fluctuation R coupled to projected Euler dynamics through
the forcing R u_perp, with constant-coefficient pressure:

    dR/dt = -u.grad R
    du/dt = P(-u.grad u - R u_perp),      -lap Pi = div(u.grad u + R u_perp).

The forcing is pointwise orthogonal to u ((R u_perp) . u = 0), so the
kinetic energy ||u||_L2 is conserved; R obeys the transport maximum
principle.  The state advances in velocity form; the vorticity equation
d/dt omega + u.grad omega = -div(R u) is checked as a residual, not
maintained as a second integrator.

Stepping contract (SSP-RK3, CFL, blow-up events, mean-free gauge) matches
the primitive solver.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .besov import BesovIndex, besov_norm, besov_norm_vector
from .errors import BlowUpError, NumericalError
from .primitive import (
    SolverParams,
    default_output_times,
    fluctuation_profile,
    generate_profiles,
)
from .records import DiagnosticsRecord, Trajectory
from .spectral import (
    GridSpec,
    ScalarField,
    VectorField,
    curl_arrays,
    ensure_same_grid,
    grad_arrays,
    irfft2_real,
    l2_norm,
    leray_arrays,
    tables,
)


@dataclass
class QHState:
    """Limit-system unknowns at one instant: (t, R, u, Pi)."""

    t: float
    R: ScalarField
    u: VectorField
    pi: ScalarField

    def __post_init__(self) -> None:
        ensure_same_grid(self.R.grid, self.u.grid, self.pi.grid)

    @property
    def grid(self) -> GridSpec:
        return self.R.grid

    def copy(self) -> "QHState":
        return QHState(self.t, self.R.copy(), self.u.copy(), self.pi.copy())


def _tendency_hats(t, R, ux, uy):
    """Spectral coefficients of the dealiased tendency -u.grad u - R u_perp."""
    ux_hat = np.fft.fft2(ux)
    uy_hat = np.fft.fft2(uy)
    dxx = irfft2_real(t.ikx * ux_hat)
    dxy = irfft2_real(t.iky * ux_hat)
    dyx = irfft2_real(t.ikx * uy_hat)
    dyy = irfft2_real(t.iky * uy_hat)
    advx = np.empty_like(ux)
    advy = np.empty_like(ux)
    kernels.advect_vector(ux, uy, dxx, dxy, dyx, dyy, advx, advy)  # -(u.grad)u
    fx = np.empty_like(ux)
    fy = np.empty_like(ux)
    kernels.perp_force(R, ux, uy, fx, fy)  # R u_perp
    gx_hat = (np.fft.fft2(advx - fx)) * t.dealias_mask
    gy_hat = (np.fft.fft2(advy - fy)) * t.dealias_mask
    grad_max = max(kernels.max_abs(dxx), kernels.max_abs(dxy),
                   kernels.max_abs(dyx), kernels.max_abs(dyy))
    return gx_hat, gy_hat, grad_max


def qh_pressure(R: ScalarField, u: VectorField) -> ScalarField:
    """Zero-mean Pi with -lap Pi = div G, G = u.grad u + R u_perp."""
    grid = ensure_same_grid(R.grid, u.grid)
    t = tables(grid)
    gx_hat, gy_hat, _ = _tendency_hats(
        t, R.values, u.x_comp.values, u.y_comp.values
    )
    # the tendency is -G, so div G = -(ik . tendency_hat)
    div_hat = -(t.ikx * gx_hat + t.iky * gy_hat)
    pi_hat = div_hat * t.inv_k2
    pi_hat[0, 0] = 0.0
    return ScalarField(grid, irfft2_real(pi_hat))


def _qh_rhs_arrays(t, R, ux, uy):
    R_hat = np.fft.fft2(R)
    rx = irfft2_real(t.ikx * R_hat)
    ry = irfft2_real(t.iky * R_hat)
    dR = np.empty_like(R)
    kernels.advect_scalar(ux, uy, rx, ry, dR)
    dR = irfft2_real(np.fft.fft2(dR) * t.dealias_mask)

    gx_hat, gy_hat, grad_max = _tendency_hats(t, R, ux, uy)
    gx = irfft2_real(gx_hat)
    gy = irfft2_real(gy_hat)
    dux, duy = leray_arrays(t, gx, gy, zero_mean=True)
    return dR, dux, duy, grad_max


def qh_rhs(state: QHState) -> tuple[ScalarField, VectorField]:
    """(dR/dt, du/dt), dealiased, with divergence-free momentum tendency."""
    t = tables(state.grid)
    dR, dux, duy, _ = _qh_rhs_arrays(
        t, state.R.values, state.u.x_comp.values, state.u.y_comp.values
    )
    g = state.grid
    return ScalarField(g, dR), VectorField(ScalarField(g, dux), ScalarField(g, duy))


def cfl_timestep_qh(state: QHState, params: SolverParams) -> float:
    if params.dt is not None:
        return params.dt
    speed = kernels.max_speed(state.u.x_comp.values, state.u.y_comp.values)
    kmax = state.grid.n // 2
    if speed * kmax < 1e-12:
        return 1.0
    return params.cfl_number / (speed * kmax)


def step_qh(state: QHState, params: SolverParams,
            dt: Optional[float] = None) -> QHState:
    """One SSP-RK3 step; same contract as ``step_primitive``."""
    if dt is None:
        dt = cfl_timestep_qh(state, params)
    t = tables(state.grid)
    R0 = state.R.values
    ux0 = state.u.x_comp.values
    uy0 = state.u.y_comp.values

    dR1, dux1, duy1, grad_max = _qh_rhs_arrays(t, R0, ux0, uy0)
    if grad_max > params.blowup_threshold:
        raise BlowUpError(state.t, grad_max, params.blowup_threshold)

    def combine(c0, y0, c1, y1, ck, k):
        out = np.empty_like(y0)
        kernels.lincomb3(c0, y0, c1, y1, ck, k, out)
        return out

    R1 = combine(1.0, R0, 0.0, R0, dt, dR1)
    ux1 = combine(1.0, ux0, 0.0, ux0, dt, dux1)
    uy1 = combine(1.0, uy0, 0.0, uy0, dt, duy1)

    dR2, dux2, duy2, _ = _qh_rhs_arrays(t, R1, ux1, uy1)
    R2 = combine(0.75, R0, 0.25, R1, 0.25 * dt, dR2)
    ux2 = combine(0.75, ux0, 0.25, ux1, 0.25 * dt, dux2)
    uy2 = combine(0.75, uy0, 0.25, uy1, 0.25 * dt, duy2)

    dR3, dux3, duy3, _ = _qh_rhs_arrays(t, R2, ux2, uy2)
    third = 1.0 / 3.0
    R3 = combine(third, R0, 2 * third, R2, 2 * third * dt, dR3)
    ux3 = combine(third, ux0, 2 * third, ux2, 2 * third * dt, dux3)
    uy3 = combine(third, uy0, 2 * third, uy2, 2 * third * dt, duy3)

    R3 = irfft2_real(np.fft.fft2(R3) * t.dealias_mask)
    ux3, uy3 = leray_arrays(t, ux3, uy3, dealias=True, zero_mean=True)
    g = state.grid
    new = QHState(
        state.t + dt,
        ScalarField(g, R3),
        VectorField(ScalarField(g, ux3), ScalarField(g, uy3)),
        state.pi,
    )
    new.pi = qh_pressure(new.R, new.u)
    return new


def qh_record(state: QHState, wall_ms: float) -> DiagnosticsRecord:
    t = tables(state.grid)
    ux = state.u.x_comp.values
    uy = state.u.y_comp.values
    div = curl_arrays(t, -uy, ux)
    omega = curl_arrays(t, ux, uy)
    b0 = BesovIndex(0.0, np.inf, 1.0)
    omega_b0 = besov_norm(ScalarField(state.grid, omega), b0)
    u_l2 = float(np.sqrt(np.mean(ux * ux + uy * uy)))
    gRx, gRy = grad_arrays(t, state.R.values)
    a_eps = (
        besov_norm(ScalarField(state.grid, gRx), b0)
        + besov_norm(ScalarField(state.grid, gRy), b0)
    )
    return DiagnosticsRecord(
        t=state.t,
        energy=float(np.mean(ux * ux + uy * uy)),
        linf_R=kernels.max_abs(state.R.values),
        l2_div_u=l2_norm(div),
        besov_b0inf1_omega=omega_b0,
        E_qh=u_l2 + omega_b0,
        A_eps=a_eps,
        gamma_l2=l2_norm(omega),
        pressure_iters=1,
        wall_time_ms=wall_ms,
    )


def integrate_qh(
    state: QHState,
    horizon: float,
    params: SolverParams,
    output_times: Optional[list[float]] = None,
) -> Trajectory:
    """Advance to ``horizon`` recording frames; same contract as the primitive."""
    if output_times is None:
        output_times = default_output_times(state.t, horizon)
    output_times = sorted(output_times)
    if output_times[0] < state.t - 1e-12 or output_times[-1] > horizon + 1e-12:
        raise ValueError("output times must lie within [t0, horizon]")
    start = time.perf_counter()
    traj = Trajectory(times=[], frames=[], records=[])
    current = state.copy()
    for target in output_times:
        try:
            while current.t < target - 1e-12:
                dt = min(cfl_timestep_qh(current, params), target - current.t)
                current = step_qh(current, params, dt)
                if not np.isfinite(current.u.x_comp.values).all():
                    raise NumericalError(f"non-finite velocity at t={current.t:.6g}")
        except BlowUpError as event:
            traj.blowup_time = event.time
            return traj
        wall_ms = 1e3 * (time.perf_counter() - start)
        traj.times.append(current.t)
        traj.frames.append(current.copy())
        traj.records.append(qh_record(current, wall_ms))
    return traj


def make_qh_initial_data(
    grid: GridSpec,
    kind: str = "ill_prepared_default",
    delta: float = 0.1,
    seed: int = 0,
    n_mollify: Optional[int] = None,
    alpha: float = 1.0,
) -> QHState:
    """Limit-system datum: the eps -> 0 profile of the primitive family."""
    u, p0, p1 = generate_profiles(grid, kind, seed, n_mollify)
    R0 = fluctuation_profile(kind, delta, 0.0, p0, p1, alpha, grid)
    state = QHState(
        0.0,
        ScalarField(grid, R0),
        u,
        ScalarField(grid, np.zeros((grid.n, grid.n))),
    )
    state.pi = qh_pressure(state.R, state.u)
    return state


def qh_vorticity_residual(traj: Trajectory) -> float:
    """Max L2 residual of d/dt omega + u.grad omega + div(R u) over the
    trajectory's interior output times (centered time differences)."""
    if len(traj.frames) < 3:
        raise ValueError("vorticity residual needs at least 3 output frames")
    grid = traj.frames[0].grid
    t = tables(grid)
    omegas = [
        curl_arrays(t, f.u.x_comp.values, f.u.y_comp.values) for f in traj.frames
    ]
    worst = 0.0
    for i in range(1, len(traj.frames) - 1):
        f = traj.frames[i]
        dt_span = traj.times[i + 1] - traj.times[i - 1]
        d_omega = (omegas[i + 1] - omegas[i - 1]) / dt_span
        gx, gy = grad_arrays(t, omegas[i])
        adv = np.empty_like(d_omega)
        kernels.advect_scalar(
            f.u.x_comp.values, f.u.y_comp.values, gx, gy, adv
        )  # -(u.grad)omega
        adv = irfft2_real(np.fft.fft2(adv) * t.dealias_mask)
        rux = irfft2_real(np.fft.fft2(f.R.values * f.u.x_comp.values)
                          * t.dealias_mask)
        ruy = irfft2_real(np.fft.fft2(f.R.values * f.u.y_comp.values)
                          * t.dealias_mask)
        div_ru = irfft2_real(
            t.ikx * np.fft.fft2(rux) + t.iky * np.fft.fft2(ruy)
        )
        worst = max(worst, l2_norm(d_omega - adv + div_ru))
    return worst


@dataclass(frozen=True)
class QHEnergy:
    """Energy functional and the curl-equivalence diagnostics."""

    e_total: float       # ||u||_L2 + ||omega||_{B^0_inf1}
    r_norm: float        # ||R||_{B^1_inf1}
    u_l2: float
    omega_b0inf1: float
    u_b1inf1: float

    @property
    def curl_equivalence_ratio(self) -> float:
        """e_total against ||u||_L2 + ||u||_{B^1_inf1}; measured band [1/8, 8]."""
        return self.e_total / (self.u_l2 + self.u_b1inf1)


def qh_energy(state: QHState) -> QHEnergy:
    t = tables(state.grid)
    ux = state.u.x_comp.values
    uy = state.u.y_comp.values
    omega = curl_arrays(t, ux, uy)
    u_l2 = float(np.sqrt(np.mean(ux * ux + uy * uy)))
    omega_b0 = besov_norm(ScalarField(state.grid, omega), BesovIndex(0.0, np.inf, 1.0))
    b1 = BesovIndex(1.0, np.inf, 1.0)
    return QHEnergy(
        e_total=u_l2 + omega_b0,
        r_norm=besov_norm(state.R, b1),
        u_l2=u_l2,
        omega_b0inf1=omega_b0,
        u_b1inf1=besov_norm_vector(state.u, b1),
    )
