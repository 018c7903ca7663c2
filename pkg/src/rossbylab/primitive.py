"""Time evolution of the rotating density-dependent Euler system.

State variables are (a, u, Pi) with density rho = 1/(1 + eps*a) and
fluctuation R = (rho - 1)/eps = -a*rho recovered on demand.  The momentum
right-hand side is assembled in projected form

    du/dt = P(-u.grad u - a grad Pi),

where Pi solves the variable-coefficient elliptic problem

    -div((1 + eps*a) grad Pi) = eps div(u.grad u) - curl u.

The singular rotation terms (u_perp + grad Pi)/eps are curl-free for
divergence-free u and mean-free data, so the Leray projector annihilates
them identically: the projection is applied analytically before time is
discretized, the evaluated right-hand side is O(1) in eps, and no stiff
integrator is needed.  Time stepping is explicit SSP-RK3 under a CFL bound
dt * (n/2) * max|u| <= cfl_number.

All L^p norms use the normalized counting measure (see ``spectral``).
Distinct simulations are independent; a single simulation advances
sequentially.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .besov import BesovIndex, besov_norm, lp_family
from .errors import BlowUpError, NumericalError, PressureConvergenceError
from .records import DiagnosticsRecord, Trajectory
from .spectral import (
    TWO_PI,
    GridSpec,
    ScalarField,
    VectorField,
    coordinates,
    curl_arrays,
    ensure_same_grid,
    fft_coeffs,
    grad_arrays,
    ifft_values,
    irfft2_real,
    l2_norm,
    leray_arrays,
    tables,
    vector_sobolev_norm,
)

# Sobolev index used to normalize generated velocities (the well-posedness
# theory needs s > 2) and spectral decay of the random profiles.
DATA_SOBOLEV_INDEX = 3.0
SPECTRUM_SLOPE = 4.0

DATA_KINDS = ("ill_prepared_default", "custom_modes", "corollary_alpha")


@dataclass
class SolverParams:
    """Time-stepping and pressure-solver knobs."""

    dt: Optional[float] = None          # fixed step; None means CFL-driven
    cfl_number: float = 0.5
    pressure_tol: float = 1e-11
    pressure_max_iter: int = 200
    blowup_threshold: float = 1e4
    density_bounds: tuple[float, float] = (0.5, 2.0)

    def __post_init__(self) -> None:
        if self.dt is not None and self.dt <= 0:
            raise ValueError("dt must be positive (or None for CFL mode)")
        if not 0.0 < self.cfl_number <= 1.0:
            raise ValueError("cfl_number must lie in (0, 1]")
        if not 0.0 < self.pressure_tol < 1e-6:
            raise ValueError("pressure_tol must lie in (0, 1e-6)")
        if self.pressure_max_iter < 1:
            raise ValueError("pressure_max_iter must be positive")
        lo, hi = self.density_bounds
        if not 0.0 < lo < hi:
            raise ValueError("density bounds must satisfy 0 < rho_min < rho_max")


@dataclass
class PrimitiveState:
    """Primitive unknowns at one instant: (t, eps, a, u, Pi)."""

    t: float
    epsilon: float
    a: ScalarField
    u: VectorField
    pi: ScalarField

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon <= 1.0:
            raise ValueError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        ensure_same_grid(self.a.grid, self.u.grid, self.pi.grid)

    @property
    def grid(self) -> GridSpec:
        return self.a.grid

    def density(self) -> np.ndarray:
        """rho = 1/(1 + eps*a)."""
        return 1.0 / (1.0 + self.epsilon * self.a.values)

    def fluctuation(self) -> np.ndarray:
        """R = (rho - 1)/eps = -a*rho."""
        return -self.a.values / (1.0 + self.epsilon * self.a.values)

    def copy(self) -> "PrimitiveState":
        return PrimitiveState(self.t, self.epsilon, self.a.copy(), self.u.copy(),
                              self.pi.copy())


def validate_state(state: PrimitiveState, params: SolverParams,
                   div_tol: float = 1e-9) -> None:
    """Assert the PrimitiveState invariants (divergence, density, pressure mean)."""
    t = tables(state.grid)
    div = curl_arrays(t, -state.u.y_comp.values, state.u.x_comp.values)
    div_max = kernels.max_abs(div)
    if div_max > div_tol:
        raise ValueError(f"velocity not divergence-free: max |div u| = {div_max:.3e}")
    rho = state.density()
    lo, hi = params.density_bounds
    if rho.min() < lo or rho.max() > hi:
        raise ValueError(
            f"density outside configured bounds [{lo}, {hi}]: "
            f"min {rho.min():.6g}, max {rho.max():.6g}"
        )
    m = abs(float(state.pi.values.mean()))
    if m > 1e-10:
        raise ValueError(f"pressure must have zero mean, got {m:.3e}")


# ---------------------------------------------------------------------------
# pressure
# ---------------------------------------------------------------------------

def _pressure_hat(t, a: np.ndarray, eps: float, F_hat: np.ndarray,
                  params: SolverParams) -> tuple[np.ndarray, int]:
    """Solve -div((1+eps*a) grad Pi) = F by the Neumann-series fixed point.

    Works on unnormalized FFT coefficients; the iteration
    lap Pi_{m+1} = -F - eps div(a grad Pi_m) is a contraction whenever
    eps*||a||_inf < 1.  Returns (Pi_hat, update_count).
    """
    f_norm = float(np.linalg.norm(F_hat))
    pi_hat = np.zeros_like(F_hat)
    if f_norm == 0.0:
        return pi_hat, 0
    iters = 0
    prev_rel = np.inf
    while True:
        # residual split: lap(Pi) is diagonal and exact in spectral space, so
        # FFT round-off only enters through the small eps*div(a grad Pi) term
        gx = irfft2_real(t.ikx * pi_hat)
        gy = irfft2_real(t.iky * pi_hat)
        res_hat = (
            -t.k2 * pi_hat
            + eps * (t.ikx * np.fft.fft2(a * gx) + t.iky * np.fft.fft2(a * gy))
            + F_hat
        )
        res_hat[0, 0] = 0.0
        rel = float(np.linalg.norm(res_hat)) / f_norm
        if rel <= params.pressure_tol:
            return pi_hat, iters
        if iters >= params.pressure_max_iter or rel >= 0.9 * prev_rel:
            raise PressureConvergenceError(iters, rel, params.pressure_tol)
        prev_rel = rel
        pi_hat += res_hat * t.inv_k2
        pi_hat[0, 0] = 0.0
        iters += 1


def solve_pressure(a: ScalarField, u: VectorField, epsilon: float,
                   params: SolverParams | None = None) -> ScalarField:
    """Zero-mean Pi with -div((1+eps*a) grad Pi) = eps div(u.grad u) - curl u."""
    params = params or SolverParams()
    grid = ensure_same_grid(a.grid, u.grid)
    t = tables(grid)
    pi_hat, _ = _pressure_hat(
        t, a.values, epsilon,
        _pressure_forcing_hat(t, a.values, u.x_comp.values, u.y_comp.values, epsilon),
        params,
    )
    return ScalarField(grid, irfft2_real(pi_hat))


def _pressure_forcing_hat(t, a, ux, uy, eps) -> np.ndarray:
    """Unnormalized coefficients of eps div(u.grad u) - curl u."""
    ux_hat = np.fft.fft2(ux)
    uy_hat = np.fft.fft2(uy)
    dxx = irfft2_real(t.ikx * ux_hat)
    dxy = irfft2_real(t.iky * ux_hat)
    dyx = irfft2_real(t.ikx * uy_hat)
    dyy = irfft2_real(t.iky * uy_hat)
    gx = np.empty_like(ux)
    gy = np.empty_like(ux)
    kernels.advect_vector(ux, uy, dxx, dxy, dyx, dyy, gx, gy)  # -(u.grad)u
    adv_x_hat = np.fft.fft2(gx) * t.dealias_mask
    adv_y_hat = np.fft.fft2(gy) * t.dealias_mask
    curl_hat = t.ikx * uy_hat - t.iky * ux_hat
    return -eps * (t.ikx * adv_x_hat + t.iky * adv_y_hat) - curl_hat


# ---------------------------------------------------------------------------
# right-hand side and stepping
# ---------------------------------------------------------------------------

@dataclass
class _RhsAux:
    grad_max: float
    pressure_iters: int
    pi: np.ndarray


def _rhs_arrays(t, a, ux, uy, eps, params) -> tuple[np.ndarray, np.ndarray, np.ndarray, _RhsAux]:
    a_hat = np.fft.fft2(a)
    ux_hat = np.fft.fft2(ux)
    uy_hat = np.fft.fft2(uy)
    ax = irfft2_real(t.ikx * a_hat)
    ay = irfft2_real(t.iky * a_hat)
    dxx = irfft2_real(t.ikx * ux_hat)
    dxy = irfft2_real(t.iky * ux_hat)
    dyx = irfft2_real(t.ikx * uy_hat)
    dyy = irfft2_real(t.iky * uy_hat)
    grad_max = max(kernels.max_abs(dxx), kernels.max_abs(dxy),
                   kernels.max_abs(dyx), kernels.max_abs(dyy))

    da = np.empty_like(a)
    kernels.advect_scalar(ux, uy, ax, ay, da)
    da = irfft2_real(np.fft.fft2(da) * t.dealias_mask)

    advx = np.empty_like(a)
    advy = np.empty_like(a)
    kernels.advect_vector(ux, uy, dxx, dxy, dyx, dyy, advx, advy)
    adv_x_hat = np.fft.fft2(advx) * t.dealias_mask
    adv_y_hat = np.fft.fft2(advy) * t.dealias_mask
    curl_hat = t.ikx * uy_hat - t.iky * ux_hat
    f_hat = -eps * (t.ikx * adv_x_hat + t.iky * adv_y_hat) - curl_hat

    pi_hat, iters = _pressure_hat(t, a, eps, f_hat, params)
    px = irfft2_real(t.ikx * pi_hat)
    py = irfft2_real(t.iky * pi_hat)

    gx = irfft2_real(adv_x_hat) - a * px
    gy = irfft2_real(adv_y_hat) - a * py
    dux, duy = leray_arrays(t, gx, gy, dealias=True, zero_mean=True)
    aux = _RhsAux(grad_max, iters, irfft2_real(pi_hat))
    return da, dux, duy, aux


def primitive_rhs(state: PrimitiveState, params: SolverParams | None = None
                  ) -> tuple[ScalarField, VectorField]:
    """Evaluate (da/dt, du/dt); the result is O(1) in eps by construction."""
    params = params or SolverParams()
    t = tables(state.grid)
    da, dux, duy, _ = _rhs_arrays(
        t, state.a.values, state.u.x_comp.values, state.u.y_comp.values,
        state.epsilon, params,
    )
    g = state.grid
    return ScalarField(g, da), VectorField(ScalarField(g, dux), ScalarField(g, duy))


def cfl_timestep(state: PrimitiveState, params: SolverParams) -> float:
    """dt with dt * (n/2) * max|u| = cfl_number (capped for quiescent fields)."""
    if params.dt is not None:
        return params.dt
    speed = kernels.max_speed(state.u.x_comp.values, state.u.y_comp.values)
    kmax = state.grid.n // 2
    if speed * kmax < 1e-12:
        return 1.0
    return params.cfl_number / (speed * kmax)


def step_primitive(state: PrimitiveState, params: SolverParams,
                   dt: Optional[float] = None) -> PrimitiveState:
    """One SSP-RK3 step; re-projects and re-dealiases the advanced state.

    The returned state carries the pressure of the final stage evaluation;
    ``integrate_primitive`` re-solves it exactly at output times.  A negative
    ``dt`` integrates backwards (used by reversibility checks) and skips the
    CFL logic.
    """
    if dt is None:
        dt = cfl_timestep(state, params)
    t = tables(state.grid)
    eps = state.epsilon
    a0 = state.a.values
    ux0 = state.u.x_comp.values
    uy0 = state.u.y_comp.values

    da1, dux1, duy1, aux1 = _rhs_arrays(t, a0, ux0, uy0, eps, params)
    if aux1.grad_max > params.blowup_threshold:
        raise BlowUpError(state.t, aux1.grad_max, params.blowup_threshold)

    def combine(c0, y0, c1, y1, ck, k):
        out = np.empty_like(y0)
        kernels.lincomb3(c0, y0, c1, y1, ck, k, out)
        return out

    a1 = combine(1.0, a0, 0.0, a0, dt, da1)
    ux1 = combine(1.0, ux0, 0.0, ux0, dt, dux1)
    uy1 = combine(1.0, uy0, 0.0, uy0, dt, duy1)

    da2, dux2, duy2, _ = _rhs_arrays(t, a1, ux1, uy1, eps, params)
    a2 = combine(0.75, a0, 0.25, a1, 0.25 * dt, da2)
    ux2 = combine(0.75, ux0, 0.25, ux1, 0.25 * dt, dux2)
    uy2 = combine(0.75, uy0, 0.25, uy1, 0.25 * dt, duy2)

    da3, dux3, duy3, aux3 = _rhs_arrays(t, a2, ux2, uy2, eps, params)
    third = 1.0 / 3.0
    a3 = combine(third, a0, 2.0 * third, a2, 2.0 * third * dt, da3)
    ux3 = combine(third, ux0, 2.0 * third, ux2, 2.0 * third * dt, dux3)
    uy3 = combine(third, uy0, 2.0 * third, uy2, 2.0 * third * dt, duy3)

    a3 = irfft2_real(np.fft.fft2(a3) * t.dealias_mask)
    ux3, uy3 = leray_arrays(t, ux3, uy3, dealias=True, zero_mean=True)

    g = state.grid
    return PrimitiveState(
        state.t + dt, eps,
        ScalarField(g, a3),
        VectorField(ScalarField(g, ux3), ScalarField(g, uy3)),
        ScalarField(g, aux3.pi),
    )


def _resolve_pressure(state: PrimitiveState, params: SolverParams
                      ) -> tuple[PrimitiveState, int]:
    """Recompute Pi consistently with (a, u); used at output times."""
    t = tables(state.grid)
    f_hat = _pressure_forcing_hat(
        t, state.a.values, state.u.x_comp.values, state.u.y_comp.values,
        state.epsilon,
    )
    pi_hat, iters = _pressure_hat(t, state.a.values, state.epsilon, f_hat, params)
    state.pi = ScalarField(state.grid, irfft2_real(pi_hat))
    return state, iters


def primitive_record(state: PrimitiveState, pressure_iters: int,
                     wall_ms: float) -> DiagnosticsRecord:
    t = tables(state.grid)
    fam = lp_family(state.grid)
    ux = state.u.x_comp.values
    uy = state.u.y_comp.values
    rho = state.density()
    R = state.fluctuation()
    div = curl_arrays(t, -uy, ux)
    omega = curl_arrays(t, ux, uy)
    gamma = curl_arrays(t, rho * ux, rho * uy)
    b0 = BesovIndex(0.0, np.inf, 1.0)
    omega_b0 = besov_norm(ScalarField(state.grid, omega), b0)
    u_l2 = float(np.sqrt(np.mean(ux * ux + uy * uy)))
    grad_a = grad_arrays(t, state.a.values)
    a_eps = (
        besov_norm(ScalarField(state.grid, grad_a[0]), b0)
        + besov_norm(ScalarField(state.grid, grad_a[1]), b0)
    )
    return DiagnosticsRecord(
        t=state.t,
        energy=kernels.weighted_energy(state.a.values, state.epsilon, ux, uy),
        linf_R=kernels.max_abs(R),
        l2_div_u=l2_norm(div),
        besov_b0inf1_omega=omega_b0,
        E_qh=u_l2 + omega_b0,
        A_eps=a_eps,
        gamma_l2=l2_norm(gamma),
        pressure_iters=pressure_iters,
        wall_time_ms=wall_ms,
    )


def default_output_times(t0: float, horizon: float, count: int = 11) -> list[float]:
    return list(np.linspace(t0, horizon, count))


def integrate_primitive(
    state: PrimitiveState,
    horizon: float,
    params: SolverParams,
    output_times: Optional[list[float]] = None,
) -> Trajectory:
    """Advance to ``horizon``, recording frames at the output times.

    Blow-up events stop the run early (partial trajectory returned with
    ``blowup_time`` set).  The final step of each output interval is
    shrunk to land exactly on the requested time.
    """
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
                dt = min(cfl_timestep(current, params), target - current.t)
                current = step_primitive(current, params, dt)
                if not np.isfinite(current.u.x_comp.values).all():
                    raise NumericalError(
                        f"non-finite velocity at t={current.t:.6g}"
                    )
        except BlowUpError as event:
            traj.blowup_time = event.time
            return traj
        current, iters = _resolve_pressure(current, params)
        wall_ms = 1e3 * (time.perf_counter() - start)
        traj.times.append(current.t)
        traj.frames.append(current.copy())
        traj.records.append(primitive_record(current, iters, wall_ms))
    return traj


# ---------------------------------------------------------------------------
# initial data
# ---------------------------------------------------------------------------

def _band_profile(grid: GridSpec, seed: int, stream: int, k_cap: int,
                  slope: float = SPECTRUM_SLOPE) -> np.ndarray:
    """Random real band-limited field with shell amplitudes ~ shell^-slope.

    Coefficients are drawn shell by shell (max(|kx|,|ky|) = 1, 2, ...) in a
    fixed order, so two grids sharing a seed agree exactly on their common
    shells: refining the resolution only appends new shells.  Modes beyond
    the grid's dealias radius are dropped after drawing to keep the draw
    sequence resolution independent.
    """
    n = grid.n
    rng = np.random.default_rng([seed, stream])
    coeffs = np.zeros((n, n), dtype=np.complex128)
    radius = grid.dealias_radius
    for shell in range(1, k_cap + 1):
        amp = float(shell) ** (-slope)
        for kx in range(-shell, shell + 1):
            for ky in range(-shell, shell + 1):
                if max(abs(kx), abs(ky)) != shell:
                    continue
                if not (kx > 0 or (kx == 0 and ky > 0)):
                    continue  # one draw per conjugate pair
                re, im = rng.standard_normal(2)
                if max(abs(kx), abs(ky)) > radius:
                    continue
                c = amp * (re + 1j * im) / np.sqrt(2.0)
                coeffs[ky % n, kx % n] = c
                coeffs[(-ky) % n, (-kx) % n] = np.conj(c)
    return ifft_values(coeffs)


def _mollify(grid: GridSpec, values: np.ndarray, n_mollify: int) -> np.ndarray:
    fam = lp_family(grid)
    return ifft_values(fft_coeffs(values) * fam.low_multiplier(n_mollify))


def _custom_stream(grid: GridSpec) -> np.ndarray:
    X, Y = coordinates(grid)
    return np.sin(X) * np.sin(Y) + 0.5 * np.cos(2 * X + Y)


def _custom_fluct(grid: GridSpec) -> np.ndarray:
    X, Y = coordinates(grid)
    return np.cos(X) * np.cos(2 * Y)


def generate_profiles(grid: GridSpec, kind: str, seed: int,
                      n_mollify: Optional[int] = None
                      ) -> tuple[VectorField, np.ndarray, np.ndarray]:
    """Shared data machinery: normalized velocity and fluctuation profiles.

    Returns (u0, p0, p1): u0 is divergence-free with ||u0||_{H^s} = 1 built
    from a mollified random stream function; p0 and p1 are independent
    fluctuation profiles with unit sup-norm (p1 modulates the ill-prepared
    eps-dependence).
    """
    if kind not in DATA_KINDS:
        raise ValueError(f"unknown data kind {kind!r}; expected one of {DATA_KINDS}")
    if n_mollify is None:
        # one dyadic band below the top resolved scale, so the transported
        # fields keep spectral headroom and extrema are not polluted by
        # truncation ringing
        n_mollify = int(np.floor(np.log2(grid.dealias_radius))) - 1
    k_cap = int(np.ceil(1.3 * 2**n_mollify))
    if kind == "custom_modes":
        psi = _custom_stream(grid)
        p0 = _custom_fluct(grid)
        p1 = np.zeros_like(p0)
    else:
        psi = _mollify(grid, _band_profile(grid, seed, 0, k_cap), n_mollify)
        p0 = _mollify(grid, _band_profile(grid, seed, 1, k_cap), n_mollify)
        p1 = _mollify(grid, _band_profile(grid, seed, 2, k_cap), n_mollify)
    t = tables(grid)
    psi_hat = np.fft.fft2(psi)
    ux = irfft2_real(-t.iky * psi_hat)
    uy = irfft2_real(t.ikx * psi_hat)
    g = grid
    u = VectorField(ScalarField(g, ux), ScalarField(g, uy))
    norm = vector_sobolev_norm(u, DATA_SOBOLEV_INDEX)
    if norm > 0:
        u = VectorField(ScalarField(g, ux / norm), ScalarField(g, uy / norm))
    for p in (p0, p1):
        m = np.abs(p).max()
        if m > 0:
            p /= m
    return u, p0, p1


def _align_max_to_lattice(grid: GridSpec, q: np.ndarray) -> np.ndarray:
    """Translate a band-limited field so its sup-norm peak sits on the lattice.

    The continuum maximum of a transported tracer is conserved, but the
    lattice maximum starts below it whenever the peak falls between grid
    points and can then drift *up* as advection re-aligns the peak - an
    O((dx k)^2) sampling artifact that would swamp a 1e-8 maximum-principle
    check.  Anchoring the peak on a lattice point at t=0 makes the grid max
    equal the continuum max, which the discrete transport can only preserve
    or dissipate.  The translation is a pure phase shift, exact for
    band-limited fields.
    """
    n = grid.n
    coeffs = fft_coeffs(q)
    # coarse location from 4x zero-padded upsampling
    m = 4 * n
    up = np.zeros((m, m), dtype=np.complex128)
    freqs = np.fft.fftfreq(n, d=1.0 / n).astype(int)
    up[np.ix_(freqs % m, freqs % m)] = coeffs
    fine = np.real(np.fft.ifft2(up)) * m * m
    jy, jx = np.unravel_index(np.argmax(np.abs(fine)), fine.shape)
    sign = np.sign(fine[jy, jx]) or 1.0
    x = np.array([TWO_PI * jx / m, TWO_PI * jy / m])
    # Newton refinement on the trigonometric interpolant
    ks = np.argwhere(np.abs(coeffs) > 1e-14 * np.abs(coeffs).max())
    kvec = np.array([[freqs[j], freqs[i]] for i, j in ks], dtype=np.float64)
    cvec = np.array([coeffs[i, j] for i, j in ks])
    for _ in range(8):
        phase = np.exp(1j * (kvec @ x))
        grad = np.real(1j * (kvec.T * phase) @ cvec) * sign
        hess = -np.real(
            (kvec[:, :, None] * kvec[:, None, :] * (cvec * phase)[:, None, None]
             ).sum(axis=0)
        ) * sign
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        x = x - step
        if np.abs(step).max() < 1e-13:
            break
    dx = TWO_PI / n
    # translate by s so the peak lands on the nearest lattice point:
    # q_new(y) = q(y + s), i.e. coefficients pick up exp(+i k.s)
    shift = x - np.round(x / dx) * dx
    t = tables(grid)
    shifted = coeffs * np.exp(1j * (t.kx * shift[0] + t.ky * shift[1]))
    return ifft_values(shifted)


def fluctuation_profile(kind: str, delta: float, epsilon: float,
                        p0: np.ndarray, p1: np.ndarray,
                        alpha: float = 1.0, grid: GridSpec | None = None
                        ) -> np.ndarray:
    """R_0 for the requested data family (evaluate at epsilon=0 for the limit).

    When a grid is supplied, the combined profile is peak-aligned to the
    lattice (see ``_align_max_to_lattice``) and rescaled so its sup norm is
    exactly ``delta`` times the family's amplitude factor.
    """
    if kind == "corollary_alpha":
        scale, q = delta * epsilon**alpha, p0.copy()
    elif kind == "custom_modes":
        scale, q = delta, p0.copy()
    else:
        scale, q = delta, p0 + epsilon * p1
    if scale == 0.0:
        return np.zeros_like(p0)
    if grid is not None:
        q = _align_max_to_lattice(grid, q)
        q /= np.abs(q).max()
    return scale * q


def make_initial_data(
    grid: GridSpec,
    kind: str = "ill_prepared_default",
    delta: float = 0.1,
    epsilon: float = 0.1,
    seed: int = 0,
    params: SolverParams | None = None,
    n_mollify: Optional[int] = None,
    alpha: float = 1.0,
) -> PrimitiveState:
    """Divergence-free, density-admissible initial data for the primitive run.

    ``delta`` scales the fluctuation size; ``delta = 0`` yields homogeneous
    Euler data (a = 0).  The ill-prepared family adds an eps-modulated
    component to R_0 whose eps -> 0 limit is the profile shared with the
    limit-system datum.
    """
    params = params or SolverParams()
    u, p0, p1 = generate_profiles(grid, kind, seed, n_mollify)
    R0 = fluctuation_profile(kind, delta, epsilon, p0, p1, alpha, grid)
    rho0 = 1.0 + epsilon * R0
    lo, hi = params.density_bounds
    if rho0.min() <= 0.0 or rho0.min() < lo or rho0.max() > hi:
        raise ValueError(
            f"delta={delta} violates the density bounds [{lo}, {hi}]: "
            f"min rho = {rho0.min():.6g}, max rho = {rho0.max():.6g}"
        )
    a0 = -R0 / rho0
    state = PrimitiveState(
        0.0, epsilon,
        ScalarField(grid, a0),
        u,
        ScalarField(grid, np.zeros((grid.n, grid.n))),
    )
    state, _ = _resolve_pressure(state, params)
    validate_state(state, params)
    return state


# ---------------------------------------------------------------------------
# conserved quantities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConservedQuantities:
    energy: float    # mean(rho |u|^2)
    linf_R: float
    l2_R: float
    mean_a: float


def conserved_quantities(state: PrimitiveState) -> ConservedQuantities:
    R = state.fluctuation()
    return ConservedQuantities(
        energy=kernels.weighted_energy(
            state.a.values, state.epsilon,
            state.u.x_comp.values, state.u.y_comp.values,
        ),
        linf_R=kernels.max_abs(R),
        l2_R=l2_norm(R),
        mean_a=float(state.a.values.mean()),
    )


# ---------------------------------------------------------------------------
# relative-entropy stability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StabilityRecord:
    """Relative entropy between two states plus the Gronwall integrand.

    ``entropy`` is ||sqrt(rho2) (u1-u2)||_L2^2 + ||R1-R2||_L2^2; ``a_accum``
    samples the integrand of A(t) (density-weighted Lipschitz norms of the
    reference solution) and is accumulated by ``gronwall_envelope``.
    """

    t: float
    entropy: float
    a_accum: float


def stability_distance(s1: PrimitiveState, s2: PrimitiveState) -> StabilityRecord:
    """Relative entropy of s2 against the reference s1 (same grid and eps)."""
    if s1.grid != s2.grid:
        raise ValueError("stability distance needs a shared grid")
    if abs(s1.epsilon - s2.epsilon) > 1e-14:
        raise ValueError("stability distance needs matching epsilon")
    t = tables(s1.grid)
    rho1 = s1.density()
    rho2 = s2.density()
    dux = s1.u.x_comp.values - s2.u.x_comp.values
    duy = s1.u.y_comp.values - s2.u.y_comp.values
    dR = s1.fluctuation() - s2.fluctuation()
    entropy = float(np.mean(rho2 * (dux * dux + duy * duy)) + np.mean(dR * dR))
    sqrt_rho2 = np.sqrt(rho2)
    gRx, gRy = grad_arrays(t, ScalarField(s1.grid, s1.fluctuation()).values)
    gPx, gPy = grad_arrays(t, s1.pi.values)
    gUxx, gUxy = grad_arrays(t, s1.u.x_comp.values)
    gUyx, gUyy = grad_arrays(t, s1.u.y_comp.values)
    integrand = (
        kernels.max_abs(np.hypot(gRx, gRy) / sqrt_rho2)
        + kernels.max_abs(np.hypot(gPx, gPy) / (rho1 * sqrt_rho2))
        + max(kernels.max_abs(gUxx), kernels.max_abs(gUxy),
              kernels.max_abs(gUyx), kernels.max_abs(gUyy))
    )
    return StabilityRecord(s1.t, entropy, integrand)


def gronwall_envelope(history: list[StabilityRecord], C: float) -> np.ndarray:
    """Envelope entropy(0) * exp(C * A(t)) with A accumulated by trapezoid."""
    ts = np.array([rec.t for rec in history])
    integrands = np.array([rec.a_accum for rec in history])
    A = np.concatenate(
        [[0.0], np.cumsum(0.5 * (integrands[1:] + integrands[:-1]) * np.diff(ts))]
    )
    return history[0].entropy * np.exp(C * A)


def fit_gronwall_constant(history: list[StabilityRecord]) -> float:
    """Smallest C with entropy(t) <= entropy(0) exp(C A(t)) along the history."""
    e0 = history[0].entropy
    if e0 <= 0.0:
        raise ValueError("Gronwall fit needs entropy(0) > 0")
    ts = np.array([rec.t for rec in history])
    integrands = np.array([rec.a_accum for rec in history])
    A = np.concatenate(
        [[0.0], np.cumsum(0.5 * (integrands[1:] + integrands[:-1]) * np.diff(ts))]
    )
    best = 0.0
    for rec, a in zip(history[1:], A[1:]):
        if a > 0 and rec.entropy > e0:
            best = max(best, np.log(rec.entropy / e0) / a)
    return best


def restrict_state(state: PrimitiveState, coarse: GridSpec) -> PrimitiveState:
    """Spectral restriction of a fine state onto a coarser grid's modes."""
    if coarse.n >= state.grid.n:
        raise ValueError("restriction target must be strictly coarser")
    return PrimitiveState(
        state.t, state.epsilon,
        ScalarField(coarse, restrict_values(state.a.values, coarse)),
        VectorField(
            ScalarField(coarse, restrict_values(state.u.x_comp.values, coarse)),
            ScalarField(coarse, restrict_values(state.u.y_comp.values, coarse)),
        ),
        ScalarField(coarse, restrict_values(state.pi.values, coarse)),
    )


def restrict_values(fine_values: np.ndarray, coarse: GridSpec) -> np.ndarray:
    """Keep the modes inside the coarse dealias square, drop the rest."""
    nf = fine_values.shape[0]
    cf = fft_coeffs(fine_values)
    freqs = np.fft.fftfreq(coarse.n, d=1.0 / coarse.n).astype(int)
    idx = freqs % nf
    cc = cf[np.ix_(idx, idx)] * tables(coarse).dealias_mask
    return ifft_values(cc)


# ---------------------------------------------------------------------------
# Picard construction scheme
# ---------------------------------------------------------------------------

@dataclass
class PicardIterate:
    """One iterate's trajectory on the shared time grid."""

    times: np.ndarray
    a: np.ndarray    # (m+1, n, n)
    ux: np.ndarray
    uy: np.ndarray


@dataclass
class CauchyReport:
    """Successive-difference distances d_n = sup_t(||da||_L2 + ||du||_L2)."""

    distances: list[float]
    ratios: list[float]
    diverging: bool


def _midpoint(samples: np.ndarray, k: int) -> np.ndarray:
    """Cubic interpolation of trajectory samples at t_k + dt/2."""
    m = samples.shape[0] - 1
    if 1 <= k <= m - 2:
        return (
            -samples[k - 1] + 9.0 * samples[k] + 9.0 * samples[k + 1] - samples[k + 2]
        ) / 16.0
    if k == 0:
        w = (0.3125, 0.9375, -0.3125, 0.0625)
        base = 0
    else:  # k == m - 1
        w = (0.0625, -0.3125, 0.9375, 0.3125)
        base = m - 3
    return sum(wi * samples[base + i] for i, wi in enumerate(w))


def _step_linear_transport(t, a, ux_at, uy_at, dt):
    """SSP-RK3 for da/dt = -u(t).grad a with the advecting field frozen."""

    def rhs(values, stage):
        gx, gy = grad_arrays(t, values)
        out = np.empty_like(values)
        kernels.advect_scalar(ux_at[stage], uy_at[stage], gx, gy, out)
        return irfft2_real(np.fft.fft2(out) * t.dealias_mask)

    k1 = rhs(a, 0)
    a1 = a + dt * k1
    k2 = rhs(a1, 1)
    a2 = 0.75 * a + 0.25 * a1 + 0.25 * dt * k2
    k3 = rhs(a2, 2)
    return (a + 2.0 * a2 + 2.0 * dt * k3) / 3.0


def _step_linear_momentum(t, ux, uy, adv_ux_at, adv_uy_at, a_at, eps, dt, params):
    """SSP-RK3 for the linear momentum problem of the construction scheme.

    du/dt = P(-u_n.grad u - a grad Pi) with Pi from the elliptic problem
    -div((1+eps*a) grad Pi) = eps div(u_n.grad u) - curl u; the advecting
    field u_n and coefficient a are frozen per stage.
    """

    def rhs(vx, vy, stage):
        wx = adv_ux_at[stage]
        wy = adv_uy_at[stage]
        a = a_at[stage]
        vx_hat = np.fft.fft2(vx)
        vy_hat = np.fft.fft2(vy)
        dxx = irfft2_real(t.ikx * vx_hat)
        dxy = irfft2_real(t.iky * vx_hat)
        dyx = irfft2_real(t.ikx * vy_hat)
        dyy = irfft2_real(t.iky * vy_hat)
        advx = np.empty_like(vx)
        advy = np.empty_like(vx)
        kernels.advect_vector(wx, wy, dxx, dxy, dyx, dyy, advx, advy)
        adv_x_hat = np.fft.fft2(advx) * t.dealias_mask
        adv_y_hat = np.fft.fft2(advy) * t.dealias_mask
        curl_hat = t.ikx * vy_hat - t.iky * vx_hat
        f_hat = -eps * (t.ikx * adv_x_hat + t.iky * adv_y_hat) - curl_hat
        pi_hat, _ = _pressure_hat(t, a, eps, f_hat, params)
        px = irfft2_real(t.ikx * pi_hat)
        py = irfft2_real(t.iky * pi_hat)
        gx = irfft2_real(adv_x_hat) - a * px
        gy = irfft2_real(adv_y_hat) - a * py
        return leray_arrays(t, gx, gy, dealias=True, zero_mean=True)

    k1x, k1y = rhs(ux, uy, 0)
    ux1 = ux + dt * k1x
    uy1 = uy + dt * k1y
    k2x, k2y = rhs(ux1, uy1, 1)
    ux2 = 0.75 * ux + 0.25 * ux1 + 0.25 * dt * k2x
    uy2 = 0.75 * uy + 0.25 * uy1 + 0.25 * dt * k2y
    k3x, k3y = rhs(ux2, uy2, 2)
    return (
        (ux + 2.0 * ux2 + 2.0 * dt * k3x) / 3.0,
        (uy + 2.0 * uy2 + 2.0 * dt * k3y) / 3.0,
    )


def picard_construct(
    data: PrimitiveState,
    T: float,
    n_iters: int,
    params: SolverParams,
    n_steps: Optional[int] = None,
) -> tuple[list[PicardIterate], CauchyReport]:
    """Run the linearized construction scheme on a shared time grid.

    Iterate 0 is the datum frozen in time (Pi = 0); iterate n+1 transports a
    with the previous velocity and solves the momentum problem linear in the
    new velocity, advected by the previous one.  Frozen trajectories are
    sampled at Runge-Kutta stage times by cubic interpolation (O(dt^4),
    below the integrator's own order).  The caller passes mollified data
    (``make_initial_data`` mollifies).
    """
    grid = data.grid
    t = tables(grid)
    eps = data.epsilon
    if n_steps is None:
        n_steps = max(4, int(np.ceil(T / cfl_timestep(data, params))))
    n_steps = max(4, n_steps)
    dt = T / n_steps
    times = np.linspace(0.0, T, n_steps + 1)

    a0 = data.a.values
    ux0 = data.u.x_comp.values
    uy0 = data.u.y_comp.values
    base = PicardIterate(
        times,
        np.broadcast_to(a0, (n_steps + 1, *a0.shape)).copy(),
        np.broadcast_to(ux0, (n_steps + 1, *a0.shape)).copy(),
        np.broadcast_to(uy0, (n_steps + 1, *a0.shape)).copy(),
    )
    iterates = [base]
    distances: list[float] = []
    for _ in range(n_iters):
        prev = iterates[-1]
        a_traj = np.empty_like(prev.a)
        ux_traj = np.empty_like(prev.ux)
        uy_traj = np.empty_like(prev.uy)
        a_traj[0] = a0
        for k in range(n_steps):
            adv = (
                (prev.ux[k], prev.uy[k]),
                (prev.ux[k + 1], prev.uy[k + 1]),
                (_midpoint(prev.ux, k), _midpoint(prev.uy, k)),
            )
            ux_at = tuple(s[0] for s in adv)
            uy_at = tuple(s[1] for s in adv)
            a_traj[k + 1] = _step_linear_transport(t, a_traj[k], ux_at, uy_at, dt)
        ux_traj[0] = ux0
        uy_traj[0] = uy0
        for k in range(n_steps):
            ux_at = (prev.ux[k], prev.ux[k + 1], _midpoint(prev.ux, k))
            uy_at = (prev.uy[k], prev.uy[k + 1], _midpoint(prev.uy, k))
            a_at = (a_traj[k], a_traj[k + 1], _midpoint(a_traj, k))
            ux_traj[k + 1], uy_traj[k + 1] = _step_linear_momentum(
                t, ux_traj[k], uy_traj[k], ux_at, uy_at, a_at, eps, dt, params
            )
        new = PicardIterate(times, a_traj, ux_traj, uy_traj)
        d = max(
            l2_norm(new.a[k] - prev.a[k])
            + np.hypot(l2_norm(new.ux[k] - prev.ux[k]),
                       l2_norm(new.uy[k] - prev.uy[k]))
            for k in range(n_steps + 1)
        )
        distances.append(float(d))
        iterates.append(new)

    ratios = [
        distances[i + 1] / distances[i] if distances[i] > 0 else 0.0
        for i in range(len(distances) - 1)
    ]
    diverging = any(
        distances[i] < distances[i + 1] < distances[i + 2]
        and distances[i] > 0
        for i in range(len(distances) - 2)
    )
    return iterates, CauchyReport(distances, ratios, diverging)
