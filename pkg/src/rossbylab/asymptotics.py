"""Singular-limit experiments: eps-sweeps toward the quasi-homogeneous
system, wave-system residuals, compensated-compactness traces for
gamma = curl(rho u), the limit constraint, and lifespan probes against the
double-logarithmic lower-bound formulas.

Convergence is measured in strong L2 norms at fixed resolution: at desk
scale with smooth band-limited data the weak-* limits coincide with strong
limits of the discretized fields (a deliberate strengthening).  Runs that
reach the horizon without tripping the gradient threshold are censored,
never silently treated as blow-ups.

Sweep members are independent pure runs (they share only immutable data
and could execute concurrently); they run sequentially here so outputs are
bit-reproducible, and aggregation is a single fold over completed runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import Optional

import numpy as np

from . import kernels
from .besov import BesovIndex, besov_norm
from .primitive import (
    PrimitiveState,
    SolverParams,
    StabilityRecord,
    fit_gronwall_constant,
    gronwall_envelope,
    integrate_primitive,
    make_initial_data,
    restrict_state,
    stability_distance,
)
from .qh import integrate_qh, make_qh_initial_data, qh_energy
from .records import Trajectory
from .spectral import (
    GridSpec,
    ScalarField,
    VectorField,
    curl_arrays,
    grad_arrays,
    irfft2_real,
    l2_norm,
    leray_arrays,
    tables,
)

# ---------------------------------------------------------------------------
# eps sweep
# ---------------------------------------------------------------------------


@dataclass
class SweepConfig:
    """Inputs of one eps-sweep: shared data for every member and the limit run."""

    grid: GridSpec
    eps_list: list[float]
    delta: float = 0.1
    horizon: float = 1.0
    seed: int = 0
    output_times: Optional[list[float]] = None
    kind: str = "ill_prepared_default"
    alpha: float = 1.0
    n_mollify: Optional[int] = None
    params: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self) -> None:
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ValueError("eps_list must be strictly decreasing")


@dataclass
class GammaTrace:
    """Per-eps fields of gamma = curl(rho u) and omega = curl u over time."""

    epsilon: float
    times: list[float]
    gamma: list[np.ndarray]
    omega: list[np.ndarray]
    lip_gamma: float          # sup_t ||gamma(t+tau) - gamma(t)||_L2 / tau
    lip_grad_momentum: float  # same quantity for the gradient part of rho u


@dataclass
class EpsSweepResult:
    eps_list: list[float]
    times: list[float]
    qh_trajectory: Trajectory
    members: dict[float, Trajectory]
    err: dict[float, list[float]]       # total error per output time
    err_u: dict[float, list[float]]
    err_R: dict[float, list[float]]
    rho_dev_over_eps: dict[float, list[float]]   # ||rho-1||_inf / eps per time
    gamma_traces: list[GammaTrace]
    flagged: list[float]                # members that blew up early
    empirical_order: Optional[float]    # slope of log err(T) vs log eps

    def final_errors(self) -> list[float]:
        return [self.err[eps][-1] for eps in self.eps_list if eps not in self.flagged]


def _gamma_trace(traj: Trajectory, epsilon: float) -> GammaTrace:
    grid = traj.frames[0].grid
    t = tables(grid)
    gammas, omegas, grads = [], [], []
    for f in traj.frames:
        rho = f.density()
        ux = f.u.x_comp.values
        uy = f.u.y_comp.values
        vx = rho * ux
        vy = rho * uy
        gammas.append(curl_arrays(t, vx, vy))
        omegas.append(curl_arrays(t, ux, uy))
        sx, sy = leray_arrays(t, vx, vy)
        grads.append((vx - sx, vy - sy))
    lip_g = 0.0
    lip_m = 0.0
    for i in range(len(traj.times) - 1):
        tau = traj.times[i + 1] - traj.times[i]
        if tau <= 0:
            continue
        lip_g = max(lip_g, l2_norm(gammas[i + 1] - gammas[i]) / tau)
        dgx = grads[i + 1][0] - grads[i][0]
        dgy = grads[i + 1][1] - grads[i][1]
        lip_m = max(lip_m, float(np.hypot(l2_norm(dgx), l2_norm(dgy))) / tau)
    return GammaTrace(epsilon, list(traj.times), gammas, omegas, lip_g, lip_m)


def run_eps_sweep(cfg: SweepConfig) -> EpsSweepResult:
    """Primitive runs over eps_list against one limit run from the shared datum.

    Members that blow up before the horizon are flagged and skipped in the
    error table; the sweep continues.  All members (and the limit run) use
    the same seed, resolution and output times.
    """
    qh_state = make_qh_initial_data(
        cfg.grid, cfg.kind, cfg.delta, cfg.seed, cfg.n_mollify, cfg.alpha
    )
    qh_traj = integrate_qh(qh_state, cfg.horizon, cfg.params, cfg.output_times)
    times = list(qh_traj.times)

    members: dict[float, Trajectory] = {}
    err: dict[float, list[float]] = {}
    err_u: dict[float, list[float]] = {}
    err_R: dict[float, list[float]] = {}
    rho_dev: dict[float, list[float]] = {}
    traces: list[GammaTrace] = []
    flagged: list[float] = []
    for eps in cfg.eps_list:
        data = make_initial_data(
            cfg.grid, cfg.kind, cfg.delta, eps, cfg.seed,
            cfg.params, cfg.n_mollify, cfg.alpha,
        )
        traj = integrate_primitive(data, cfg.horizon, cfg.params, cfg.output_times)
        members[eps] = traj
        if traj.blowup_time is not None:
            flagged.append(eps)
            continue
        e_tot, e_u, e_R, dev = [], [], [], []
        for frame, qh_frame in zip(traj.frames, qh_traj.frames):
            dux = frame.u.x_comp.values - qh_frame.u.x_comp.values
            duy = frame.u.y_comp.values - qh_frame.u.y_comp.values
            du = float(np.hypot(l2_norm(dux), l2_norm(duy)))
            dR = l2_norm(frame.fluctuation() - qh_frame.R.values)
            e_u.append(du)
            e_R.append(dR)
            e_tot.append(du + dR)
            R = frame.fluctuation()
            rho_minus_1 = kernels.max_abs(np.ascontiguousarray(frame.density() - 1.0))
            dev.append(rho_minus_1 / eps)
        err[eps] = e_tot
        err_u[eps] = e_u
        err_R[eps] = e_R
        rho_dev[eps] = dev
        traces.append(_gamma_trace(traj, eps))

    order = None
    clean = [eps for eps in cfg.eps_list if eps not in flagged]
    if len(clean) >= 2:
        finals = np.array([err[eps][-1] for eps in clean])
        if (finals > 0).all():
            order = float(np.polyfit(np.log(clean), np.log(finals), 1)[0])
    return EpsSweepResult(
        cfg.eps_list, times, qh_traj, members, err, err_u, err_R,
        rho_dev, traces, flagged, order,
    )


# ---------------------------------------------------------------------------
# wave-system residuals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WaveResidual:
    """L2 residuals of the rescaled wave form at one interior snapshot.

    r_mass is ||eps dR/dt + div(rho u)||; r_mass_transport is the
    algebraically equivalent O(1) form ||dR/dt + div(R u)||; r_mom the
    momentum residual ||eps dV/dt + grad Pi + u_perp - eps f|| with
    f = -div(rho u x u) - R u_perp.
    """

    t: float
    r_mass: float
    r_mass_transport: float
    r_mom: float


def wave_residual(before: PrimitiveState, center: PrimitiveState,
                  after: PrimitiveState) -> WaveResidual:
    """Centered-difference wave-system residuals at the middle snapshot."""
    if not (before.t < center.t < after.t):
        raise ValueError("wave residual needs temporally ordered snapshots")
    if before.grid != center.grid or after.grid != center.grid:
        raise ValueError("wave residual needs a shared grid")
    eps = center.epsilon
    if abs(before.epsilon - eps) > 1e-14 or abs(after.epsilon - eps) > 1e-14:
        raise ValueError("wave residual needs matching epsilon")
    t = tables(center.grid)
    span = after.t - before.t

    def V(state):
        rho = state.density()
        return rho * state.u.x_comp.values, rho * state.u.y_comp.values

    vbx, vby = V(before)
    vax, vay = V(after)
    vcx, vcy = V(center)
    dVx = (vax - vbx) / span
    dVy = (vay - vby) / span
    dR = (after.fluctuation() - before.fluctuation()) / span

    ux = center.u.x_comp.values
    uy = center.u.y_comp.values
    R = center.fluctuation()
    div_V = irfft2_real(t.ikx * np.fft.fft2(vcx) + t.iky * np.fft.fft2(vcy))
    div_Ru = irfft2_real(
        t.ikx * np.fft.fft2(R * ux) + t.iky * np.fft.fft2(R * uy)
    )
    r_mass = l2_norm(eps * dR + div_V)
    r_mass_transport = l2_norm(dR + div_Ru)

    def div_tensor_row(vi):
        # div(rho u_i u) = dx(rho u_i ux) + dy(rho u_i uy)
        return irfft2_real(
            t.ikx * np.fft.fft2(vi * ux) + t.iky * np.fft.fft2(vi * uy)
        )

    fx = -div_tensor_row(vcx) + R * uy   # -div(rho ux u) - R*(-uy)
    fy = -div_tensor_row(vcy) - R * ux
    pix, piy = grad_arrays(t, center.pi.values)
    rx = eps * dVx + pix - uy - eps * fx
    ry = eps * dVy + piy + ux - eps * fy
    # the solver evolves in the mean-free gauge, so the k=0 slot carries no
    # PDE content (there is no such mode in the decay-at-infinity setting);
    # measure the residual on the mean-free sector
    rx -= rx.mean()
    ry -= ry.mean()
    r_mom = float(np.hypot(l2_norm(rx), l2_norm(ry)))
    return WaveResidual(center.t, r_mass, r_mass_transport, r_mom)


# ---------------------------------------------------------------------------
# compensated compactness
# ---------------------------------------------------------------------------


@dataclass
class GammaReport:
    """Sweep-wide gamma diagnostics.

    ``lip_band_ratio`` is max/min of lip_gamma over eps (gated at 3);
    ``gamma_omega_K`` the smallest sweep-wide K with
    ||gamma_eps - omega_eps||_L2 <= eps*K at all times; ``final_distance``
    maps eps to ||gamma_eps(T) - omega_qh(T)||_L2 (must decrease with eps).
    The unprojected momentum's gradient-part Lipschitz constants are
    reported alongside but not gated (they may grow as eps shrinks).
    """

    lip_gamma: dict[float, float]
    lip_grad_momentum: dict[float, float]
    lip_band_ratio: float
    gamma_omega_K: float
    final_distance: dict[float, float]
    distances_decreasing: bool


def gamma_compactness(traces: list[GammaTrace], omega_qh_final: np.ndarray
                      ) -> GammaReport:
    if not traces:
        raise ValueError("gamma report needs at least one trace")
    times0 = traces[0].times
    for tr in traces:
        if len(tr.times) != len(times0) or any(
            abs(a - b) > 1e-12 for a, b in zip(tr.times, times0)
        ):
            raise ValueError("gamma traces must share output times")
    lips = {tr.epsilon: tr.lip_gamma for tr in traces}
    lips_m = {tr.epsilon: tr.lip_grad_momentum for tr in traces}
    ratio = max(lips.values()) / min(lips.values()) if min(lips.values()) > 0 else np.inf
    K = 0.0
    for tr in traces:
        for g, w in zip(tr.gamma, tr.omega):
            K = max(K, l2_norm(g - w) / tr.epsilon)
    finals = {
        tr.epsilon: l2_norm(tr.gamma[-1] - omega_qh_final) for tr in traces
    }
    eps_sorted = sorted(finals, reverse=True)  # decreasing eps
    decreasing = all(
        finals[a] > finals[b] for a, b in zip(eps_sorted, eps_sorted[1:])
    )
    return GammaReport(lips, lips_m, ratio, K, finals, decreasing)


def limit_constraint_check(u: VectorField) -> float:
    """||P(u_perp)||_L2: zero (to round-off) iff u_perp is a gradient."""
    proj = leray_arrays(
        tables(u.grid), -u.y_comp.values, u.x_comp.values, zero_mean=True
    )
    return float(np.hypot(l2_norm(proj[0]), l2_norm(proj[1])))


# ---------------------------------------------------------------------------
# lifespan
# ---------------------------------------------------------------------------


def lower_bound_qh(u0_norm: float, r0_norm: float, C: float = 1.0) -> float:
    """Limit-system lifespan bound (C/u0) log(log(C u0/r0 + 1) + 1)."""
    if u0_norm <= 0 or C <= 0:
        raise ValueError("norms and C must be positive")
    if r0_norm == 0.0:
        return np.inf
    return (C / u0_norm) * log(log(C * u0_norm / r0_norm + 1.0) + 1.0)


def lower_bound_primitive(E0: float, A0: float, epsilon: float,
                          C: float = 1.0, lam: float = 1.0) -> float:
    """Primitive-system bound with B0 = A0 + eps*A0^(lam+1):

    (C/E0) log(log(C E0 / max(B0, eps B0 E0) + 1) + 1).
    """
    if E0 <= 0 or C <= 0:
        raise ValueError("E0 and C must be positive")
    if lam < 1.0:
        raise ValueError("lambda must be >= 1")
    B0 = A0 + epsilon * A0 ** (lam + 1.0)
    denom = max(B0, epsilon * B0 * E0)
    if denom == 0.0:
        return np.inf
    return (C / E0) * log(log(C * E0 / denom + 1.0) + 1.0)


@dataclass(frozen=True)
class LifespanReport:
    """Measured blow-up proxy time against the formula lower bounds."""

    delta: float
    epsilon: Optional[float]       # None for limit-system mode
    t_measured: float
    censored: bool                 # reached the horizon without an event
    t_lower_qh: float
    t_lower_primitive: float
    constants_used: tuple[float, float]   # (C, lambda)
    u0_energy: float               # E(0) = ||u0||_L2 + ||omega0||_B0inf1
    r0_norm: float                 # ||R0||_B1inf1
    a0_norm: float                 # ||grad fluct||_B0inf1


def _grad_besov(grid: GridSpec, values: np.ndarray) -> float:
    t = tables(grid)
    gx, gy = grad_arrays(t, values)
    b0 = BesovIndex(0.0, np.inf, 1.0)
    return besov_norm(ScalarField(grid, gx), b0) + besov_norm(
        ScalarField(grid, gy), b0
    )


def lifespan_measure(
    grid: GridSpec,
    delta: float,
    epsilon: Optional[float],
    params: SolverParams,
    seed: int = 0,
    horizon: float = 2.0,
    C: float = 1.0,
    lam: float = 1.0,
    kind: str = "ill_prepared_default",
) -> LifespanReport:
    """Integrate until the gradient proxy trips or the horizon is reached.

    ``epsilon=None`` probes the limit system.  Censored runs carry the
    horizon as ``t_measured`` with the flag set.
    """
    if epsilon is None:
        state = make_qh_initial_data(grid, kind, delta, seed)
        en = qh_energy(state)
        E0, r0 = en.e_total, en.r_norm
        a0 = _grad_besov(grid, state.R.values)
        traj = integrate_qh(state, horizon, params,
                            output_times=[state.t, horizon])
        eps_for_formula = 0.0
    else:
        state = make_initial_data(grid, kind, delta, epsilon, seed, params)
        t = tables(grid)
        ux = state.u.x_comp.values
        uy = state.u.y_comp.values
        omega = curl_arrays(t, ux, uy)
        b0 = BesovIndex(0.0, np.inf, 1.0)
        E0 = float(np.sqrt(np.mean(ux * ux + uy * uy))) + besov_norm(
            ScalarField(grid, omega), b0
        )
        r0 = besov_norm(ScalarField(grid, state.fluctuation()),
                        BesovIndex(1.0, np.inf, 1.0))
        a0 = _grad_besov(grid, state.a.values)
        traj = integrate_primitive(state, horizon, params,
                                   output_times=[state.t, horizon])
        eps_for_formula = epsilon
    censored = traj.blowup_time is None
    t_measured = horizon if censored else traj.blowup_time
    return LifespanReport(
        delta=delta,
        epsilon=epsilon,
        t_measured=t_measured,
        censored=censored,
        t_lower_qh=lower_bound_qh(E0, r0, C) if r0 >= 0 else np.inf,
        t_lower_primitive=lower_bound_primitive(E0, a0, eps_for_formula, C, lam),
        constants_used=(C, lam),
        u0_energy=E0,
        r0_norm=r0,
        a0_norm=a0,
    )


@dataclass
class DeltaSweepResult:
    reports: list[LifespanReport]
    monotone: bool          # t_measured non-decreasing as delta halves
    correlation: float      # t_measured vs log log(1/delta), nan if degenerate


def lifespan_monotone(reports: list[LifespanReport]) -> bool:
    """Non-decreasing proxy time for decreasing delta; a censored run
    dominates every measured time at or below the horizon."""
    ordered = sorted(reports, key=lambda r: -r.delta)
    for a, b in zip(ordered, ordered[1:]):
        if b.censored:
            continue  # censored dominates
        if a.censored:
            return False  # measured time after a censored larger-delta run
        if b.t_measured < a.t_measured - 1e-12:
            return False
    return True


def loglog_correlation(reports: list[LifespanReport]) -> float:
    pairs = [
        (log(log(1.0 / r.delta)) if r.delta < 1.0 else 0.0, r.t_measured)
        for r in reports
        if not r.censored
    ]
    if len(pairs) < 2:
        return float("nan")
    x, y = np.array(pairs).T
    if np.std(x) == 0 or np.std(y) == 0:
        return float("nan")
    return float(np.corrcoef(x, y)[0, 1])


def run_delta_sweep(
    grid: GridSpec,
    deltas: list[float],
    params: SolverParams,
    seed: int = 0,
    horizon: float = 2.0,
    epsilon: Optional[float] = None,
    C: float = 1.0,
    lam: float = 1.0,
) -> DeltaSweepResult:
    reports = [
        lifespan_measure(grid, d, epsilon, params, seed, horizon, C, lam)
        for d in deltas
    ]
    return DeltaSweepResult(
        reports, lifespan_monotone(reports), loglog_correlation(reports)
    )


# ---------------------------------------------------------------------------
# twin-resolution stability experiment
# ---------------------------------------------------------------------------


@dataclass
class StabilityTwinResult:
    times: list[float]
    history: list[StabilityRecord]
    envelope: np.ndarray     # entropy(0) * exp(C_gate * A(t))
    fitted_C: float
    gate_C: float

    @property
    def within_envelope(self) -> bool:
        return bool(
            all(r.entropy <= e * (1 + 1e-9) for r, e in
                zip(self.history, self.envelope))
        )


def run_stability_twin(
    coarse: GridSpec,
    horizon: float,
    params: SolverParams,
    seed: int = 0,
    delta: float = 0.1,
    epsilon: float = 0.1,
    gate_C: float = 10.0,
    output_times: Optional[list[float]] = None,
) -> StabilityTwinResult:
    """Twin runs at n and 2n from the shared-seed data family.

    The generator is resolution-consistent, so the fine datum carries one
    extra spectral band; its restriction differs from the coarse datum by
    exactly that band, anchoring entropy(0) > 0.  The restricted fine run
    serves as the reference solution in the relative-entropy record.
    """
    fine = GridSpec(2 * coarse.n, dealias_fraction=coarse.dealias_fraction)
    n_mollify = int(np.floor(np.log2(fine.dealias_radius)))  # one above default
    coarse_data = make_initial_data(
        coarse, "ill_prepared_default", delta, epsilon, seed, params, n_mollify
    )
    fine_data = make_initial_data(
        fine, "ill_prepared_default", delta, epsilon, seed, params, n_mollify
    )
    coarse_traj = integrate_primitive(coarse_data, horizon, params, output_times)
    fine_traj = integrate_primitive(fine_data, horizon, params, coarse_traj.times)
    history = [
        stability_distance(restrict_state(ff, coarse), cf)
        for ff, cf in zip(fine_traj.frames, coarse_traj.frames)
    ]
    envelope = gronwall_envelope(history, gate_C)
    return StabilityTwinResult(
        list(coarse_traj.times), history, envelope,
        fit_gronwall_constant(history), gate_C,
    )
