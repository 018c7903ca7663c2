"""Command-line interface binding the laboratory together.

    rossbylab MODE [--config PATH] [--set key=value ...] [--out DIR] [--seed N]

Exit status: 0 success; 2 configuration error; 3 numerical failure
(pressure non-convergence, non-finite state); 4 a blow-up event ended a
run early (partial outputs and a MANIFEST line naming the event time are
still written).  Every run directory receives a MANIFEST recording the
config hash, seed, versions and output files.
"""

from __future__ import annotations

import argparse
import hashlib
import platform
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, kernels
from . import asymptotics as asy
from .besov import BesovIndex, besov_norm
from .config import MODES, RunConfig, apply_overrides, parse_config, serialize_config
from .errors import ConfigError, NumericalError
from .primitive import (
    generate_profiles,
    integrate_primitive,
    make_initial_data,
    picard_construct,
)
from .qh import integrate_qh, make_qh_initial_data
from .snapshots import write_csv, write_snapshot
from .spectral import ScalarField, sobolev_norm


@dataclass
class SweepErrorRow:
    eps: float
    t: float
    err_u: float
    err_R: float
    err_total: float
    rho_dev_over_eps: float


@dataclass
class GammaRow:
    eps: float
    lip_gamma: float
    lip_grad_momentum: float
    final_distance: float
    gamma_minus_omega_over_eps: float


@dataclass
class LifespanRow:
    delta: float
    epsilon: float            # NaN in limit-system mode
    t_measured: float
    censored: bool
    t_lower_qh: float
    t_lower_primitive: float
    C: float
    lam: float
    u0_energy: float
    r0_norm: float
    a0_norm: float


@dataclass
class CauchyRow:
    n: int
    d_n: float
    ratio: float              # d_n / d_{n-1}; NaN for the first row


@dataclass
class BesovRow:
    s: float
    p: float
    r: float
    besov: float
    sobolev: float            # direct H^s norm, for the equivalence bands


@dataclass
class StabilityRow:
    t: float
    entropy: float
    envelope: float
    a_integrand: float


def _parse_args(argv: list[str]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="rossbylab", description=__doc__)
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", type=Path, default=None)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        dest="overrides")
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--seed", type=int, default=None)
    return parser.parse_args(argv)


def _load_config(args: argparse.Namespace) -> RunConfig:
    text = args.config.read_text(encoding="utf-8") if args.config else ""
    cfg = parse_config(text)
    overrides = []
    for item in args.overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides.append((key.strip(), value.strip()))
    overrides.append(("mode", args.mode))
    if args.seed is not None:
        overrides.append(("seed", str(args.seed)))
    if args.out is not None:
        overrides.append(("out_dir", str(args.out)))
    return apply_overrides(cfg, overrides)


def _write_manifest(out: Path, cfg: RunConfig, files: list[str],
                    extra: list[str]) -> None:
    # the resolved config makes the run directory self-reproducing
    resolved = serialize_config(cfg)
    (out / "config.resolved").write_text(resolved, encoding="utf-8")
    digest = hashlib.sha256(resolved.encode()).hexdigest()
    lines = [
        f"mode = {cfg.mode}",
        f"config_hash = {digest}",
        f"seed = {cfg.seed}",
        f"package_version = {__version__}",
        f"numpy_version = {np.__version__}",
        f"python = {platform.python_version()}",
        f"kernel_backend = {kernels.BACKEND}",
    ]
    lines += extra
    lines += [f"file = {name}" for name in ["config.resolved"] + files]
    (out / "MANIFEST").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_single(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    params = cfg.solver_params()
    if cfg.mode == "run-primitive":
        state = make_initial_data(grid, cfg.kind, cfg.delta, cfg.epsilon,
                                  cfg.seed, params, cfg.n_mollify, cfg.alpha)
        traj = integrate_primitive(state, cfg.horizon, params,
                                   cfg.resolved_output_times())
    else:
        state = make_qh_initial_data(grid, cfg.kind, cfg.delta, cfg.seed,
                                     cfg.n_mollify, cfg.alpha)
        traj = integrate_qh(state, cfg.horizon, params,
                            cfg.resolved_output_times())
    files = []
    if traj.records:
        write_csv(traj.records, out / "diagnostics.csv")
        files.append("diagnostics.csv")
        write_snapshot(traj.final, out / "final.rsbl")
        files.append("final.rsbl")
    extra = []
    if traj.blowup_time is not None:
        extra.append(f"blowup_time = {traj.blowup_time:.17g}")
    _write_manifest(out, cfg, files, extra)
    return 4 if traj.blowup_time is not None else 0


def _run_sweep_eps(cfg: RunConfig, out: Path) -> int:
    sweep = asy.SweepConfig(
        grid=cfg.grid(), eps_list=list(cfg.eps_list), delta=cfg.delta,
        horizon=cfg.horizon, seed=cfg.seed,
        output_times=cfg.resolved_output_times(), kind=cfg.kind,
        alpha=cfg.alpha, n_mollify=cfg.n_mollify, params=cfg.solver_params(),
    )
    res = asy.run_eps_sweep(sweep)
    files = []
    rows = []
    for eps in res.eps_list:
        if eps in res.flagged:
            continue
        for i, t in enumerate(res.times):
            rows.append(SweepErrorRow(
                eps, t, res.err_u[eps][i], res.err_R[eps][i],
                res.err[eps][i], res.rho_dev_over_eps[eps][i],
            ))
    if rows:
        write_csv(rows, out / "errors.csv")
        files.append("errors.csv")
    for eps, traj in res.members.items():
        sub = out / f"eps_{eps:g}"
        sub.mkdir(exist_ok=True)
        if traj.records:
            write_csv(traj.records, sub / "diagnostics.csv")
            files.append(f"eps_{eps:g}/diagnostics.csv")
            write_snapshot(traj.final, sub / "final.rsbl")
            files.append(f"eps_{eps:g}/final.rsbl")
    extra = []
    if res.gamma_traces:
        from .spectral import curl_arrays, tables

        f = res.qh_trajectory.final
        omega_qh = curl_arrays(tables(f.grid), f.u.x_comp.values,
                               f.u.y_comp.values)
        report = asy.gamma_compactness(res.gamma_traces, omega_qh)
        from .spectral import l2_norm

        gamma_rows = []
        for tr in res.gamma_traces:
            per_eps_K = max(
                l2_norm(g - w) / tr.epsilon
                for g, w in zip(tr.gamma, tr.omega)
            )
            gamma_rows.append(GammaRow(
                tr.epsilon, tr.lip_gamma, tr.lip_grad_momentum,
                report.final_distance[tr.epsilon], per_eps_K,
            ))
        write_csv(gamma_rows, out / "gamma.csv")
        files.append("gamma.csv")
        extra.append(f"lip_band_ratio = {report.lip_band_ratio:.17g}")
        extra.append(f"gamma_omega_K = {report.gamma_omega_K:.17g}")
        extra.append(f"final_distances_decreasing = {report.distances_decreasing}")
    if res.empirical_order is not None:
        extra.append(f"empirical_order = {res.empirical_order:.17g}")
    if res.flagged:
        extra.append("flagged_eps = " + ",".join(f"{e:g}" for e in res.flagged))
    _write_manifest(out, cfg, files, extra)
    return 0


def _run_sweep_delta(cfg: RunConfig, out: Path) -> int:
    res = asy.run_delta_sweep(
        cfg.grid(), list(cfg.delta_list), cfg.solver_params(), cfg.seed,
        cfg.horizon, epsilon=None, C=cfg.lifespan_C, lam=cfg.lifespan_lambda,
    )
    rows = [
        LifespanRow(
            r.delta, float("nan") if r.epsilon is None else r.epsilon,
            r.t_measured, r.censored, r.t_lower_qh, r.t_lower_primitive,
            r.constants_used[0], r.constants_used[1],
            r.u0_energy, r.r0_norm, r.a0_norm,
        )
        for r in res.reports
    ]
    write_csv(rows, out / "lifespans.csv")
    extra = [
        f"monotone = {res.monotone}",
        f"loglog_correlation = {res.correlation:.17g}",
    ]
    _write_manifest(out, cfg, ["lifespans.csv"], extra)
    return 0


def _run_picard(cfg: RunConfig, out: Path) -> int:
    params = cfg.solver_params()
    data = make_initial_data(cfg.grid(), cfg.kind, cfg.delta, cfg.epsilon,
                             cfg.seed, params, cfg.n_mollify, cfg.alpha)
    _, report = picard_construct(data, cfg.horizon, cfg.picard_iters, params)
    rows = [
        CauchyRow(i, d, report.ratios[i - 1] if i >= 1 else float("nan"))
        for i, d in enumerate(report.distances)
    ]
    write_csv(rows, out / "cauchy.csv")
    extra = [f"diverging = {report.diverging}"]
    _write_manifest(out, cfg, ["cauchy.csv"], extra)
    return 0


def _run_besov(cfg: RunConfig, out: Path) -> int:
    grid = cfg.grid()
    _, profile, _ = generate_profiles(grid, cfg.kind, cfg.seed, cfg.n_mollify)
    f = ScalarField(grid, profile)
    rows = []
    for s in (0.0, 1.0, 2.0, 3.0):
        for p, r in ((2.0, 2.0), (np.inf, 1.0), (np.inf, np.inf), (1.0, 1.0)):
            rows.append(BesovRow(
                s, p, r, besov_norm(f, BesovIndex(s, p, r)), sobolev_norm(f, s)
            ))
    write_csv(rows, out / "besov.csv")
    sys.stdout.write((out / "besov.csv").read_text(encoding="utf-8"))
    _write_manifest(out, cfg, ["besov.csv"], [])
    return 0


def _run_stability_twin(cfg: RunConfig, out: Path) -> int:
    res = asy.run_stability_twin(
        cfg.grid(), cfg.horizon, cfg.solver_params(), cfg.seed,
        cfg.delta, cfg.epsilon, output_times=cfg.resolved_output_times(),
    )
    rows = [
        StabilityRow(rec.t, rec.entropy, env, rec.a_accum)
        for rec, env in zip(res.history, res.envelope)
    ]
    write_csv(rows, out / "stability.csv")
    extra = [
        f"fitted_C = {res.fitted_C:.17g}",
        f"gate_C = {res.gate_C:.17g}",
        f"within_envelope = {res.within_envelope}",
    ]
    _write_manifest(out, cfg, ["stability.csv"], extra)
    return 0


_HANDLERS = {
    "run-primitive": _run_single,
    "run-qh": _run_single,
    "sweep-eps": _run_sweep_eps,
    "sweep-delta": _run_sweep_delta,
    "picard": _run_picard,
    "besov": _run_besov,
    "stability-twin": _run_stability_twin,
}


def cli_main(argv: list[str]) -> int:
    try:
        args = _parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        return _HANDLERS[cfg.mode](cfg, out)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))


if __name__ == "__main__":
    main()
