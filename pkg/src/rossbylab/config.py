"""Run configuration: strict key = value parsing with [section] headers.

Every key has a documented default; unknown keys, duplicate keys, malformed
values and out-of-range values are rejected with the offending line number.
``serialize_config`` emits a canonical document that reparses to an
identical configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError
from .primitive import DATA_KINDS, SolverParams
from .spectral import GridSpec

MODES = (
    "run-primitive",
    "run-qh",
    "sweep-eps",
    "sweep-delta",
    "picard",
    "besov",
    "stability-twin",
)


@dataclass
class RunConfig:
    # [grid]
    n: int = 128
    dealias_fraction: float = 2.0 / 3.0
    # [solver]
    dt: Optional[float] = None           # None: CFL-driven
    cfl: float = 0.5
    pressure_tol: float = 1e-11
    pressure_max_iter: int = 200
    blowup_threshold: float = 1e4
    rho_min: float = 0.5
    rho_max: float = 2.0
    # [data]
    kind: str = "ill_prepared_default"
    delta: float = 0.1
    epsilon: float = 0.1
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    delta_list: tuple[float, ...] = (0.4, 0.2, 0.1, 0.05)
    seed: int = 0
    alpha: float = 1.0
    n_mollify: Optional[int] = None      # None: one band below the top scale
    # [run]
    mode: str = "run-qh"
    horizon: float = 1.0
    output_times: tuple[float, ...] = ()  # empty: 11 evenly spaced times
    out_dir: str = "out"
    lifespan_C: float = 1.0
    lifespan_lambda: float = 1.0
    picard_iters: int = 6

    defaults_applied: list = field(default_factory=list, repr=False, compare=False)

    def grid(self) -> GridSpec:
        return GridSpec(self.n, dealias_fraction=self.dealias_fraction)

    def solver_params(self) -> SolverParams:
        return SolverParams(
            dt=self.dt,
            cfl_number=self.cfl,
            pressure_tol=self.pressure_tol,
            pressure_max_iter=self.pressure_max_iter,
            blowup_threshold=self.blowup_threshold,
            density_bounds=(self.rho_min, self.rho_max),
        )

    def resolved_output_times(self) -> Optional[list]:
        return list(self.output_times) if self.output_times else None


def _parse_float(text: str) -> float:
    return float(text)


def _parse_optional_float(text: str) -> Optional[float]:
    return None if text.lower() == "none" else float(text)


def _parse_optional_int(text: str) -> Optional[int]:
    return None if text.lower() == "none" else int(text)


def _parse_int(text: str) -> int:
    return int(text)


def _parse_float_list(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(part) for part in text.split(","))


def _parse_str(text: str) -> str:
    return text


# key -> (section, parser, validator or None)
_SCHEMA = {
    "n": ("grid", _parse_int, None),
    "dealias_fraction": ("grid", _parse_float, None),
    "dt": ("solver", _parse_optional_float, None),
    "cfl": ("solver", _parse_float, None),
    "pressure_tol": ("solver", _parse_float, None),
    "pressure_max_iter": ("solver", _parse_int, None),
    "blowup_threshold": ("solver", _parse_float, None),
    "rho_min": ("solver", _parse_float, None),
    "rho_max": ("solver", _parse_float, None),
    "kind": ("data", _parse_str, None),
    "delta": ("data", _parse_float, None),
    "epsilon": ("data", _parse_float, None),
    "eps_list": ("data", _parse_float_list, None),
    "delta_list": ("data", _parse_float_list, None),
    "seed": ("data", _parse_int, None),
    "alpha": ("data", _parse_float, None),
    "n_mollify": ("data", _parse_optional_int, None),
    "mode": ("run", _parse_str, None),
    "horizon": ("run", _parse_float, None),
    "output_times": ("run", _parse_float_list, None),
    "out_dir": ("run", _parse_str, None),
    "lifespan_C": ("run", _parse_float, None),
    "lifespan_lambda": ("run", _parse_float, None),
    "picard_iters": ("run", _parse_int, None),
}

_SECTIONS = ("grid", "solver", "data", "run")


def _validate(cfg: RunConfig, lines: dict[str, int]) -> None:
    def fail(key: str, message: str):
        raise ConfigError(message, lines.get(key))

    if cfg.n < 8 or (cfg.n & (cfg.n - 1)) != 0:
        fail("n", f"n must be a power of two >= 8, got {cfg.n}")
    if not 0.0 < cfg.dealias_fraction <= 1.0:
        fail("dealias_fraction", "dealias_fraction must lie in (0, 1]")
    if cfg.dealias_fraction * (cfg.n // 2) < 2.0:
        fail("dealias_fraction", "dealias radius below 2: grid too coarse")
    if cfg.dt is not None and cfg.dt <= 0:
        fail("dt", "dt must be positive or none")
    if not 0.0 < cfg.cfl <= 1.0:
        fail("cfl", "cfl must lie in (0, 1]")
    if not 0.0 < cfg.pressure_tol < 1e-6:
        fail("pressure_tol", "pressure_tol must lie in (0, 1e-6)")
    if cfg.pressure_max_iter < 1:
        fail("pressure_max_iter", "pressure_max_iter must be positive")
    if cfg.blowup_threshold <= 0:
        fail("blowup_threshold", "blowup_threshold must be positive")
    if not 0.0 < cfg.rho_min < cfg.rho_max:
        fail("rho_min", "density bounds need 0 < rho_min < rho_max")
    if cfg.kind not in DATA_KINDS:
        fail("kind", f"kind must be one of {DATA_KINDS}")
    if cfg.delta < 0:
        fail("delta", "delta must be nonnegative")
    if not 0.0 < cfg.epsilon <= 1.0:
        fail("epsilon", "epsilon must lie in (0, 1]")
    if not cfg.eps_list or any(
        b >= a for a, b in zip(cfg.eps_list, cfg.eps_list[1:])
    ):
        fail("eps_list", "eps_list must be nonempty and strictly decreasing")
    if any(not 0.0 < e <= 1.0 for e in cfg.eps_list):
        fail("eps_list", "eps_list entries must lie in (0, 1]")
    if not cfg.delta_list or any(d <= 0 for d in cfg.delta_list):
        fail("delta_list", "delta_list entries must be positive")
    if cfg.alpha <= 0:
        fail("alpha", "alpha must be positive")
    if cfg.n_mollify is not None and cfg.n_mollify < 0:
        fail("n_mollify", "n_mollify must be nonnegative or none")
    if cfg.mode not in MODES:
        fail("mode", f"mode must be one of {MODES}")
    if cfg.horizon <= 0:
        fail("horizon", "horizon must be positive")
    if cfg.output_times and (
        any(t < 0 for t in cfg.output_times)
        or any(b <= a for a, b in zip(cfg.output_times, cfg.output_times[1:]))
        or cfg.output_times[-1] > cfg.horizon + 1e-12
    ):
        fail("output_times", "output_times must increase and stay within the horizon")
    if cfg.lifespan_C <= 0:
        fail("lifespan_C", "lifespan_C must be positive")
    if cfg.lifespan_lambda < 1.0:
        fail("lifespan_lambda", "lifespan_lambda must be >= 1")
    if cfg.picard_iters < 1:
        fail("picard_iters", "picard_iters must be positive")


def parse_pairs(pairs: list[tuple[str, str, Optional[int]]]) -> RunConfig:
    """Build a validated RunConfig from (key, raw value, line) triples."""
    cfg = RunConfig()
    lines: dict[str, int] = {}
    seen: set[str] = set()
    for key, raw, line in pairs:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", line)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", line)
        seen.add(key)
        if line is not None:
            lines[key] = line
        _, parser, _ = _SCHEMA[key]
        try:
            value = parser(raw.strip())
        except ValueError:
            raise ConfigError(f"cannot parse value for {key!r}: {raw.strip()!r}", line)
        setattr(cfg, key, value)
    cfg.defaults_applied = sorted(set(_SCHEMA) - seen)
    _validate(cfg, lines)
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse a key = value document with [section] headers and # comments."""
    pairs: list[tuple[str, str, Optional[int]]] = []
    section = None
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTIONS:
                raise ConfigError(f"unknown section {section!r}", lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected 'key = value'", lineno)
        key, raw_value = (part.strip() for part in line.split("=", 1))
        pairs.append((key, raw_value, lineno))
    return parse_pairs(pairs)


def apply_overrides(cfg: RunConfig,
                    overrides: list[tuple[str, str]]) -> RunConfig:
    """Re-validate with ``--set key=value`` overrides layered on top."""
    pairs = [
        (key, _format_value(getattr(cfg, key)), None)
        for key in _SCHEMA
        if key not in cfg.defaults_applied
    ]
    merged = {key: (key, raw, line) for key, raw, line in pairs}
    for key, raw in overrides:
        merged[key] = (key, raw, None)
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
    return parse_pairs(list(merged.values()))


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(format(v, ".17g") for v in value)
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form: every key explicit, grouped by section."""
    out = []
    for section in _SECTIONS:
        out.append(f"[{section}]")
        for key, (sec, _, _) in _SCHEMA.items():
            if sec == section:
                out.append(f"{key} = {_format_value(getattr(cfg, key))}")
        out.append("")
    return "\n".join(out)
