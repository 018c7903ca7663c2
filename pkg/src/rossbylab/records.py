"""Per-output-time diagnostics rows and trajectory containers."""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Optional


@dataclass
class DiagnosticsRecord:
    """One diagnostics row, emitted at every output time.

    ``energy`` is the weighted kinetic energy mean(rho |u|^2) (rho = 1 for
    the limit system), ``E_qh`` the energy functional ||u||_L2 +
    ||omega||_{B^0_inf1}, ``A_eps`` the fluctuation-gradient norm
    ||grad a||_{B^0_inf1} (grad R for the limit system) and ``gamma_l2``
    the L2 norm of curl(rho u).  ``wall_time_ms`` is measured and therefore
    excluded from bit-level reproducibility comparisons.
    """

    t: float
    energy: float
    linf_R: float
    l2_div_u: float
    besov_b0inf1_omega: float
    E_qh: float
    A_eps: float
    gamma_l2: float
    pressure_iters: int
    wall_time_ms: float

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class Trajectory:
    """States and diagnostics sampled at the requested output times.

    ``blowup_time`` is set when the gradient proxy crossed the threshold
    before the horizon; the trajectory then holds the frames recorded up to
    the event.  ``censored`` marks a run that reached the horizon without
    blowing up (the two are mutually exclusive).
    """

    times: list[float]
    frames: list
    records: list[DiagnosticsRecord]
    blowup_time: Optional[float] = None

    @property
    def censored(self) -> bool:
        return self.blowup_time is None

    @property
    def final(self):
        return self.frames[-1]
