"""Pseudo-spectral laboratory for the rotating density-dependent Euler
system on the 2D torus, its quasi-homogeneous limit, and the diagnostic
apparatus around the singular limit (Littlewood-Paley norms, wave-system
residuals, compensated-compactness traces, relative-entropy stability,
lifespan probes)."""

__version__ = "0.1.0"

from .kernels import BACKEND as KERNEL_BACKEND  # noqa: F401
