"""Backend selection for the pointwise hot kernels.

The compiled Cython extension is preferred; the NumPy fallback is used when
the extension is absent or when the environment variable
``ROSSBYLAB_PURE_PYTHON`` is set (useful for debugging and benchmarking).
Both backends implement the same functions with identical semantics.
"""

import os

if os.environ.get("ROSSBYLAB_PURE_PYTHON"):
    from . import _kernels_np as _impl

    BACKEND = "numpy"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _kernels_np as _impl

        BACKEND = "numpy"

advect_scalar = _impl.advect_scalar
advect_vector = _impl.advect_vector
lincomb3 = _impl.lincomb3
perp_force = _impl.perp_force
weighted_energy = _impl.weighted_energy
max_speed = _impl.max_speed
max_abs = _impl.max_abs

__all__ = [
    "BACKEND",
    "advect_scalar",
    "advect_vector",
    "lincomb3",
    "perp_force",
    "weighted_energy",
    "max_speed",
    "max_abs",
]
