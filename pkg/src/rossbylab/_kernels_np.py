"""NumPy implementations of the pointwise hot kernels.

Fallback backend used when the compiled extension is unavailable (or when
ROSSBYLAB_PURE_PYTHON is set).  Semantics must match ``_kernels_cy`` exactly;
``tests/test_kernels.py`` cross-checks the two backends.
"""

import numpy as np


def advect_scalar(ux, uy, fx, fy, out):
    """out = -(ux*fx + uy*fy), the transport tendency -u.grad(f)."""
    np.multiply(ux, fx, out=out)
    out += uy * fy
    np.negative(out, out=out)
    return out


def advect_vector(ux, uy, dxx, dxy, dyx, dyy, outx, outy):
    """Transport tendency -u.grad(u) from the four velocity derivatives.

    dxx = d(ux)/dx, dxy = d(ux)/dy, dyx = d(uy)/dx, dyy = d(uy)/dy.
    """
    advect_scalar(ux, uy, dxx, dxy, outx)
    advect_scalar(ux, uy, dyx, dyy, outy)
    return outx, outy


def lincomb3(a, x, b, y, c, z, out):
    """out = a*x + b*y + c*z (Runge-Kutta stage combination)."""
    np.multiply(x, a, out=out)
    out += b * y
    out += c * z
    return out


def perp_force(r, ux, uy, outx, outy):
    """(outx, outy) = r * u_perp with u_perp = (-uy, ux)."""
    np.multiply(r, uy, out=outx)
    np.negative(outx, out=outx)
    np.multiply(r, ux, out=outy)
    return outx, outy


def weighted_energy(a, eps, ux, uy):
    """mean(rho * |u|^2) with rho = 1/(1 + eps*a), normalized measure."""
    return float(np.mean((ux * ux + uy * uy) / (1.0 + eps * a)))


def max_speed(ux, uy):
    """max over grid points of |u| = sqrt(ux^2 + uy^2)."""
    return float(np.sqrt(ux * ux + uy * uy).max())


def max_abs(x):
    """max over grid points of |x|."""
    return float(np.abs(x).max())
