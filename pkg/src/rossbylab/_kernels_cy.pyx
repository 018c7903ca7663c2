# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise hot kernels.

Single fused pass per operation instead of one NumPy temporary per factor.
Semantics mirror ``_kernels_np`` (checked by tests/test_kernels.py).
"""

from libc.math cimport fabs, sqrt


def advect_scalar(double[:, ::1] ux, double[:, ::1] uy,
                  double[:, ::1] fx, double[:, ::1] fy,
                  double[:, ::1] out):
    """out = -(ux*fx + uy*fy), the transport tendency -u.grad(f)."""
    cdef Py_ssize_t i, j, n0 = ux.shape[0], n1 = ux.shape[1]
    for i in range(n0):
        for j in range(n1):
            out[i, j] = -(ux[i, j] * fx[i, j] + uy[i, j] * fy[i, j])
    return out.base if out.base is not None else out


def advect_vector(double[:, ::1] ux, double[:, ::1] uy,
                  double[:, ::1] dxx, double[:, ::1] dxy,
                  double[:, ::1] dyx, double[:, ::1] dyy,
                  double[:, ::1] outx, double[:, ::1] outy):
    """Transport tendency -u.grad(u) from the four velocity derivatives."""
    cdef Py_ssize_t i, j, n0 = ux.shape[0], n1 = ux.shape[1]
    cdef double a, b
    for i in range(n0):
        for j in range(n1):
            a = ux[i, j]
            b = uy[i, j]
            outx[i, j] = -(a * dxx[i, j] + b * dxy[i, j])
            outy[i, j] = -(a * dyx[i, j] + b * dyy[i, j])
    return (outx.base if outx.base is not None else outx,
            outy.base if outy.base is not None else outy)


def lincomb3(double a, double[:, ::1] x, double b, double[:, ::1] y,
             double c, double[:, ::1] z, double[:, ::1] out):
    """out = a*x + b*y + c*z (Runge-Kutta stage combination)."""
    cdef Py_ssize_t i, j, n0 = x.shape[0], n1 = x.shape[1]
    for i in range(n0):
        for j in range(n1):
            out[i, j] = a * x[i, j] + b * y[i, j] + c * z[i, j]
    return out.base if out.base is not None else out


def perp_force(double[:, ::1] r, double[:, ::1] ux, double[:, ::1] uy,
               double[:, ::1] outx, double[:, ::1] outy):
    """(outx, outy) = r * u_perp with u_perp = (-uy, ux)."""
    cdef Py_ssize_t i, j, n0 = r.shape[0], n1 = r.shape[1]
    for i in range(n0):
        for j in range(n1):
            outx[i, j] = -r[i, j] * uy[i, j]
            outy[i, j] = r[i, j] * ux[i, j]
    return (outx.base if outx.base is not None else outx,
            outy.base if outy.base is not None else outy)


def weighted_energy(double[:, ::1] a, double eps,
                    double[:, ::1] ux, double[:, ::1] uy):
    """mean(rho * |u|^2) with rho = 1/(1 + eps*a), normalized measure."""
    cdef Py_ssize_t i, j, n0 = a.shape[0], n1 = a.shape[1]
    cdef double acc = 0.0
    for i in range(n0):
        for j in range(n1):
            acc += (ux[i, j] * ux[i, j] + uy[i, j] * uy[i, j]) / (1.0 + eps * a[i, j])
    return acc / (n0 * n1)


def max_speed(double[:, ::1] ux, double[:, ::1] uy):
    """max over grid points of |u| = sqrt(ux^2 + uy^2)."""
    cdef Py_ssize_t i, j, n0 = ux.shape[0], n1 = ux.shape[1]
    cdef double best = 0.0, s
    for i in range(n0):
        for j in range(n1):
            s = ux[i, j] * ux[i, j] + uy[i, j] * uy[i, j]
            if s > best:
                best = s
    return sqrt(best)


def max_abs(double[:, ::1] x):
    """max over grid points of |x|."""
    cdef Py_ssize_t i, j, n0 = x.shape[0], n1 = x.shape[1]
    cdef double best = 0.0, s
    for i in range(n0):
        for j in range(n1):
            s = fabs(x[i, j])
            if s > best:
                best = s
    return best
