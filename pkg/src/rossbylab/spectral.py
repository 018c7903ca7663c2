"""Periodic-grid field algebra on the 2D torus.

Transforms, spectral derivatives, Leray projection, dealiasing and the
zero-mean inverse Laplacian.  Everything lives on the square torus of period
2*pi sampled on an n-by-n grid, so wavevectors are integers.

Conventions (snapshot files depend on these):

* physical arrays are indexed ``values[y, x]`` (row-major, x fastest);
* spectral arrays follow the FFT layout: integer wavenumbers
  ``0, 1, ..., n/2-1, -n/2, ..., -1`` along each axis, i.e. negative
  frequencies in the upper half of the index range;
* ``to_spectral`` normalizes by 1/n**2 so the coefficient of mode k is the
  amplitude in ``f(x) = sum_k c_k exp(i k.x)``;
* all grid L^p norms use the normalized counting measure
  ``((1/n^2) sum |f|^p)^(1/p)`` so constants are resolution independent.
  With that convention Parseval reads ``l2_norm(f)^2 = sum_k |c_k|^2``.

All operations are pure: inputs are never mutated, outputs are new arrays.
The per-grid wavenumber tables are immutable and safe to share across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the periodic grid.

    Parameters
    ----------
    n : int
        Grid points per dimension; a power of two, at least 8.
    length : float
        Domain period; fixed to 2*pi (integer wavevectors rely on it).
    dealias_fraction : float
        Fraction of the Nyquist band kept by ``dealias`` (default 2/3).
    """

    n: int
    length: float = TWO_PI
    dealias_fraction: float = 2.0 / 3.0

    def __post_init__(self) -> None:
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if abs(self.length - TWO_PI) > 1e-14:
            raise ValueError("length is fixed to 2*pi")
        if not 0.0 < self.dealias_fraction <= 1.0:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        if self.dealias_fraction * (self.n // 2) < 2.0:
            raise ValueError("dealias radius below 2: grid too coarse")

    @property
    def dealias_radius(self) -> float:
        """Largest wavenumber (per component) surviving dealiasing."""
        return self.dealias_fraction * (self.n // 2)


@dataclass
class ScalarField:
    """Real scalar samples on a grid, indexed [y, x]."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"values shape {self.values.shape} does not match n={self.grid.n}"
            )

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField:
    """Pair of scalar components sharing one grid."""

    x_comp: ScalarField
    y_comp: ScalarField

    def __post_init__(self) -> None:
        if self.x_comp.grid != self.y_comp.grid:
            raise ValueError("vector components live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.x_comp.grid

    def copy(self) -> "VectorField":
        return VectorField(self.x_comp.copy(), self.y_comp.copy())


@dataclass
class SpectralScalar:
    """Fourier coefficients of a scalar field (amplitude normalization)."""

    grid: GridSpec
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        self.coeffs = np.ascontiguousarray(self.coeffs, dtype=np.complex128)
        if self.coeffs.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"coeffs shape {self.coeffs.shape} does not match n={self.grid.n}"
            )


class _Tables:
    """Precomputed wavenumber tables for one grid (immutable).

    Derivatives and the Leray projector use a Nyquist-zeroed wavevector:
    odd multipliers have no consistent sign at k = -n/2 for real fields, so
    the symmetric choice (zero) keeps products Hermitian and the projector
    exactly divergence-annihilating on arbitrary (non-dealiased) input.
    Solver fields are dealiased and never carry those modes.
    """

    def __init__(self, n: int, dealias_fraction: float):
        freqs = np.fft.fftfreq(n, d=1.0 / n)  # integers 0..n/2-1, -n/2..-1
        self.kx = freqs.reshape(1, n)  # broadcast along y
        self.ky = freqs.reshape(n, 1)  # broadcast along x
        dfreqs = freqs.copy()
        dfreqs[n // 2] = 0.0
        dkx = dfreqs.reshape(1, n)
        dky = dfreqs.reshape(n, 1)
        self.ikx = 1j * dkx
        self.iky = 1j * dky
        self.k2 = self.kx**2 + self.ky**2
        inv_k2 = np.zeros_like(self.k2)
        inv_k2[self.k2 > 0] = 1.0 / self.k2[self.k2 > 0]
        self.inv_k2 = inv_k2
        cutoff = dealias_fraction * (n // 2)
        self.dealias_mask = (np.abs(self.kx) <= cutoff) & (np.abs(self.ky) <= cutoff)
        # Leray projector Id - k k^T/|k|^2 on the derivative wavevector;
        # modes it cannot see (k = 0 and pure-Nyquist lines) pass through.
        dk2 = dkx**2 + dky**2
        inv_dk2 = np.zeros_like(dk2)
        inv_dk2[dk2 > 0] = 1.0 / dk2[dk2 > 0]
        self.pxx = 1.0 - dkx * dkx * inv_dk2
        self.pxy = -dkx * dky * inv_dk2
        self.pyy = 1.0 - dky * dky * inv_dk2
        for arr in (self.kx, self.ky, self.ikx, self.iky, self.k2, self.inv_k2,
                    self.dealias_mask, self.pxx, self.pxy, self.pyy):
            arr.setflags(write=False)


@lru_cache(maxsize=32)
def _tables_for(n: int, dealias_fraction: float) -> _Tables:
    return _Tables(n, dealias_fraction)


def tables(grid: GridSpec) -> _Tables:
    return _tables_for(grid.n, grid.dealias_fraction)


def coordinates(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return meshgrids (X, Y) with X[j, i] = 2*pi*i/n, Y[j, i] = 2*pi*j/n."""
    x = TWO_PI * np.arange(grid.n) / grid.n
    return np.meshgrid(x, x, indexing="xy")


def _first_nonfinite(values: np.ndarray) -> tuple[int, ...] | None:
    bad = ~np.isfinite(values)
    if bad.any():
        return tuple(int(i) for i in np.argwhere(bad)[0])
    return None


def ensure_finite(values: np.ndarray, what: str = "field") -> None:
    idx = _first_nonfinite(values)
    if idx is not None:
        raise ValueError(f"{what} contains a non-finite value at index {idx}")


def ensure_same_grid(*grids: GridSpec) -> GridSpec:
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise ValueError(f"grid mismatch: {g} vs {first}")
    return first


# ---------------------------------------------------------------------------
# array-level operations (used directly by the solvers' inner loops)
# ---------------------------------------------------------------------------

def irfft2_real(hat: np.ndarray) -> np.ndarray:
    """Inverse FFT returning the real part as a C-contiguous array.

    The compiled kernels require packed float64 input; ``np.real`` of a
    complex array is a strided view, so the copy here is deliberate.
    """
    return np.ascontiguousarray(np.real(np.fft.ifft2(hat)))


def fft_coeffs(values: np.ndarray) -> np.ndarray:
    """Forward transform with the amplitude normalization 1/n^2."""
    n2 = values.shape[0] * values.shape[1]
    return np.fft.fft2(values) / n2


def ifft_values(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of ``fft_coeffs``; the real part of the synthesis."""
    n2 = coeffs.shape[0] * coeffs.shape[1]
    return np.ascontiguousarray(np.real(np.fft.ifft2(coeffs * n2)))


def grad_arrays(t: _Tables, f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    fh = np.fft.fft2(f)
    return irfft2_real(t.ikx * fh), irfft2_real(t.iky * fh)


def div_arrays(t: _Tables, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    return irfft2_real(t.ikx * np.fft.fft2(vx) + t.iky * np.fft.fft2(vy))


def curl_arrays(t: _Tables, vx: np.ndarray, vy: np.ndarray) -> np.ndarray:
    """curl u = -d(ux)/dy + d(uy)/dx."""
    return irfft2_real(t.ikx * np.fft.fft2(vy) - t.iky * np.fft.fft2(vx))


def leray_arrays(
    t: _Tables,
    vx: np.ndarray,
    vy: np.ndarray,
    *,
    dealias: bool = False,
    zero_mean: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Divergence-free part of (vx, vy); optionally dealias in the same pass.

    ``zero_mean`` additionally removes the k=0 mode.  The solvers evolve in
    the mean-free velocity gauge (the discrete stand-in for decay at
    infinity), which is what makes the projector annihilate the singular
    rotation term exactly; the public ``leray_project`` keeps the mean.
    """
    fx = np.fft.fft2(vx)
    fy = np.fft.fft2(vy)
    px = t.pxx * fx + t.pxy * fy
    py = t.pxy * fx + t.pyy * fy
    if dealias:
        px *= t.dealias_mask
        py *= t.dealias_mask
    if zero_mean:
        px[0, 0] = 0.0
        py[0, 0] = 0.0
    return irfft2_real(px), irfft2_real(py)


def dealias_array(t: _Tables, f: np.ndarray) -> np.ndarray:
    return irfft2_real(np.fft.fft2(f) * t.dealias_mask)


def inv_laplacian_array(t: _Tables, f: np.ndarray) -> np.ndarray:
    """Solve lap(g) = f with mean(g) = 0; caller guarantees mean(f) ~ 0."""
    gh = -np.fft.fft2(f) * t.inv_k2
    gh[0, 0] = 0.0
    return irfft2_real(gh)


def lp_norm(values: np.ndarray, p: float) -> float:
    """Grid L^p norm with the normalized counting measure; p=inf is the max."""
    if np.isinf(p):
        return float(np.abs(values).max())
    if p == 2.0:
        return float(np.sqrt(np.mean(values * values)))
    return float(np.mean(np.abs(values) ** p) ** (1.0 / p))


def l2_norm(values: np.ndarray) -> float:
    return lp_norm(values, 2.0)


def mean_value(values: np.ndarray) -> float:
    return float(values.mean())


# ---------------------------------------------------------------------------
# field-level operations (the public surface)
# ---------------------------------------------------------------------------

def to_spectral(f: ScalarField) -> SpectralScalar:
    """Fourier coefficients of a real field; rejects non-finite input."""
    ensure_finite(f.values, "scalar field")
    return SpectralScalar(f.grid, fft_coeffs(f.values))


def from_spectral(F: SpectralScalar) -> ScalarField:
    """Synthesize the real field from coefficients."""
    ensure_finite(F.coeffs.view(np.float64), "spectral coefficients")
    return ScalarField(F.grid, ifft_values(F.coeffs))


def gradient(f: ScalarField) -> VectorField:
    fx, fy = grad_arrays(tables(f.grid), f.values)
    return VectorField(ScalarField(f.grid, fx), ScalarField(f.grid, fy))


def divergence(u: VectorField) -> ScalarField:
    g = ensure_same_grid(u.x_comp.grid, u.y_comp.grid)
    return ScalarField(g, div_arrays(tables(g), u.x_comp.values, u.y_comp.values))


def curl2(u: VectorField) -> ScalarField:
    """Scalar curl in 2D: -d(u1)/dy + d(u2)/dx."""
    g = ensure_same_grid(u.x_comp.grid, u.y_comp.grid)
    return ScalarField(g, curl_arrays(tables(g), u.x_comp.values, u.y_comp.values))


def perp(u: VectorField) -> VectorField:
    """Rotation by pi/2: u_perp = (-u2, u1)."""
    g = ensure_same_grid(u.x_comp.grid, u.y_comp.grid)
    return VectorField(
        ScalarField(g, -u.y_comp.values.copy()),
        ScalarField(g, u.x_comp.values.copy()),
    )


def leray_project(u: VectorField) -> VectorField:
    """Orthogonal projection onto divergence-free fields (k=0 untouched)."""
    g = ensure_same_grid(u.x_comp.grid, u.y_comp.grid)
    px, py = leray_arrays(tables(g), u.x_comp.values, u.y_comp.values)
    return VectorField(ScalarField(g, px), ScalarField(g, py))


def dealias(f: ScalarField) -> ScalarField:
    """Zero every mode with max(|k1|, |k2|) above the dealias radius."""
    return ScalarField(f.grid, dealias_array(tables(f.grid), f.values))


def inverse_laplacian_zero_mean(f: ScalarField, mean_tol: float = 1e-10) -> ScalarField:
    """Solve lap(g) = f on the torus; requires mean(f) ~ 0 for solvability."""
    m = mean_value(f.values)
    if abs(m) > mean_tol:
        raise ValueError(f"inverse Laplacian needs zero-mean input, got mean {m:.3e}")
    return ScalarField(f.grid, inv_laplacian_array(tables(f.grid), f.values))


def stream_to_velocity(psi: ScalarField) -> VectorField:
    """u = grad_perp(psi) = (-d(psi)/dy, d(psi)/dx); divergence-free."""
    fx, fy = grad_arrays(tables(psi.grid), psi.values)
    return VectorField(ScalarField(psi.grid, -fy), ScalarField(psi.grid, fx))


def sobolev_norm(f: ScalarField, s: float) -> float:
    """Direct H^s norm: (sum_k (1+|k|^2)^s |c_k|^2)^(1/2)."""
    t = tables(f.grid)
    c = fft_coeffs(f.values)
    return float(np.sqrt(np.sum((1.0 + t.k2) ** s * np.abs(c) ** 2)))


def vector_sobolev_norm(u: VectorField, s: float) -> float:
    return float(np.hypot(sobolev_norm(u.x_comp, s), sobolev_norm(u.y_comp, s)))
