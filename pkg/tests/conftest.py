import numpy as np
import pytest

from rossbylab.spectral import GridSpec, ScalarField, VectorField, coordinates


@pytest.fixture(scope="session")
def grid32():
    return GridSpec(32)


@pytest.fixture(scope="session")
def grid64():
    return GridSpec(64)


def random_scalar(grid, seed=0):
    rng = np.random.default_rng(seed)
    return ScalarField(grid, rng.standard_normal((grid.n, grid.n)))


def random_divfree(grid, seed=0, modes=6):
    """Divergence-free field from a random band-limited stream function."""
    rng = np.random.default_rng(seed)
    X, Y = coordinates(grid)
    psi = np.zeros_like(X)
    for _ in range(modes):
        kx, ky = rng.integers(-5, 6, size=2)
        psi += rng.standard_normal() * np.cos(kx * X + ky * Y + rng.uniform(0, 7))
    psi_hat = np.fft.fft2(psi)
    freqs = np.fft.fftfreq(grid.n, d=1.0 / grid.n)
    ux = np.real(np.fft.ifft2(-1j * freqs.reshape(-1, 1) * psi_hat))
    uy = np.real(np.fft.ifft2(1j * freqs.reshape(1, -1) * psi_hat))
    return VectorField(ScalarField(grid, ux), ScalarField(grid, uy))
