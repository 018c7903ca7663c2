"""Discrete Littlewood-Paley decomposition and Besov-norm diagnostics.

The low-pass profile chi is a radial C^3 bump (7th-order smoothstep):
chi(r) = 1 for r <= 0.7, 0 for r >= 1.3, monotone in between, chi(1) = 1/2.
Block multipliers are built so the telescoping identities are exact on the
lattice:

    S_j   = chi(2^-j |xi|)                 (low frequency cut-off, j >= 0)
    D_-1  = chi(|xi|) = S_0
    D_j   = chi(2^-(j+1) |xi|) - chi(2^-j |xi|)   for j >= 0

hence S_j = sum_{k <= j-1} D_k and sum_{j <= J} D_j = S_{J+1} hold to
round-off, and the family is a partition of unity on every resolved mode
once 0.7 * 2^(j_max+1) covers the dealiased square.  Block j is supported
in the annulus {0.7 * 2^j <= |xi| <= 2.6 * 2^j} (a ball for j = -1), so a
mode of modulus 2^j is shared half-and-half between blocks j-1 and j.  The
transition straddles r = 1 on purpose: with chi flat out to r = 1 the
telescoped blocks would own each dyadic scale one level too low and the
Besov/Sobolev equivalence constants would leave their bands at s = 3.  Any
admissible profile changes Besov norms only by equivalent constants, so the
diagnostics gate on ratio bands rather than exact values.

Grid L^p norms use the normalized counting measure, as everywhere in this
package.  LPFamily instances are immutable after construction and safe to
share across concurrent diagnostics.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import floor, log2

import numpy as np

from .spectral import (
    GridSpec,
    ScalarField,
    VectorField,
    dealias_array,
    ensure_same_grid,
    fft_coeffs,
    grad_arrays,
    ifft_values,
    lp_norm,
    tables,
)


def smoothstep7(x: np.ndarray) -> np.ndarray:
    """C^3 polynomial step: 0 at x<=0, 1 at x>=1, 35x^4-84x^5+70x^6-20x^7."""
    x = np.clip(x, 0.0, 1.0)
    return x**4 * (35.0 + x * (-84.0 + x * (70.0 - 20.0 * x)))


CHI_FLAT = 0.7    # chi == 1 for r <= CHI_FLAT
CHI_ZERO = 1.3    # chi == 0 for r >= CHI_ZERO


def chi_profile(r: np.ndarray) -> np.ndarray:
    """Radial low-pass bump: 1 on r<=0.7, 0 on r>=1.3, chi(1) = 1/2."""
    r = np.asarray(r, dtype=np.float64)
    return smoothstep7((CHI_ZERO - r) / (CHI_ZERO - CHI_FLAT))


def phi_profile(r: np.ndarray) -> np.ndarray:
    """Annulus profile chi(r/2) - chi(r), supported in {0.7 <= r <= 2.6}."""
    r = np.asarray(r, dtype=np.float64)
    return chi_profile(r / 2.0) - chi_profile(r)


@dataclass(frozen=True)
class BesovIndex:
    """Besov space indices (s, p, r)."""

    s: float
    p: float
    r: float

    def __post_init__(self) -> None:
        if not (1.0 <= self.p) or not (1.0 <= self.r):
            raise ValueError("p and r must lie in [1, inf]")

    def is_lipschitz_admissible(self) -> bool:
        """Whether B^s_{p,r}(R^2) embeds in W^{1,inf}: s > 1 + 2/p, or
        s = 1 + 2/p with r = 1."""
        crit = 1.0 + 2.0 / self.p
        return self.s > crit or (self.s == crit and self.r == 1.0)


@dataclass(frozen=True)
class LPFamily:
    """Littlewood-Paley block multipliers sampled on one grid's lattice."""

    grid: GridSpec
    j_min: int
    j_max: int
    kmod: np.ndarray = field(repr=False)
    chi: np.ndarray = field(repr=False)          # chi(|xi|), the j=-1 block
    blocks: tuple = field(repr=False)            # multipliers for j=-1..j_max

    def block(self, j: int) -> np.ndarray:
        if not self.j_min <= j <= self.j_max:
            raise ValueError(f"block index {j} outside [{self.j_min}, {self.j_max}]")
        return self.blocks[j - self.j_min]

    def low_multiplier(self, j: int) -> np.ndarray:
        if j < 0:
            raise ValueError(f"low cut-off index must be >= 0, got {j}")
        return chi_profile(self.kmod / float(2**j))


@lru_cache(maxsize=32)
def _family_for(n: int, dealias_fraction: float) -> LPFamily:
    grid = GridSpec(n, dealias_fraction=dealias_fraction)
    t = tables(grid)
    kmod = np.sqrt(t.k2)
    radius = grid.dealias_radius
    j_max = int(floor(log2(radius)))
    # the telescoped sum equals chi(2^-(j_max+1)|xi|); extend until the corner
    # of the dealiased square sits inside its flat region
    while CHI_FLAT * 2 ** (j_max + 1) < np.sqrt(2.0) * radius:
        j_max += 1
    blocks = [chi_profile(kmod)]
    for j in range(0, j_max + 1):
        blocks.append(chi_profile(kmod / 2 ** (j + 1)) - chi_profile(kmod / 2**j))
    for b in blocks:
        b.setflags(write=False)
    kmod.setflags(write=False)
    return LPFamily(grid, -1, j_max, kmod, blocks[0], tuple(blocks))


def lp_family(grid: GridSpec) -> LPFamily:
    return _family_for(grid.n, grid.dealias_fraction)


def _apply_multiplier(values: np.ndarray, mult: np.ndarray) -> np.ndarray:
    return ifft_values(fft_coeffs(values) * mult)


def dyadic_block(f: ScalarField, j: int) -> ScalarField:
    """Apply the j-th Littlewood-Paley block multiplier."""
    fam = lp_family(f.grid)
    return ScalarField(f.grid, _apply_multiplier(f.values, fam.block(j)))


def low_cutoff(f: ScalarField, j: int) -> ScalarField:
    """Apply the low frequency cut-off S_j = chi(2^-j .); requires j >= 0."""
    fam = lp_family(f.grid)
    return ScalarField(f.grid, _apply_multiplier(f.values, fam.low_multiplier(j)))


def block_lp_norms(f: ScalarField, p: float) -> np.ndarray:
    """L^p norms of all blocks, indexed j = -1 .. j_max."""
    fam = lp_family(f.grid)
    coeffs = fft_coeffs(f.values)
    return np.array(
        [lp_norm(ifft_values(coeffs * fam.block(j)), p)
         for j in range(fam.j_min, fam.j_max + 1)]
    )


def besov_norm(f: ScalarField, idx: BesovIndex) -> float:
    """Norm of B^s_{p,r}: the l^r sum of 2^{js} ||D_j f||_{L^p}."""
    fam = lp_family(f.grid)
    norms = block_lp_norms(f, idx.p)
    js = np.arange(fam.j_min, fam.j_max + 1, dtype=np.float64)
    weighted = 2.0 ** (js * idx.s) * norms
    if np.isinf(idx.r):
        return float(weighted.max())
    return float(np.sum(weighted**idx.r) ** (1.0 / idx.r))


def besov_norm_vector(u: VectorField, idx: BesovIndex) -> float:
    """Besov norm of a vector field: sum of the component norms."""
    return besov_norm(u.x_comp, idx) + besov_norm(u.y_comp, idx)


def bony_decompose(
    u: ScalarField, v: ScalarField
) -> tuple[ScalarField, ScalarField, ScalarField]:
    """Split the product u*v into (T_u v, T_v u, R(u, v)).

    T_u v = sum_j S_{j-1}u . D_j v and the remainder gathers the pairs with
    |j - k| <= 1.  Inputs and each returned part are dealiased, so the three
    parts sum to the dealiased product exactly (up to round-off).
    """
    grid = ensure_same_grid(u.grid, v.grid)
    fam = lp_family(grid)
    t = tables(grid)
    uc = fft_coeffs(dealias_array(t, u.values))
    vc = fft_coeffs(dealias_array(t, v.values))
    jmin, jmax = fam.j_min, fam.j_max
    u_blocks = [ifft_values(uc * fam.block(j)) for j in range(jmin, jmax + 1)]
    v_blocks = [ifft_values(vc * fam.block(j)) for j in range(jmin, jmax + 1)]

    # running S_{j-1}u = sum_{k <= j-2} D_k u; starts empty for j = -1, 0
    para_uv = np.zeros_like(u.values)
    para_vu = np.zeros_like(u.values)
    low_u = np.zeros_like(u.values)
    low_v = np.zeros_like(u.values)
    for j in range(jmin, jmax + 1):
        if j - 2 >= jmin:
            low_u = low_u + u_blocks[j - 2 - jmin]
            low_v = low_v + v_blocks[j - 2 - jmin]
        para_uv += low_u * v_blocks[j - jmin]
        para_vu += low_v * u_blocks[j - jmin]
    remainder = np.zeros_like(u.values)
    for j in range(jmin, jmax + 1):
        for k in range(max(jmin, j - 1), min(jmax, j + 1) + 1):
            remainder += u_blocks[j - jmin] * v_blocks[k - jmin]
    return (
        ScalarField(grid, dealias_array(t, para_uv)),
        ScalarField(grid, dealias_array(t, para_vu)),
        ScalarField(grid, dealias_array(t, remainder)),
    )


@dataclass(frozen=True)
class BernsteinReport:
    """Measured Bernstein ratios for one block-localized field."""

    j: int
    k_deriv: int
    p: float
    q: float
    derivative_ratio: float   # ||grad^k f||_p / (2^{jk} ||f||_p)
    embedding_ratio: float    # ||f||_q / (2^{2j(1/p - 1/q)} ||f||_p)
    budget: float
    within_budget: bool


def bernstein_check(
    f: ScalarField,
    j: int,
    k_deriv: int = 1,
    p: float = 2.0,
    q: float = 2.0,
    budget: float = 4.0,
) -> BernsteinReport:
    """Measure the Bernstein-inequality ratios on a block-localized field.

    The caller localizes first (apply ``dyadic_block``); fields whose
    spectral energy lies outside block j's annulus by more than 1e-8 of the
    total, and the zero field, are rejected.
    """
    if q < p:
        raise ValueError("Bernstein embedding needs q >= p")
    if k_deriv not in (0, 1):
        raise ValueError("k_deriv must be 0 or 1")
    fam = lp_family(f.grid)
    support = fam.block(j) > 0.0
    coeffs = fft_coeffs(f.values)
    total = float(np.sum(np.abs(coeffs) ** 2))
    if total == 0.0:
        raise ValueError("zero field is not block-localized")
    outside = float(np.sum(np.abs(coeffs[~support]) ** 2))
    if outside > 1e-8 * total:
        raise ValueError(
            f"field not localized in block {j}: {outside / total:.3e} of the "
            "energy lies outside the annulus"
        )
    base = lp_norm(f.values, p)
    if k_deriv == 0:
        deriv_ratio = 1.0
    else:
        fx, fy = grad_arrays(tables(f.grid), f.values)
        deriv_ratio = lp_norm(np.hypot(fx, fy), p) / (2.0**j * base)
    inv_p = 0.0 if np.isinf(p) else 1.0 / p
    inv_q = 0.0 if np.isinf(q) else 1.0 / q
    emb_ratio = lp_norm(f.values, q) / (2.0 ** (2 * j * (inv_p - inv_q)) * base)
    within = max(deriv_ratio, 1.0 / deriv_ratio, emb_ratio) <= budget
    return BernsteinReport(j, k_deriv, p, q, deriv_ratio, emb_ratio, budget, within)
