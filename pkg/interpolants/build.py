"""Realized observation operators J and their application to fields.

Cell-based operators never touch physical space: the observed data of a
band-limited field (cell averages or exact nodal values) are folded sums of
its Fourier coefficients, and J maps them back through the coefficients of
one mollified, mean-free cell indicator translated over the tiling.
"""

from __future__ import annotations

import numpy as np
from loguru import logger as log
from pydantic import BaseModel, ConfigDict
from scipy.special import j0

from interpolants.models import InterpolantSpec, ModalKind, NodalKind
from spectral_core.fields import SpectralVectorField
from spectral_core.grid import TorusGrid
from spectral_core.random_fields import EnergySpectrum, random_divfree_field

_QUADRATURE_NODES = 64


def _segment_integral(k: np.ndarray, h: float) -> np.ndarray:
    """int_0^h exp(i k x) dx, elementwise."""
    out = np.full(k.shape, h, dtype=np.complex128)
    nz = k != 0
    out[nz] = (np.exp(1j * k[nz] * h) - 1.0) / (1j * k[nz])
    return out


def mollifier_symbol(grid: TorusGrid, eps: float) -> np.ndarray:
    """Fourier symbol of the unit-mass bump exp(-1/(1-(r/eps)^2)) of radius eps.

    The radial profile is tabulated on Gauss-Legendre nodes of [0, eps] and
    transformed with the order-zero Hankel transform, so it stays accurate
    when eps is below the grid spacing.
    """
    if eps == 0:
        return np.ones(grid.k2.shape)
    x, w = np.polynomial.legendre.leggauss(_QUADRATURE_NODES)
    r = 0.5 * eps * (x + 1.0)
    w = 0.5 * eps * w
    profile = np.exp(-1.0 / (1.0 - (r / eps) ** 2))
    weights = w * profile * r
    kmag = np.sqrt(grid.k2)
    return (j0(kmag[..., None] * r) @ weights) / weights.sum()


class InterpolantOp(BaseModel):
    """Realized J: a mode mask (modal) or sample weights plus a cell profile."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    spec: InterpolantSpec
    mode_mask: np.ndarray | None = None
    sample_weight: np.ndarray | None = None
    cell_profile: np.ndarray | None = None

    @property
    def grid(self) -> TorusGrid:
        return self.spec.grid

    @property
    def h(self) -> float:
        return self.spec.h

    @property
    def is_modal(self) -> bool:
        return self.mode_mask is not None

    def apply_coeffs(self, c: np.ndarray) -> np.ndarray:
        """J on raw (..., 2, N, N) coefficient arrays (output not symmetrized)."""
        if self.mode_mask is not None:
            return c * self.mode_mask
        n = self.grid.n_modes
        nc = self.spec.n_cells
        b = n // nc
        weighted = c * self.sample_weight
        folded = weighted.reshape(c.shape[:-2] + (b, nc, b, nc)).sum(axis=(-4, -2))
        return self.cell_profile * (nc * nc) * np.tile(folded, (b, b))


def build_interpolant(spec: InterpolantSpec) -> InterpolantOp:
    grid = spec.grid
    kind = spec.kind
    if isinstance(kind, ModalKind):
        mask = (grid.mode_radius <= kind.n_obs_modes) & grid.nyquist_mask
        mask[0, 0] = False
        log.debug(f"Modal interpolant: {int(mask.sum())} observed wavevectors")
        return InterpolantOp(spec=spec, mode_mask=mask.astype(float))

    h, eps = spec.h, spec.eps
    if 0 < eps < 2 * grid.dx:
        log.debug(f"Mollifier radius {eps:.3g} is below two grid spacings")
    seg_x = _segment_integral(grid.kx, h)
    seg_y = _segment_integral(grid.ky, h)
    profile = mollifier_symbol(grid, eps) * np.conj(seg_x * seg_y) / grid.area
    profile[0, 0] = 0.0

    if isinstance(kind, NodalKind):
        ox, oy = kind.node_offset
        weight = np.exp(1j * (grid.kx * ox + grid.ky * oy) * h)
    else:
        weight = seg_x * seg_y / h**2

    return InterpolantOp(spec=spec, sample_weight=weight, cell_profile=profile)


def apply_J(op: InterpolantOp, u: SpectralVectorField) -> SpectralVectorField:
    op.grid.require_same(u.grid, "observed field")
    return SpectralVectorField.from_coeffs(
        u.grid, op.apply_coeffs(u.coeffs), div_free=False
    )


def observed_data(op: InterpolantOp, u: SpectralVectorField) -> np.ndarray:
    """The raw measurements: (2, L/h, L/h) cell values, or observed coefficients for modal J."""
    op.grid.require_same(u.grid, "observed field")
    if op.mode_mask is not None:
        return u.coeffs[:, op.mode_mask > 0]
    n = op.grid.n_modes
    nc = op.spec.n_cells
    b = n // nc
    weighted = u.coeffs * op.sample_weight
    folded = weighted.reshape((2, b, nc, b, nc)).sum(axis=(1, 3))
    return np.real(np.fft.ifft2(folded, axes=(-2, -1))) * nc * nc


def operator_rank(op: InterpolantOp) -> int:
    """Declared rank of J on vector fields."""
    if op.mode_mask is not None:
        return 2 * int(op.mode_mask.sum())
    return min(2 * op.spec.n_cells**2, 2 * (op.grid.n_modes**2 - 1))


def spanned_dimension(
    op: InterpolantOp, n_fields: int = 200, seed: int = 0, rtol: float = 1e-8
) -> int:
    """Numerical rank of J applied to seeded random fields."""
    spectrum = EnergySpectrum(slope=2.0)
    rows = []
    for i in range(n_fields):
        out = apply_J(op, random_divfree_field(op.grid, spectrum, seed + i)).coeffs
        rows.append(np.concatenate([out.real.ravel(), out.imag.ravel()]))
    sv = np.linalg.svd(np.asarray(rows), compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))
