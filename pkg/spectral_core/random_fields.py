"""Seeded test fields with prescribed shell-energy laws, plus analytic fields."""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from spectral_core.fields import (
    PhysicalVectorField,
    SpectralVectorField,
    to_spectral,
)
from spectral_core.grid import TorusGrid


class EnergySpectrum(BaseModel):
    """Shell energy law E(s) = amplitude * s**(-slope) on k_min <= s <= k_max.

    Shells are s = round(|k| / kappa0); ``k_max=None`` means the dealiasing
    cutoff of the grid. Energies use the ||u||^2 convention (no factor 1/2).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    amplitude: float = 1.0
    slope: float = 3.0
    k_min: int = 1
    k_max: int | None = None

    @field_validator("amplitude")
    @classmethod
    def _non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("amplitude must be non-negative")
        return v

    @field_validator("k_min")
    @classmethod
    def _k_min_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("k_min must be at least 1")
        return v

    def shell_range(self, grid: TorusGrid) -> tuple[int, int]:
        top = grid.dealias_cutoff if self.k_max is None else self.k_max
        return self.k_min, min(top, grid.dealias_cutoff)

    def target(self, grid: TorusGrid) -> np.ndarray:
        """Requested energy per shell index 0..dealias_cutoff."""
        lo, hi = self.shell_range(grid)
        out = np.zeros(grid.dealias_cutoff + 1)
        s = np.arange(lo, hi + 1)
        out[lo : hi + 1] = self.amplitude * s.astype(float) ** (-self.slope)
        return out


def shell_index(grid: TorusGrid) -> np.ndarray:
    return np.rint(grid.mode_radius).astype(int)


def shell_energies(u: SpectralVectorField) -> np.ndarray:
    """|Omega| sum |u_hat|^2 per shell, indexed 0..max shell on the lattice."""
    g = u.grid
    dens = g.area * np.sum(np.abs(u.coeffs) ** 2, axis=0)
    return np.bincount(shell_index(g).ravel(), weights=dens.ravel())


def _rescale_shells(
    grid: TorusGrid, coeffs: np.ndarray, target: np.ndarray
) -> np.ndarray:
    shells = shell_index(grid)
    inside = shells < target.size
    dens = grid.area * np.sum(np.abs(coeffs) ** 2, axis=0)
    current = np.bincount(
        shells[inside].ravel(), weights=dens[inside].ravel(), minlength=target.size
    )
    factor = np.zeros(target.size)
    ok = current > 0
    factor[ok] = np.sqrt(target[ok] / current[ok])
    scale = np.zeros(shells.shape)
    scale[inside] = factor[shells[inside]]
    return coeffs * scale


def random_divfree_field(
    grid: TorusGrid, energy_spectrum: EnergySpectrum, seed: int
) -> SpectralVectorField:
    """Curl of a seeded white-noise stream function, rescaled shell by shell."""
    rng = np.random.default_rng(seed)
    psi_hat = np.fft.fft2(rng.standard_normal((grid.n_modes, grid.n_modes)))
    coeffs = np.stack([1j * grid.ky * psi_hat, -1j * grid.kx * psi_hat])
    coeffs = coeffs * (grid.dealias_mask & grid.nyquist_mask)
    coeffs[:, 0, 0] = 0.0
    coeffs = _rescale_shells(grid, coeffs, energy_spectrum.target(grid))
    return SpectralVectorField.from_coeffs(grid, coeffs, div_free=True, enforce=False)


def random_scalar_coeffs(
    grid: TorusGrid, slope: float, seed: int, with_mean: bool = True
) -> np.ndarray:
    """Seeded real band-limited scalar with |coeff| ~ (1+|k|)**(-slope)."""
    rng = np.random.default_rng(seed)
    c = np.fft.fft2(rng.standard_normal((grid.n_modes, grid.n_modes))) / grid.n_modes**2
    c = c * (grid.dealias_mask & grid.nyquist_mask)
    c = c * (1.0 + grid.mode_radius) ** (-slope)
    if not with_mean:
        c[0, 0] = 0.0
    return c


def taylor_green(grid: TorusGrid, amplitude: float = 1.0) -> SpectralVectorField:
    """(A sin(k x) cos(k y), -A cos(k x) sin(k y)) with k = kappa0."""
    x, y = grid.coords
    k = grid.kappa0
    samples = amplitude * np.stack(
        [np.sin(k * x) * np.cos(k * y), -np.cos(k * x) * np.sin(k * y)]
    )
    return to_spectral(PhysicalVectorField(grid=grid, samples=samples), div_free=True)
