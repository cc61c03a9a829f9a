"""Periodic square grids and their wavenumber lattices."""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field, field_validator


class GridMismatchError(ValueError):
    """Two objects that must share a grid do not."""


class TorusGrid(BaseModel):
    """Uniform N x N collocation grid on the torus [0, L]^2.

    Wavenumber arrays are laid out in FFT order (index i holds m = i for
    i < N/2 and m = i - N otherwise), so every (2, N, N) coefficient array
    in the package uses the same ordering as ``numpy.fft.fft2``.
    """

    model_config = ConfigDict(frozen=True)

    n_modes: int
    period_L: float
    dealias_fraction: float = 2.0 / 3.0

    @field_validator("n_modes")
    @classmethod
    def _check_n_modes(cls, v: int) -> int:
        if v % 2 != 0:
            raise ValueError("n_modes must be even")
        if v < 8:
            raise ValueError("n_modes must be at least 8")
        return v

    @field_validator("period_L")
    @classmethod
    def _check_period(cls, v: float) -> float:
        if not (v > 0 and math.isfinite(v)):
            raise ValueError("period_L must be positive and finite")
        return v

    @field_validator("dealias_fraction")
    @classmethod
    def _check_fraction(cls, v: float) -> float:
        if not 0 < v <= 1:
            raise ValueError("dealias_fraction must lie in (0, 1]")
        return v

    @computed_field
    @property
    def kappa0(self) -> float:
        return 2.0 * math.pi / self.period_L

    @property
    def area(self) -> float:
        return self.period_L**2

    @property
    def dx(self) -> float:
        return self.period_L / self.n_modes

    @property
    def dealias_cutoff(self) -> int:
        """Largest |m_i| kept by the dealiasing mask."""
        return int(math.floor(self.dealias_fraction * self.n_modes / 2 + 1e-12))

    def matches(self, other: TorusGrid) -> bool:
        return (
            self.n_modes == other.n_modes
            and self.period_L == other.period_L
            and self.dealias_fraction == other.dealias_fraction
        )

    def require_same(self, other: TorusGrid, what: str = "field") -> None:
        if not self.matches(other):
            raise GridMismatchError(
                f"{what} lives on grid (N={other.n_modes}, L={other.period_L}), "
                f"expected (N={self.n_modes}, L={self.period_L})"
            )

    # --- lattice arrays (computed once per grid instance) ---

    @cached_property
    def mode_index(self) -> np.ndarray:
        """Integer wavenumbers m in FFT order."""
        return np.fft.fftfreq(self.n_modes, d=1.0 / self.n_modes).round().astype(int)

    @cached_property
    def mx(self) -> np.ndarray:
        return np.broadcast_to(self.mode_index[:, None], (self.n_modes,) * 2).copy()

    @cached_property
    def my(self) -> np.ndarray:
        return np.broadcast_to(self.mode_index[None, :], (self.n_modes,) * 2).copy()

    @cached_property
    def kx(self) -> np.ndarray:
        return self.kappa0 * self.mx

    @cached_property
    def ky(self) -> np.ndarray:
        return self.kappa0 * self.my

    @cached_property
    def k2(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def inv_k2(self) -> np.ndarray:
        out = np.zeros_like(self.k2)
        nz = self.k2 > 0
        out[nz] = 1.0 / self.k2[nz]
        return out

    @cached_property
    def mode_radius(self) -> np.ndarray:
        """|k| / kappa0 on the lattice."""
        return np.sqrt(self.mx**2 + self.my**2)

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True where neither component index sits on the unpaired -N/2 line."""
        half = self.n_modes // 2
        return (self.mx != -half) & (self.my != -half)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        cut = self.dealias_cutoff
        return (np.abs(self.mx) <= cut) & (np.abs(self.my) <= cut)

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Physical sample positions (x_i, y_j) as two N x N arrays, ij-indexed."""
        x = np.arange(self.n_modes) * self.dx
        return np.meshgrid(x, x, indexing="ij")


def make_grid(
    n_modes: int, period_L: float, dealias_fraction: float = 2.0 / 3.0
) -> TorusGrid:
    return TorusGrid(
        n_modes=n_modes, period_L=period_L, dealias_fraction=dealias_fraction
    )
