"""Spectral and physical vector fields on a TorusGrid.

Normalization: coefficients are ``fft2(samples) / N**2`` so that
``u(x) = sum_k u_hat(k) exp(i k.x)`` and Parseval reads
``||u||^2 = |Omega| * sum_k |u_hat(k)|^2``.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from spectral_core.grid import TorusGrid


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def reflect(coeffs: np.ndarray) -> np.ndarray:
    """coeffs(-k) laid out at k, for arrays in FFT order on the last two axes."""
    return np.roll(np.flip(coeffs, axis=(-2, -1)), 1, axis=(-2, -1))


def enforce_symmetry(grid: TorusGrid, coeffs: np.ndarray) -> np.ndarray:
    """Hermitian-symmetrize, zero the mean and the unpaired Nyquist lines."""
    out = 0.5 * (coeffs + np.conj(reflect(coeffs)))
    out = out * grid.nyquist_mask
    out[..., 0, 0] = 0.0
    return out


class SpectralVectorField(BaseModel):
    """Immutable mean-zero real vector field stored as (2, N, N) complex coefficients."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TorusGrid
    coeffs: np.ndarray
    mean_zero: bool = True
    div_free: bool = False

    @model_validator(mode="after")
    def _check_shape(self) -> SpectralVectorField:
        n = self.grid.n_modes
        if self.coeffs.shape != (2, n, n):
            raise ValueError(
                f"coeffs must have shape (2, {n}, {n}), got {self.coeffs.shape}"
            )
        if self.coeffs.dtype != np.complex128:
            raise ValueError("coeffs must be complex128")
        return self

    @classmethod
    def from_coeffs(
        cls,
        grid: TorusGrid,
        coeffs: np.ndarray,
        div_free: bool = False,
        enforce: bool = True,
    ) -> SpectralVectorField:
        """Wrap a coefficient array; ``enforce=False`` trusts the caller's symmetry."""
        arr = np.array(coeffs, dtype=np.complex128, copy=True)
        if enforce:
            arr = enforce_symmetry(grid, arr)
        return cls(grid=grid, coeffs=_freeze(arr), div_free=div_free)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> SpectralVectorField:
        n = grid.n_modes
        return cls(
            grid=grid,
            coeffs=_freeze(np.zeros((2, n, n), dtype=np.complex128)),
            div_free=True,
        )

    # --- arithmetic; results keep div_free only when both operands have it ---

    def __add__(self, other: SpectralVectorField) -> SpectralVectorField:
        self.grid.require_same(other.grid)
        return SpectralVectorField.from_coeffs(
            self.grid,
            self.coeffs + other.coeffs,
            div_free=self.div_free and other.div_free,
            enforce=False,
        )

    def __sub__(self, other: SpectralVectorField) -> SpectralVectorField:
        self.grid.require_same(other.grid)
        return SpectralVectorField.from_coeffs(
            self.grid,
            self.coeffs - other.coeffs,
            div_free=self.div_free and other.div_free,
            enforce=False,
        )

    def __mul__(self, scalar: float) -> SpectralVectorField:
        return SpectralVectorField.from_coeffs(
            self.grid, self.coeffs * float(scalar), div_free=self.div_free, enforce=False
        )

    __rmul__ = __mul__

    def __neg__(self) -> SpectralVectorField:
        return self * -1.0

    def divergence_residual(self) -> float:
        """max_k |k . u_hat(k)| / ||u_hat(k)|| over nonzero coefficients."""
        g = self.grid
        dot = np.abs(g.kx * self.coeffs[0] + g.ky * self.coeffs[1])
        mag = np.sqrt(g.k2) * np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))
        nz = mag > 0
        if not np.any(nz):
            return 0.0
        return float(np.max(dot[nz] / mag[nz]))

    def symmetry_residual(self) -> float:
        return float(np.max(np.abs(self.coeffs - np.conj(reflect(self.coeffs)))))


class PhysicalVectorField(BaseModel):
    """Real (2, N, N) samples at the collocation points (x_i, y_j)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TorusGrid
    samples: np.ndarray

    @model_validator(mode="after")
    def _check_samples(self) -> PhysicalVectorField:
        n = self.grid.n_modes
        if self.samples.shape != (2, n, n):
            raise ValueError(f"samples must have shape (2, {n}, {n})")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("samples must be finite")
        return self


def coeffs_to_samples(coeffs: np.ndarray) -> np.ndarray:
    n = coeffs.shape[-1]
    return np.real(np.fft.ifft2(coeffs, axes=(-2, -1))) * n * n


def samples_to_coeffs(samples: np.ndarray) -> np.ndarray:
    n = samples.shape[-1]
    return np.fft.fft2(samples, axes=(-2, -1)) / (n * n)


def to_physical(u: SpectralVectorField) -> PhysicalVectorField:
    return PhysicalVectorField(
        grid=u.grid, samples=_freeze(coeffs_to_samples(u.coeffs))
    )


def to_spectral(p: PhysicalVectorField, div_free: bool = False) -> SpectralVectorField:
    """Forward transform; the spatial mean and Nyquist content are dropped."""
    return SpectralVectorField.from_coeffs(
        p.grid, samples_to_coeffs(p.samples), div_free=div_free
    )
