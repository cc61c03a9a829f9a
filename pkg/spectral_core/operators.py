"""Leray projector, Stokes operator, the dealiased bilinear term and norms.

Array kernels (``*_coeffs``) work on raw coefficient arrays with any number of
leading batch axes ahead of the (2, N, N) block; the time steppers call them
directly. The field-level wrappers below them are the public API.
"""

from __future__ import annotations

import numpy as np
from pydantic import BaseModel

from spectral_core.fields import (
    SpectralVectorField,
    coeffs_to_samples,
    samples_to_coeffs,
    to_physical,
)
from spectral_core.grid import TorusGrid


class FieldNorms(BaseModel):
    l2: float
    h1: float
    h2: float


# --- array kernels ---


def project_coeffs(grid: TorusGrid, c: np.ndarray) -> np.ndarray:
    kx, ky = grid.kx, grid.ky
    div = (kx * c[..., 0, :, :] + ky * c[..., 1, :, :]) * grid.inv_k2
    out = np.empty_like(c)
    out[..., 0, :, :] = c[..., 0, :, :] - kx * div
    out[..., 1, :, :] = c[..., 1, :, :] - ky * div
    return out


def advection_coeffs(
    grid: TorusGrid, a: np.ndarray, b: np.ndarray, dealias: bool = True
) -> np.ndarray:
    """P_sigma[(a . grad) b] with 2/3-rule truncation of inputs and output."""
    mask = grid.dealias_mask if dealias else grid.nyquist_mask
    a = a * mask
    b = b * mask
    ua = coeffs_to_samples(a)
    dbx = coeffs_to_samples(1j * grid.kx * b)
    dby = coeffs_to_samples(1j * grid.ky * b)
    adv = ua[..., 0:1, :, :] * dbx + ua[..., 1:2, :, :] * dby
    out = samples_to_coeffs(adv) * mask
    out[..., 0, 0] = 0.0
    return project_coeffs(grid, out)


def energy_density(grid: TorusGrid, c: np.ndarray, power: int = 0) -> np.ndarray:
    """|Omega| * sum_k |k|^(2 power) |c(k)|^2 over the trailing (2, N, N) block."""
    weight = grid.k2**power if power else 1.0
    return grid.area * np.sum(weight * np.abs(c) ** 2, axis=(-3, -2, -1))


# --- field API ---


def leray_project(u: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField.from_coeffs(
        u.grid, project_coeffs(u.grid, u.coeffs), div_free=True, enforce=False
    )


def stokes_apply(u: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField.from_coeffs(
        u.grid, u.grid.k2 * u.coeffs, div_free=u.div_free, enforce=False
    )


def dealias(u: SpectralVectorField) -> SpectralVectorField:
    return SpectralVectorField.from_coeffs(
        u.grid, u.coeffs * u.grid.dealias_mask, div_free=u.div_free, enforce=False
    )


def bilinear_B(u: SpectralVectorField, v: SpectralVectorField) -> SpectralVectorField:
    u.grid.require_same(v.grid)
    return SpectralVectorField.from_coeffs(
        u.grid, advection_coeffs(u.grid, u.coeffs, v.coeffs), div_free=True
    )


def inner_product(u: SpectralVectorField, v: SpectralVectorField) -> float:
    """L^2 inner product (u, v) = |Omega| Re sum_k u_hat . conj(v_hat)."""
    u.grid.require_same(v.grid)
    return float(u.grid.area * np.real(np.sum(u.coeffs * np.conj(v.coeffs))))


def norms(u: SpectralVectorField) -> FieldNorms:
    g = u.grid
    return FieldNorms(
        l2=float(np.sqrt(energy_density(g, u.coeffs))),
        h1=float(np.sqrt(energy_density(g, u.coeffs, power=1))),
        h2=float(np.sqrt(energy_density(g, u.coeffs, power=2))),
    )


def l4_norm(u: SpectralVectorField) -> float:
    """(int |u|^4)^(1/4) on the collocation grid of the dealiased field."""
    samples = to_physical(dealias(u)).samples
    mag2 = samples[0] ** 2 + samples[1] ** 2
    return float((np.sum(mag2**2) * u.grid.dx**2) ** 0.25)


def ladyzhenskaya_ratio(u: SpectralVectorField) -> float:
    n = norms(u)
    if n.l2 == 0.0:
        return 0.0
    return l4_norm(u) / np.sqrt(n.l2 * n.h1)
