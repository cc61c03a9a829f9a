"""Torus grids, spectral fields and the operators of the 2D NSE functional setting."""

from spectral_core.fields import (
    PhysicalVectorField,
    SpectralVectorField,
    to_physical,
    to_spectral,
)
from spectral_core.grid import GridMismatchError, TorusGrid, make_grid
from spectral_core.operators import (
    FieldNorms,
    bilinear_B,
    dealias,
    inner_product,
    ladyzhenskaya_ratio,
    l4_norm,
    leray_project,
    norms,
    stokes_apply,
)
from spectral_core.random_fields import (
    EnergySpectrum,
    random_divfree_field,
    shell_energies,
    taylor_green,
)

__all__ = [
    "EnergySpectrum",
    "FieldNorms",
    "GridMismatchError",
    "PhysicalVectorField",
    "SpectralVectorField",
    "TorusGrid",
    "bilinear_B",
    "dealias",
    "inner_product",
    "ladyzhenskaya_ratio",
    "l4_norm",
    "leray_project",
    "make_grid",
    "norms",
    "random_divfree_field",
    "shell_energies",
    "stokes_apply",
    "taylor_green",
    "to_physical",
    "to_spectral",
]
