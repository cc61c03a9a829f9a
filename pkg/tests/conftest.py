import math

import pytest

from interpolants.build import build_interpolant
from interpolants.models import InterpolantSpec, ModalKind
from nse_dynamics.models import Forcing, SolverConfig
from nse_dynamics.solver import integrate, make_kolmogorov_forcing
from spectral_core.grid import make_grid
from spectral_core.operators import norms
from spectral_core.random_fields import EnergySpectrum, random_divfree_field


@pytest.fixture(autouse=True)
def _quiet_workers(monkeypatch):
    from Config import config

    monkeypatch.setattr(config, "NUDGE_NSE_JOBS", 2)


@pytest.fixture
def grid16():
    return make_grid(16, 2 * math.pi)


@pytest.fixture
def grid32():
    return make_grid(32, 2 * math.pi)


@pytest.fixture
def random_field():
    """Seeded div-free field scaled to ||grad u|| = scale."""

    def make(grid, seed=0, scale=1.0):
        u = random_divfree_field(grid, EnergySpectrum(), seed)
        return u * (scale / norms(u).h1)

    return make


@pytest.fixture
def solver():
    return SolverConfig(viscosity_nu=0.5, dt=1e-2)


@pytest.fixture
def forcing16(grid16, solver):
    return make_kolmogorov_forcing(grid16, solver.viscosity_nu, 3.0, 2)


@pytest.fixture
def modal16(grid16):
    return build_interpolant(InterpolantSpec(kind=ModalKind(n_obs_modes=3), grid=grid16))


@pytest.fixture
def reference16(grid16, solver, forcing16, random_field):
    """A forced trajectory on [0, 6] sampled every 5 steps."""
    u0 = random_field(grid16, seed=3, scale=0.5)
    return integrate(u0, forcing16, solver, 6.0, sample_stride=5)


@pytest.fixture
def unforced(grid16):
    return Forcing.none(grid16)
