import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from spectral_core.fields import PhysicalVectorField, SpectralVectorField, to_physical, to_spectral
from spectral_core.grid import GridMismatchError, make_grid
from spectral_core.operators import (
    bilinear_B,
    inner_product,
    ladyzhenskaya_ratio,
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


class TestGrid:
    def test_odd_n_modes_rejected(self):
        with pytest.raises(ValidationError, match="n_modes must be even"):
            make_grid(15, 1.0)

    def test_non_positive_period_rejected(self):
        with pytest.raises(ValidationError, match="period_L"):
            make_grid(16, 0.0)

    def test_kappa0_and_cutoff(self):
        g = make_grid(48, 4 * math.pi)
        assert g.kappa0 == pytest.approx(0.5)
        assert g.dealias_cutoff == 16

    def test_nyquist_line_masked(self, grid16):
        assert not grid16.nyquist_mask[8, 0]
        assert not grid16.nyquist_mask[0, 8]
        assert grid16.nyquist_mask[7, 7]


class TestFields:
    def test_taylor_green_is_div_free_and_real(self, grid16):
        u = taylor_green(grid16, amplitude=2.0)
        assert u.divergence_residual() < 1e-12
        assert u.symmetry_residual() < 1e-12

    def test_physical_round_trip(self, grid16, random_field):
        u = random_field(grid16, seed=1)
        back = to_spectral(to_physical(u), div_free=True)
        assert_allclose(back.coeffs, u.coeffs, atol=1e-14)

    def test_parseval_convention(self, grid16):
        u = taylor_green(grid16, amplitude=1.0)
        samples = to_physical(u).samples
        physical = float(np.sum(samples**2)) * grid16.dx**2
        assert norms(u).l2 ** 2 == pytest.approx(physical, rel=1e-12)
        # ||u||^2 = A^2 |Omega| / 2 for Taylor-Green
        assert physical == pytest.approx(grid16.area / 2, rel=1e-12)

    def test_non_finite_samples_rejected(self, grid16):
        samples = np.zeros((2, 16, 16))
        samples[0, 0, 0] = np.nan
        with pytest.raises(ValidationError, match="finite"):
            PhysicalVectorField(grid=grid16, samples=samples)

    def test_grid_mismatch_on_arithmetic(self, grid16):
        a = SpectralVectorField.zeros(grid16)
        b = SpectralVectorField.zeros(make_grid(16, 1.0))
        with pytest.raises(GridMismatchError):
            a + b

    def test_arithmetic_keeps_div_free(self, grid16, random_field):
        u, v = random_field(grid16, 0), random_field(grid16, 1)
        w = 2.0 * u - v
        assert w.div_free
        assert_allclose(w.coeffs, 2 * u.coeffs - v.coeffs)


class TestOperators:
    def test_leray_is_idempotent(self, grid16):
        rng = np.random.default_rng(0)
        raw = to_spectral(
            PhysicalVectorField(grid=grid16, samples=rng.standard_normal((2, 16, 16)))
        )
        p = leray_project(raw)
        assert p.divergence_residual() < 1e-12
        assert_allclose(leray_project(p).coeffs, p.coeffs, atol=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_advection_orthogonality(self, seed):
        grid = make_grid(32, 2 * math.pi)
        u = random_divfree_field(grid, EnergySpectrum(), seed)
        b = bilinear_B(u, u)
        nb, nu_ = norms(b), norms(u)
        assert abs(inner_product(b, u)) <= 1e-10 * nb.l2 * nu_.l2
        assert abs(inner_product(b, stokes_apply(u))) <= 1e-10 * nb.l2 * nu_.h2

    def test_taylor_green_is_steady_for_euler(self, grid16):
        # the nonlinear term of Taylor-Green is a gradient
        u = taylor_green(grid16)
        assert norms(bilinear_B(u, u)).l2 < 1e-12

    def test_norm_hierarchy_for_single_mode(self, grid16):
        u = taylor_green(grid16)
        n = norms(u)
        k2 = 2 * grid16.kappa0**2
        assert n.h1 == pytest.approx(math.sqrt(k2) * n.l2)
        assert n.h2 == pytest.approx(k2 * n.l2)

    def test_ladyzhenskaya_ratio_is_bounded(self, grid32):
        ratios = [
            ladyzhenskaya_ratio(random_divfree_field(grid32, EnergySpectrum(), s))
            for s in range(5)
        ]
        assert all(0 < r < 2 for r in ratios)

    def test_ladyzhenskaya_bound_stable_under_refinement(self):
        band = EnergySpectrum(k_max=8)
        maxima = []
        for n in (32, 64, 128):
            grid = make_grid(n, 2 * math.pi)
            maxima.append(max(ladyzhenskaya_ratio(random_divfree_field(grid, band, s)) for s in range(5)))
        assert all(0 < m < 2 for m in maxima)
        assert max(maxima) / min(maxima) <= 1.5

    def test_zero_field_ratio(self, grid16):
        assert ladyzhenskaya_ratio(SpectralVectorField.zeros(grid16)) == 0.0


class TestRandomFields:
    def test_shell_energies_follow_the_law(self, grid32):
        spec = EnergySpectrum(amplitude=2.0, slope=2.0, k_min=2, k_max=6)
        u = random_divfree_field(grid32, spec, seed=4)
        e = shell_energies(u)
        for s in range(2, 7):
            assert e[s] == pytest.approx(2.0 * s**-2.0, rel=1e-10)
        assert e[1] == 0.0

    def test_seeded_fields_are_reproducible(self, grid16):
        a = random_divfree_field(grid16, EnergySpectrum(), 7)
        b = random_divfree_field(grid16, EnergySpectrum(), 7)
        assert np.array_equal(a.coeffs, b.coeffs)
        assert a.divergence_residual() < 1e-12

    def test_negative_amplitude_rejected(self):
        with pytest.raises(ValidationError, match="amplitude"):
            EnergySpectrum(amplitude=-1.0)
