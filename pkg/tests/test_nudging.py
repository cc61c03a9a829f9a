import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from interpolants.build import build_interpolant
from interpolants.models import InterpolantSpec, VolumeAverageKind
from nse_dynamics.models import InsufficientSpanError, SolverConfig, Trajectory
from nse_dynamics.solver import integrate
from nudging.advisor import (
    NoAdmissibleBetaError,
    advise_parameters,
    beta_max_for,
    condition_gap,
    h_max_for,
    rho_floor_type1,
    rho_floor_type2,
)
from nudging.determining_map import (
    check_forgetting,
    default_burn_in,
    solve_linearized,
    solve_W_burnin,
    solve_Wplus,
)
from nudging.diagnostics import data_lipschitz_check, frechet_check, sync_report, y_norm
from nudging.models import NoiseSpec, NudgingConfig, NudgingConstants
from nudging.observe import check_observation_ball, observe, scaled, stream_from_fields, x_norm
from spectral_core.fields import PhysicalVectorField, SpectralVectorField, to_spectral
from spectral_core.operators import norms
from spectral_core.random_fields import random_scalar_coeffs


@pytest.fixture
def ncfg(modal16):
    return NudgingConfig(beta=10.0, interpolant=modal16, rho=10.0)


@pytest.fixture
def stream16(reference16, modal16):
    return observe(reference16, modal16)


@pytest.fixture
def other16(grid16, solver, forcing16, random_field, modal16):
    u0 = random_field(grid16, seed=11, scale=0.5)
    return observe(integrate(u0, forcing16, solver, 6.0, sample_stride=5), modal16)


class TestAdvisor:
    def test_zero_grashof_is_vacuous(self):
        advice = advise_parameters(0.0, 1.0)
        assert advice.beta_min == pytest.approx(1e-6)
        assert advice.vacuous
        assert "condition vacuous" in advice.flags

    def test_bisection_finds_the_crossing(self):
        advice = advise_parameters(10.0, math.e)
        beta = advice.beta_min
        # the rho^2 log rho^2 part alone needs 2 e^2
        assert beta > 2 * math.e**2
        assert condition_gap(beta, 10.0, math.e) >= 0
        assert condition_gap(beta * (1 - 1e-4), 10.0, math.e) < 0
        assert advice.h_max == pytest.approx(1 / math.sqrt(beta))

    def test_pathological_constants(self):
        with pytest.raises(NoAdmissibleBetaError, match="no admissible beta"):
            advise_parameters(1.0, 1.0, NudgingConstants(c1_star=1e12))

    def test_invalid_inputs(self):
        with pytest.raises(ValueError, match="G must be non-negative"):
            advise_parameters(-1.0, 1.0)
        with pytest.raises(ValueError, match="rho must be positive"):
            advise_parameters(1.0, 0.0)

    def test_h_and_beta_limits(self):
        assert h_max_for(100.0) == pytest.approx(0.1)
        assert beta_max_for(0.1) == pytest.approx(100.0)
        assert h_max_for(4.0, kappa0=0.5, c2_star=4.0) == pytest.approx(2.0)
        with pytest.raises(ValueError, match="beta must be positive"):
            h_max_for(0.0)

    def test_rho_floors(self):
        assert rho_floor_type1(2.0) == pytest.approx(4.0)
        assert rho_floor_type1(2.0, ball=True) == pytest.approx(4.0 * math.sqrt(2.0))
        constants = NudgingConstants(c3_star=1.0)
        assert rho_floor_type2(1.0, 4.0, constants) == pytest.approx(1.0 + 8.0 / 2.0)
        assert math.isinf(rho_floor_type2(1.0, 0.0, constants))

    def test_derived_c3_dominates_each_term(self):
        c = NudgingConstants()
        assert c.resolved_c3() >= 1.0 + c.c_tilde21
        assert c.resolved_c3_ball() >= c.resolved_c3()

    def test_admissibility_flags(self, modal16):
        ok = NudgingConfig(beta=100.0, interpolant=modal16, rho=1.0, h=0.05)
        flags = ok.admissibility(1.0)
        assert flags.condbeta_ok and flags.condbetah_ok
        off = NudgingConfig(beta=0.0, interpolant=modal16, rho=1.0)
        assert not off.admissibility(1.0).condbeta_ok


class TestObserve:
    def test_modal_observation_truncates(self, reference16, modal16, stream16):
        assert_allclose(stream16.stack, reference16.stack * modal16.mode_mask, atol=1e-15)
        assert stream16.div_free
        assert stream16.times == pytest.approx(reference16.times)

    def test_zero_trajectory(self, grid16, modal16):
        zero = Trajectory(grid=grid16, t0=0.0, dt_sample=0.0, states=(SpectralVectorField.zeros(grid16),))
        assert not np.any(observe(zero, modal16).stack)

    def test_noise_has_requested_size(self, reference16, modal16, stream16):
        noisy = observe(reference16, modal16, NoiseSpec(magnitude=0.1, seed=4))
        diff = noisy.difference(stream16)
        assert_allclose(diff.l2_series(), 0.1, rtol=1e-10)
        assert noisy.noise.seed == 4
        again = observe(reference16, modal16, NoiseSpec(magnitude=0.1, seed=4))
        assert np.array_equal(again.stack, noisy.stack)

    def test_x_norm_and_ball(self, stream16, solver):
        value = x_norm(stream16, solver.viscosity_nu)
        assert value == pytest.approx(stream16.sup_grad / 0.5)
        assert check_observation_ball(stream16, solver.viscosity_nu, 2 * value)
        assert not check_observation_ball(stream16, solver.viscosity_nu, 0.5 * value)


class TestDeterminingMap:
    def test_zero_data_zero_forcing(self, grid16, modal16, unforced, solver):
        u = integrate(SpectralVectorField.zeros(grid16), unforced, solver, 1.0, 5)
        ncfg = NudgingConfig(beta=5.0, interpolant=modal16, rho=1.0)
        w = solve_Wplus(observe(u, modal16), unforced, solver, ncfg)
        assert not np.any(w.stack)

    def test_synchronizes_with_reference(self, grid16, forcing16, solver, random_field, modal16, ncfg):
        u = integrate(random_field(grid16, seed=3, scale=0.5), forcing16, solver, 4.0)
        w = solve_Wplus(observe(u, modal16), forcing16, solver, ncfg)
        report = sync_report(w, u, ncfg, solver.viscosity_nu, G=3.0)
        assert report.grad_err[-1] <= 1e-3 * max(report.grad_err)
        assert report.fitted_rate is not None
        assert report.fitted_rate >= report.bound_rate
        assert report.predicted_rate == pytest.approx(2 * report.bound_rate)
        # Poincare with kappa0 = 1
        assert np.all(np.array(report.l2_err) <= np.array(report.grad_err) * (1 + 1e-12))
        assert len(report.envelope) == len(report.times)

    def test_identical_trajectories(self, reference16, ncfg):
        report = sync_report(reference16, reference16, ncfg, 0.5)
        assert "identical" in report.flags
        assert report.fitted_rate is None
        assert max(report.grad_err) == 0.0

    def test_no_nudging_is_flagged(self, reference16, modal16, stream16, forcing16, solver):
        off = NudgingConfig(beta=0.0, interpolant=modal16, rho=10.0)
        w = solve_Wplus(stream16, forcing16, solver, off)
        assert "no nudging" in sync_report(w, reference16, off, 0.5).flags

    def test_misaligned_grids(self, reference16, ncfg):
        with pytest.raises(ValueError, match="same time grid"):
            sync_report(reference16, reference16.since(1.0), ncfg, 0.5)

    def test_explicit_nudging_guard(self, grid16, stream16, forcing16, solver):
        op = build_interpolant(InterpolantSpec(kind=VolumeAverageKind(h=grid16.period_L / 4), grid=grid16))
        strong = NudgingConfig(beta=200.0, interpolant=op, rho=10.0)
        with pytest.raises(ValueError, match="explicit nudging"):
            solve_Wplus(stream16, forcing16, solver, strong)

    def test_volume_average_nudging_stays_bounded(self, grid16, reference16, forcing16, solver):
        op = build_interpolant(InterpolantSpec(kind=VolumeAverageKind(h=grid16.period_L / 8), grid=grid16))
        ncfg = NudgingConfig(beta=10.0, interpolant=op, rho=10.0)
        v = observe(reference16, op)
        w = solve_Wplus(v, forcing16, solver, ncfg)
        assert w.div_free
        bound = 2 * 0.5**2 * (3.0**2 / 10.0 + x_norm(v, 0.5) ** 2)
        assert np.max(w.h1_series() ** 2) <= bound * 1.05

    def test_sample_spacing_must_match_dt(self, stream16, forcing16, ncfg):
        with pytest.raises(ValueError, match="not a multiple of dt"):
            solve_Wplus(stream16, forcing16, SolverConfig(viscosity_nu=0.5, dt=0.03), ncfg)

    def test_gradient_part_of_data_is_ignored(self, grid16, stream16, forcing16, solver, ncfg):
        phi = random_scalar_coeffs(grid16, 2.0, 0, with_mean=False)
        grad = np.stack([1j * grid16.kx * phi, 1j * grid16.ky * phi])
        polluted = stream_from_fields(stream16, stream16.stack + grad[None])
        a = solve_W_burnin(stream16, forcing16, solver, ncfg, t_burn=2.0, t_start=3.0)
        b = solve_W_burnin(polluted, forcing16, solver, ncfg, t_burn=2.0, t_start=3.0)
        assert_allclose(a.stack, b.stack, atol=1e-12)


class TestBurnIn:
    def test_default_span(self):
        assert default_burn_in(1.0, 1.0, 1.0) == pytest.approx(1.5 * math.log(1e12))
        with pytest.raises(ValueError, match="beta > 0"):
            default_burn_in(0.0, 1.0, 1.0)

    def test_output_window(self, stream16, forcing16, solver, ncfg):
        w = solve_W_burnin(stream16, forcing16, solver, ncfg, t_burn=2.0, t_start=3.0)
        assert w.t0 == pytest.approx(3.0)
        assert w.t_end == pytest.approx(stream16.t_end)

    def test_time_shift_commutes(self, stream16, forcing16, solver, ncfg):
        a = solve_W_burnin(stream16, forcing16, solver, ncfg, t_burn=2.0, t_start=3.0)
        b = solve_W_burnin(stream16.shifted(1.0), forcing16, solver, ncfg, t_burn=2.0, t_start=2.0)
        assert a.n_samples == b.n_samples
        assert_allclose(a.stack, b.stack, atol=1e-10)

    def test_not_enough_history(self, stream16, forcing16, solver, ncfg):
        with pytest.raises(InsufficientSpanError, match="burn-in"):
            solve_W_burnin(stream16, forcing16, solver, ncfg, t_burn=4.0, t_start=3.0)

    def test_forgetting(self, stream16, forcing16, solver, ncfg):
        check = check_forgetting(stream16, forcing16, solver, ncfg, t_burn=3.0, t_start=6.0, tolerance=1e-3)
        assert check.passed
        assert check.rel_change < 1e-3
        with pytest.raises(InsufficientSpanError):
            check_forgetting(stream16, forcing16, solver, ncfg, t_burn=3.0, t_start=5.0)


class TestLinearization:
    def test_zero_direction(self, stream16, forcing16, solver, ncfg):
        zero = scaled(stream16, 0.0)
        ws = solve_linearized(stream16, zero, forcing16, solver, ncfg)
        assert not np.any(ws.stack)

    def test_linear_in_direction(self, stream16, other16, forcing16, solver, ncfg):
        once = solve_linearized(stream16, other16, forcing16, solver, ncfg)
        twice = solve_linearized(stream16, scaled(other16, 2.0), forcing16, solver, ncfg)
        scale = np.max(np.abs(once.stack))
        assert np.max(np.abs(twice.stack - 2 * once.stack)) <= 1e-10 * scale

    def test_remainder_is_quadratic(self, stream16, other16, forcing16, solver, ncfg):
        report = frechet_check(stream16, other16, forcing16, solver, ncfg)
        assert report.passed
        assert report.slope == pytest.approx(2.0, abs=0.2)
        assert report.residuals[0] > report.residuals[-1]

    def test_unknown_mode(self, stream16, other16, forcing16, solver, ncfg):
        with pytest.raises(ValueError, match="unknown mode"):
            solve_linearized(stream16, other16, forcing16, solver, ncfg, mode="backward")


class TestNorms:
    def _steady(self, grid, n_samples):
        x, _ = grid.coords
        samples = np.stack([np.zeros_like(x), np.sin(x)])
        u = to_spectral(PhysicalVectorField(grid=grid, samples=samples), div_free=True)
        stack = np.repeat(u.coeffs[None], n_samples, axis=0)
        return u, Trajectory.from_stack(grid, 0.0, 0.1, stack)

    def test_steady_single_mode(self, grid16):
        u, traj = self._steady(grid16, 21)
        # |k| = 1, so the gradient and Stokes norms equal the L2 norm
        assert y_norm(traj, 1.0) == pytest.approx(math.sqrt(2.0) * norms(u).l2, rel=1e-10)

    def test_zero_trajectory(self, grid16):
        traj = Trajectory.from_stack(grid16, 0.0, 0.1, np.zeros((21, 2, 16, 16)))
        assert y_norm(traj, 1.0) == 0.0

    def test_needs_one_window(self, grid16):
        _, traj = self._steady(grid16, 3)
        with pytest.raises(InsufficientSpanError, match="averaging window"):
            y_norm(traj, 1.0)

    def test_data_bounds(self, stream16, other16, forcing16, solver, ncfg):
        report = data_lipschitz_check(stream16, other16, forcing16, solver, ncfg)
        assert report.passed, report.to_frame()
        assert report.x_distance > 0
        assert len(report.checks) == 6

    def test_data_bounds_need_nudging(self, stream16, other16, forcing16, solver, modal16):
        off = NudgingConfig(beta=0.0, interpolant=modal16, rho=10.0)
        with pytest.raises(ValueError, match="beta > 0"):
            data_lipschitz_check(stream16, other16, forcing16, solver, off)
