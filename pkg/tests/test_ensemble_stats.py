import asyncio
import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from ensemble_stats.measures import (
    assimilate_streams_async,
    eval_measure,
    evaluation_measure,
    map_members,
    observe_measure,
    push_forward_S,
    push_forward_WJ,
    sample_initial_measure,
    shift_measure,
)
from ensemble_stats.metrics import d0_plus, d1_plus, ground_distance, series_value, window_sups
from ensemble_stats.models import (
    AttractorAtoms,
    EmpiricalMeasure,
    EnsembleMemberError,
    GaussianModes,
    GroundMetric,
    MetricConfig,
    Provenance,
    TransportMode,
)
from ensemble_stats.reports import decay_report, determining_report, lipschitz_transfer_report
from ensemble_stats.transport import (
    brute_force_distance,
    cost_matrix,
    kantorovich,
    transport_from_cost,
)
from nse_dynamics.models import InsufficientSpanError, Trajectory
from nse_dynamics.solver import integrate
from nudging.models import NudgingConfig
from spectral_core.fields import PhysicalVectorField, SpectralVectorField, to_spectral
from spectral_core.operators import norms


@pytest.fixture
def mcfg():
    return MetricConfig(n_max=4, window=0.5, nu=0.5, kappa0=1.0)


@pytest.fixture
def ncfg(modal16):
    return NudgingConfig(beta=10.0, interpolant=modal16, rho=10.0)


@pytest.fixture
def runs(grid16, forcing16, solver, random_field):
    """Forced trajectories on [0, 2] from different seeds."""

    def make(seeds):
        return [
            integrate(random_field(grid16, seed=s, scale=0.5), forcing16, solver, 2.0, 5)
            for s in seeds
        ]

    return make


@pytest.fixture
def ensemble(grid16, forcing16, solver):
    init = sample_initial_measure(GaussianModes(radius=0.5), 3, grid16, seed=5)
    return push_forward_S(init, forcing16, solver, 6.0, stride=5)


def _constant(grid, field, n_samples, dt=0.05):
    stack = np.repeat(field.coeffs[None], n_samples, axis=0)
    return Trajectory.from_stack(grid, 0.0, dt, stack)


def _mode_field(grid, size):
    """(0, sin x) scaled to L2 norm ``size``; |k| = 1."""
    x, _ = grid.coords
    u = to_spectral(
        PhysicalVectorField(grid=grid, samples=np.stack([np.zeros_like(x), np.sin(x)])),
        div_free=True,
    )
    return u * (size / norms(u).l2)


def _points(trajs):
    return EmpiricalMeasure(atoms=tuple(trajs), provenance=Provenance.INITIAL_SAMPLE)


class TestMetrics:
    def test_config_for_flow(self):
        m = MetricConfig.for_flow(0.5, 1.0, n_max=4)
        assert m.window == pytest.approx(2.0)
        assert m.required_span == pytest.approx(8.0)
        assert m.tail_bound == pytest.approx(1 / 16)

    def test_identical_trajectories(self, runs, mcfg):
        (u,) = runs([0])
        assert d0_plus(u, u, mcfg) == 0.0
        assert d1_plus(u, u, mcfg) == 0.0

    def test_difference_of_size_nu(self, grid16, mcfg):
        zero = _constant(grid16, SpectralVectorField.zeros(grid16), 41)
        shifted = _constant(grid16, _mode_field(grid16, mcfg.nu), 41)
        expected = (1 - 2.0**-mcfg.n_max) / 2
        assert d0_plus(zero, shifted, mcfg) == pytest.approx(expected, rel=1e-10)
        # unit wavenumber, kappa0 = 1: gradient and L2 norms coincide
        assert d1_plus(zero, shifted, mcfg) == pytest.approx(expected, rel=1e-10)

    def test_metric_axioms(self, runs, mcfg):
        u, v, w = runs([0, 1, 2])
        for a, b in itertools.permutations((u, v, w), 2):
            assert d0_plus(a, b, mcfg) == d0_plus(b, a, mcfg)
            assert 0 < d0_plus(a, b, mcfg) < 1
        assert d0_plus(u, w, mcfg) <= d0_plus(u, v, mcfg) + d0_plus(v, w, mcfg) + 1e-12
        assert d1_plus(u, w, mcfg) <= d1_plus(u, v, mcfg) + d1_plus(v, w, mcfg) + 1e-12
        assert d0_plus(u, v, mcfg) <= d1_plus(u, v, mcfg)

    def test_span_too_short(self, runs):
        (u,) = runs([0])
        long = MetricConfig(n_max=10, window=0.5, nu=0.5, kappa0=1.0)
        with pytest.raises(InsufficientSpanError, match="metric needs a span"):
            d0_plus(u, u, long)

    def test_window_sups_are_running_maxima(self, mcfg):
        err = np.array([0.0, 3.0, 1.0, 1.0, 5.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])
        sups = window_sups(err, 0.2, mcfg)
        assert_allclose(sups, [3.0, 5.0, 5.0, 5.0])
        assert_allclose(window_sups(err, 0.2, MetricConfig(n_max=2, window=0.2, nu=1.0, kappa0=1.0)), [3.0, 3.0])

    def test_series_value(self):
        assert series_value(np.array([1.0, 1.0]), 1.0) == pytest.approx(0.25 + 0.125)
        assert series_value(np.zeros(3), 1.0) == 0.0

    def test_ground_metric_needs_config(self, runs):
        u, v = runs([0, 1])
        with pytest.raises(ValueError, match="needs a MetricConfig"):
            ground_distance(u, v, GroundMetric.D0_PLUS, None)
        assert ground_distance(u, v, GroundMetric.L2_STATE, None) == pytest.approx(
            norms(u.states[0] - v.states[0]).l2
        )


class TestTransport:
    def test_same_atoms(self, runs, mcfg):
        mu = _points(runs([0, 1, 2]))
        result = kantorovich(mu, mu, GroundMetric.D0_PLUS, mcfg)
        assert result.distance == 0.0
        assert result.assignment == [0, 1, 2]
        assert result.mode is TransportMode.EXACT_ASSIGNMENT

    def test_single_atoms(self, runs, mcfg):
        u, v = runs([0, 1])
        result = kantorovich(_points([u]), _points([v]), GroundMetric.D0_PLUS, mcfg)
        assert result.distance == pytest.approx(d0_plus(u, v, mcfg))

    def test_assignment_matches_permutation_search(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            cost = rng.uniform(size=(5, 5))
            exact = transport_from_cost(cost).distance
            assert exact == pytest.approx(brute_force_distance(cost), abs=1e-12)

    def test_state_metric_on_measures(self, runs):
        a = _points(runs([0, 1, 2, 3]))
        b = _points(runs([4, 5, 6, 7]))
        cost = cost_matrix(a, b, GroundMetric.L2_STATE)
        assert kantorovich(a, b, GroundMetric.L2_STATE).distance == pytest.approx(
            brute_force_distance(cost), abs=1e-12
        )

    def test_unequal_sizes(self, runs):
        trajs = runs([0, 1, 2])
        with pytest.raises(ValueError, match="unequal atom counts"):
            kantorovich(_points(trajs[:1]), _points(trajs[1:]), GroundMetric.L2_STATE)

    def test_empty_cost(self):
        with pytest.raises(ValueError, match="empty measures"):
            transport_from_cost(np.zeros((0, 0)))

    def test_entropic_above_the_exact_limit(self, monkeypatch):
        from Config import config

        monkeypatch.setattr(config, "EXACT_ASSIGNMENT_MAX_ATOMS", 2)
        cost = np.array([[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.5]])
        result = transport_from_cost(cost)
        assert result.mode is TransportMode.ENTROPIC
        assert result.regularization is not None
        assert result.assignment is None
        assert result.distance >= brute_force_distance(cost) - 1e-6


class TestMeasures:
    def test_gaussian_draws_stay_in_ball(self, grid16):
        draws = sample_initial_measure(GaussianModes(radius=2.0), 6, grid16, seed=1)
        assert len(draws) == 6
        assert all(norms(u).h1 <= 2.0 * (1 + 1e-12) for u in draws)
        assert norms(draws[0] - draws[1]).l2 > 0
        again = sample_initial_measure(GaussianModes(radius=2.0), 6, grid16, seed=1)
        assert all(np.array_equal(a.coeffs, b.coeffs) for a, b in zip(draws, again))

    def test_needs_at_least_one_sample(self, grid16):
        with pytest.raises(ValueError, match="n >= 1"):
            sample_initial_measure(GaussianModes(radius=1.0), 0, grid16)

    def test_attractor_atoms_need_dynamics(self, grid16):
        with pytest.raises(ValueError, match="forcing and solver"):
            sample_initial_measure(AttractorAtoms(radius=1.0), 2, grid16)

    def test_attractor_atoms_are_settled(self, grid16, forcing16, solver):
        atoms = sample_initial_measure(
            AttractorAtoms(radius=5.0), 2, grid16, seed=2, f=forcing16, cfg=solver
        )
        bound = 2**0.5 * 0.5 * 3.0
        assert all(norms(u).h1 <= bound for u in atoms)

    def test_push_forward_is_memberwise(self, grid16, forcing16, solver, random_field):
        init = [random_field(grid16, seed=s, scale=0.5) for s in range(3)]
        mu = push_forward_S(init, forcing16, solver, 1.0, stride=5)
        assert mu.provenance is Provenance.PUSHFORWARD_S
        single = integrate(init[1], forcing16, solver, 1.0, 5)
        assert np.array_equal(mu.atoms[1].stack, single.stack)
        swapped = push_forward_S(init[::-1], forcing16, solver, 1.0, stride=5)
        assert np.array_equal(swapped.atoms[0].stack, mu.atoms[2].stack)

    def test_member_failure_names_the_index(self):
        def fn(i, item):
            if i == 1:
                raise RuntimeError("boom")
            return item * 2

        with pytest.raises(EnsembleMemberError, match="member 1") as info:
            asyncio.run(map_members(fn, [1, 2, 3], jobs=2))
        assert info.value.index == 1
        assert isinstance(info.value.cause, RuntimeError)
        assert asyncio.run(map_members(lambda i, x: x + i, [10, 20, 30])) == [10, 21, 32]

    def test_empty_and_misaligned_measures(self, runs, grid16, forcing16, solver, random_field):
        with pytest.raises(ValidationError, match="at least one atom"):
            EmpiricalMeasure(atoms=(), provenance=Provenance.INITIAL_SAMPLE)
        (u,) = runs([0])
        short = integrate(random_field(grid16, seed=1), forcing16, solver, 1.0, 5)
        with pytest.raises(ValidationError, match="time grid of atom 0"):
            _points([u, short])

    def test_shift_and_evaluation(self, ensemble):
        assert shift_measure(ensemble, 0.0) is ensemble
        shifted = shift_measure(ensemble, 1.0)
        assert shifted.provenance is Provenance.SHIFTED
        assert shifted.shift == 1.0
        for a, b in zip(eval_measure(shifted, 0.0), eval_measure(ensemble, 1.0)):
            assert np.array_equal(a.coeffs, b.coeffs)
        twice = shift_measure(shift_measure(ensemble, 0.5), 0.5)
        assert twice.shift == pytest.approx(1.0)
        assert all(
            np.array_equal(a.stack, b.stack) for a, b in zip(twice.atoms, shifted.atoms)
        )
        points = evaluation_measure(ensemble, 2.0)
        assert all(a.n_samples == 1 for a in points.atoms)

    def test_shift_beyond_span(self, ensemble):
        with pytest.raises(InsufficientSpanError):
            shift_measure(ensemble, 7.0)

    def test_observation_noise_differs_per_member(self, ensemble, modal16):
        from nudging.models import NoiseSpec

        observed = observe_measure(ensemble, modal16, NoiseSpec(magnitude=0.1, seed=3))
        assert observed.provenance is Provenance.PUSHFORWARD_J
        assert [a.noise.seed for a in observed.atoms] == [3, 4, 5]

    def test_assimilation_keeps_pairing(self, ensemble, modal16, forcing16, solver, ncfg):
        out = push_forward_WJ(ensemble, modal16, forcing16, solver, ncfg)
        assert out.provenance is Provenance.PUSHFORWARD_WJ
        assert out.n_atoms == ensemble.n_atoms
        for w, u in zip(out.atoms, ensemble.atoms):
            err = w.difference(u).h1_series()
            assert err[-1] < 1e-2 * err.max()


class TestReports:
    def test_decay(self, ensemble, modal16, forcing16, solver, ncfg):
        m = MetricConfig(n_max=2, window=1.0, nu=0.5, kappa0=1.0)
        report = decay_report(ensemble, modal16, forcing16, solver, ncfg, [0.0, 1.0, 2.0, 3.0, 4.0], m)
        frame = report.to_frame()
        assert list(frame["t"]) == [0.0, 1.0, 2.0, 3.0, 4.0]
        assert all(r.gamma_H <= r.paired_bound + 1e-12 for r in report.rows)
        assert all(r.gamma_eval <= r.paired_eval_bound + 1e-12 for r in report.rows)
        assert report.rows[-1].gamma_H < 1e-2 * report.rows[0].gamma_H
        assert report.rate_bound == pytest.approx(1.25)
        assert report.transport_mode is TransportMode.EXACT_ASSIGNMENT
        assert "coupling bound exceeded" not in report.flags
        assert report.transient == pytest.approx(0.8)
        assert "envelope exceeded" not in report.flags
        assert all(r.gamma_H <= 1.5 * r.envelope_metric for r in report.rows if r.t >= 0.8)

    def test_decay_flags_breached_envelope(self, ensemble, modal16, forcing16, solver, ncfg):
        m = MetricConfig(n_max=2, window=1.0, nu=0.5, kappa0=1.0)
        out = push_forward_WJ(ensemble, modal16, forcing16, solver, ncfg)
        # a nominal beta far above the one used collapses the envelope
        strong = NudgingConfig(beta=1000.0, interpolant=modal16, rho=10.0)
        t_grid = [0.0, 1.0, 2.0]
        report = decay_report(ensemble, modal16, forcing16, solver, strong, t_grid, m, assimilated=out)
        assert report.transient == pytest.approx(0.008)
        assert "envelope exceeded" in report.flags

        late = decay_report(
            ensemble, modal16, forcing16, solver, strong, t_grid, m, assimilated=out, transient=5.0
        )
        assert late.transient == 5.0
        assert "envelope exceeded" not in late.flags
        assert "non-monotone after transient" not in late.flags

    def test_decay_span_error(self, ensemble, modal16, forcing16, solver, ncfg):
        m = MetricConfig(n_max=2, window=1.0, nu=0.5, kappa0=1.0)
        with pytest.raises(InsufficientSpanError):
            decay_report(ensemble, modal16, forcing16, solver, ncfg, [5.0], m)

    def test_determining_parameters(self, ensemble, modal16, forcing16, solver, ncfg, grid16, random_field):
        streams = observe_measure(ensemble, modal16).atoms
        starts = [random_field(grid16, seed=20 + i, scale=0.5) for i in range(len(streams))]
        out_a = asyncio.run(assimilate_streams_async(streams, forcing16, solver, ncfg))
        out_b = asyncio.run(assimilate_streams_async(streams, forcing16, solver, ncfg, w0s=starts))
        m = MetricConfig(n_max=2, window=1.0, nu=0.5, kappa0=1.0)
        report = determining_report(out_a, out_b, [0.0, 2.0, 4.0], m, ncfg.beta)
        assert report.rows[0].ratio == 1.0
        assert report.final_ratio < 1e-2
        assert report.rows[1].gamma_H < report.rows[0].gamma_H

    def test_determining_needs_equal_sizes(self, ensemble, mcfg):
        one = EmpiricalMeasure(atoms=ensemble.atoms[:1], provenance=Provenance.PUSHFORWARD_WJ)
        with pytest.raises(ValueError, match="same number of members"):
            determining_report(ensemble, one, [0.0], mcfg, 1.0)

    def test_lipschitz_transfer(self, ensemble, modal16, forcing16, solver, ncfg, grid16):
        init = sample_initial_measure(GaussianModes(radius=0.5), 3, grid16, seed=6)
        other = push_forward_S(init, forcing16, solver, 6.0, stride=5)
        obs_a, obs_b = observe_measure(ensemble, modal16), observe_measure(other, modal16)
        out_a = push_forward_WJ(ensemble, modal16, forcing16, solver, ncfg)
        out_b = push_forward_WJ(other, modal16, forcing16, solver, ncfg)
        m = MetricConfig(n_max=2, window=1.0, nu=0.5, kappa0=1.0)
        report = lipschitz_transfer_report(obs_a, obs_b, out_a, out_b, forcing16, solver, ncfg, [0.0, 2.0], m)
        assert len(report.rows) == 2
        assert report.rows[0].factor == pytest.approx((8 * 10.0) ** 0.5)
        assert report.passed, report.to_frame()
