"""Truncated trajectory metrics d0+ and d1+ over the windows K_n = [t0, t0 + n/(nu kappa0^2)]."""

from __future__ import annotations

import math

import numpy as np

from ensemble_stats.models import GroundMetric, MetricConfig
from nse_dynamics.models import InsufficientSpanError, Trajectory
from spectral_core.operators import energy_density


def window_sups(err: np.ndarray, dt_sample: float, mcfg: MetricConfig) -> np.ndarray:
    """sup over K_n of an error series sampled every dt_sample, for n = 1..n_max."""
    span = (err.size - 1) * dt_sample
    if span < mcfg.required_span * (1 - 1e-9):
        raise InsufficientSpanError(
            f"metric needs a span of {mcfg.required_span:.4g}, trajectory covers {span:.4g}"
        )
    running = np.maximum.accumulate(err)
    n = np.arange(1, mcfg.n_max + 1)
    idx = np.floor(n * mcfg.window / dt_sample + 1e-9).astype(int)
    return running[np.minimum(idx, err.size - 1)]


def series_value(sups: np.ndarray, scale: float) -> float:
    weights = 2.0 ** -np.arange(1, sups.size + 1)
    return float(np.sum(weights * sups / (scale + sups)))


def _aligned_difference(u: Trajectory, v: Trajectory) -> Trajectory:
    if not u.aligned_with(v):
        raise ValueError("trajectories are not on the same time grid")
    return u.difference(v)


def d0_plus(u: Trajectory, v: Trajectory, mcfg: MetricConfig) -> float:
    diff = _aligned_difference(u, v)
    return series_value(window_sups(diff.l2_series(), diff.dt_sample, mcfg), mcfg.nu)


def d1_plus(u: Trajectory, v: Trajectory, mcfg: MetricConfig) -> float:
    diff = _aligned_difference(u, v)
    scale = mcfg.nu * mcfg.kappa0
    return series_value(window_sups(diff.h1_series(), diff.dt_sample, mcfg), scale)


def state_distance(u: Trajectory, v: Trajectory) -> float:
    """L2 distance of the first samples (the evaluation at the start time)."""
    u.grid.require_same(v.grid, "trajectory")
    return math.sqrt(
        float(energy_density(u.grid, u.states[0].coeffs - v.states[0].coeffs))
    )


def ground_distance(
    u: Trajectory, v: Trajectory, ground: GroundMetric, mcfg: MetricConfig | None
) -> float:
    ground = GroundMetric(ground)
    if ground is GroundMetric.L2_STATE:
        return state_distance(u, v)
    if mcfg is None:
        raise ValueError(f"{ground.value} needs a MetricConfig")
    if ground is GroundMetric.D0_PLUS:
        return d0_plus(u, v, mcfg)
    return d1_plus(u, v, mcfg)
