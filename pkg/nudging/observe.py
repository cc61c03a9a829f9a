from __future__ import annotations

import math

import numpy as np
from loguru import logger as log

from interpolants.build import InterpolantOp
from nse_dynamics.models import Trajectory
from nudging.models import NoiseSpec, ObservationStream
from spectral_core.fields import enforce_symmetry, samples_to_coeffs
from spectral_core.operators import energy_density


def _noise_stack(
    op: InterpolantOp, n_samples: int, noise: NoiseSpec
) -> np.ndarray:
    """J applied to seeded white noise, rescaled to ``noise.magnitude`` in L2 per sample."""
    grid = op.grid
    n = grid.n_modes
    rng = np.random.default_rng(noise.seed)
    raw = samples_to_coeffs(rng.standard_normal((n_samples, 2, n, n)))
    seen = enforce_symmetry(grid, op.apply_coeffs(raw))
    size = np.sqrt(energy_density(grid, seen))
    scale = np.divide(
        noise.magnitude, size, out=np.zeros_like(size), where=size > 0
    )
    return seen * scale[:, None, None, None]


def observe(
    u_traj: Trajectory, op: InterpolantOp, noise: NoiseSpec | None = None
) -> ObservationStream:
    op.grid.require_same(u_traj.grid, "observed trajectory")
    data = enforce_symmetry(op.grid, op.apply_coeffs(u_traj.stack))
    if noise is not None and noise.magnitude > 0:
        data = data + _noise_stack(op, u_traj.n_samples, noise)
    stream = ObservationStream.from_stack(
        u_traj.grid,
        u_traj.t0,
        u_traj.dt_sample,
        data,
        div_free=op.is_modal and u_traj.div_free,
        noise=noise,
    )
    log.debug(
        f"Observed {stream.n_samples} samples, sup ||grad v|| = {stream.sup_grad:.4g}"
    )
    return stream


def x_norm(stream: Trajectory, nu: float, kappa0: float | None = None) -> float:
    """sup_t ||grad v(t)|| / (nu kappa0)."""
    kappa0 = stream.grid.kappa0 if kappa0 is None else kappa0
    return float(stream.h1_series().max()) / (nu * kappa0)


def x_distance(v1: Trajectory, v2: Trajectory, nu: float) -> float:
    return x_norm(v1.difference(v2), nu)


def check_observation_ball(stream: Trajectory, nu: float, rho: float) -> bool:
    """Warn when the stream leaves B_X(rho)."""
    value = x_norm(stream, nu)
    inside = value <= rho * (1 + 1e-12)
    if not inside:
        log.warning(
            f"Observations leave the ball B_X(rho): ||v||_X = {value:.4g} > rho = {rho:.4g}"
        )
    return inside


def stream_from_fields(
    stream: ObservationStream, stack: np.ndarray
) -> ObservationStream:
    """A stream on the same time grid carrying different data."""
    return ObservationStream.from_stack(
        stream.grid, stream.t0, stream.dt_sample, stack, div_free=False
    )


def scaled(stream: ObservationStream, factor: float) -> ObservationStream:
    return stream_from_fields(stream, factor * stream.stack)


def combined(
    a: ObservationStream, b: ObservationStream, eps: float = 1.0
) -> ObservationStream:
    """a + eps b on the shared time grid."""
    if not a.aligned_with(b):
        raise ValueError("observation streams are not on the same time grid")
    if not math.isfinite(eps):
        raise ValueError("eps must be finite")
    return stream_from_fields(a, a.stack + eps * b.stack)
