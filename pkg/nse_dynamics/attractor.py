"""Attractor and absorbing-ball bounds, and empirical spin-up into the absorbing regime."""

from __future__ import annotations

import math

import numpy as np
from loguru import logger as log
from pydantic import BaseModel
from scipy.integrate import trapezoid

from Config import config
from nse_dynamics.models import AttractorBounds, Forcing, SolverConfig, SpinUpResult, Trajectory
from nse_dynamics.solver import (
    BlowUpError,
    SpectralStepper,
    energy_reference,
    nse_rhs,
)
from spectral_core.fields import SpectralVectorField
from spectral_core.operators import energy_density

ATTRACTOR_H2_CONSTANT = 2137.0


class SpinUpError(RuntimeError):
    def __init__(self, elapsed: float, h1_last: float, h1_bound: float):
        self.elapsed = elapsed
        self.h1_last = h1_last
        self.h1_bound = h1_bound
        super().__init__(
            f"spin-up did not settle within t={elapsed:.4g}: "
            f"last ||grad u||={h1_last:.4g}, bound={h1_bound:.4g}"
        )


class AbsorbingCheck(BaseModel):
    inside: bool
    h1_max: float
    h2_max: float
    h1_bound: float
    h2_bound: float


def attractor_bounds(
    G: float, nu: float, kappa0: float, c_L: float = 1.0
) -> AttractorBounds:
    c2 = ATTRACTOR_H2_CONSTANT * c_L**4
    return AttractorBounds(
        h1_bound=nu * kappa0 * G,
        h2_bound=c2 * nu * kappa0**2 * (G + c_L**-2) ** 3,
    )


def absorbing_h1_bound(G: float, nu: float, kappa0: float) -> float:
    return math.sqrt(2.0) * nu * kappa0 * G


def in_absorbing_ball(
    traj: Trajectory, G: float, nu: float, kappa0: float, c_L: float = 1.0
) -> AbsorbingCheck:
    """Check ||grad u|| <= sqrt(2) nu kappa0 G and ||A u|| <= c2 nu kappa0^2 (G + c_L^-2)^3."""
    h1 = traj.h1_series()
    h2 = traj.h2_series()
    b1 = absorbing_h1_bound(G, nu, kappa0)
    b2 = attractor_bounds(G, nu, kappa0, c_L).h2_bound
    h1_max, h2_max = float(h1.max()), float(h2.max())
    return AbsorbingCheck(
        inside=bool(h1_max <= b1 * (1 + 1e-12) and h2_max <= b2),
        h1_max=h1_max,
        h2_max=h2_max,
        h1_bound=b1,
        h2_bound=b2,
    )


def spin_up_to_absorbing(
    u0: SpectralVectorField,
    f: Forcing,
    cfg: SolverConfig,
    G: float,
    max_time: float | None = None,
) -> SpinUpResult:
    """Integrate until ||grad u|| stays under sqrt(2) nu kappa0 G for one window 1/(nu kappa0^2).

    With G = 0 the bound is replaced by the floor SPINUP_H1_FLOOR * nu * kappa0.
    """
    grid = u0.grid
    nu, kappa0 = cfg.viscosity_nu, grid.kappa0
    window = 1.0 / (nu * kappa0**2)
    bound = max(
        absorbing_h1_bound(G, nu, kappa0), config.SPINUP_H1_FLOOR * nu * kappa0
    )
    max_time = max_time if max_time is not None else config.SPINUP_MAX_WINDOWS * window
    window_steps = max(1, math.ceil(window / cfg.dt - 1e-9))
    max_steps = math.ceil(max_time / cfg.dt)

    stepper = SpectralStepper(grid, cfg)
    rhs = nse_rhs(grid, f, cfg)
    limit = config.BLOWUP_GROWTH_FACTOR * max(energy_reference(u0.coeffs, f, cfg), 1e-300)
    c = np.array(u0.coeffs, copy=True)
    h1 = math.sqrt(float(energy_density(grid, c, power=1)))
    inside_steps = 1 if h1 <= bound else 0
    log.info(
        f"Spin-up: ||grad u0||={h1:.4g}, bound={bound:.4g}, window={window:.4g}"
    )

    steps = 0
    while inside_steps <= window_steps:
        if steps >= max_steps:
            raise SpinUpError(steps * cfg.dt, h1, bound)
        c = stepper.advance(c, rhs, steps * cfg.dt)
        steps += 1
        if not np.all(np.isfinite(c)):
            raise BlowUpError(steps * cfg.dt)
        if float(energy_density(grid, c)) > limit:
            raise BlowUpError(steps * cfg.dt, "energy growth during spin-up")
        h1 = math.sqrt(float(energy_density(grid, c, power=1)))
        inside_steps = inside_steps + 1 if h1 <= bound else 0

    t0 = steps * cfg.dt
    log.info(f"Spin-up settled at t0={t0:.4g} (||grad u||={h1:.4g})")
    return SpinUpResult(
        state=SpectralVectorField.from_coeffs(grid, c, div_free=True, enforce=False),
        t0=t0,
        h1_bound=bound,
        h1_final=h1,
        steps=steps,
    )


def energy_budget(traj: Trajectory, nu: float) -> np.ndarray:
    """Per-interval residual ||u(t+d)||^2 - ||u(t)||^2 + 2 nu int ||grad u||^2 for f = 0."""
    e = traj.l2_series() ** 2
    d = traj.h1_series() ** 2
    if traj.n_samples < 2:
        return np.zeros(0)
    dissipation = np.array(
        [
            trapezoid(d[i : i + 2], dx=traj.dt_sample)
            for i in range(traj.n_samples - 1)
        ]
    )
    return np.diff(e) + 2.0 * nu * dissipation
