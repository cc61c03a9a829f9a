"""Pseudo-spectral time stepping for du/dt + nu A u + B(u, u) = f (+ extra terms)."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from loguru import logger as log

from Config import config
from nse_dynamics.models import Forcing, Integrator, SolverConfig, Trajectory
from spectral_core.fields import (
    PhysicalVectorField,
    SpectralVectorField,
    coeffs_to_samples,
    to_spectral,
)
from spectral_core.grid import TorusGrid
from spectral_core.operators import advection_coeffs, energy_density, project_coeffs

Rhs = Callable[[np.ndarray, float], np.ndarray]


class BlowUpError(RuntimeError):
    """The state became non-finite or its energy grew past the guard factor."""

    def __init__(self, t: float, reason: str = "non-finite state"):
        self.t = t
        super().__init__(f"blow-up or unstable dt at t={t:.6g} ({reason})")


def grashof(f: Forcing, nu: float, kappa0: float) -> float:
    return f.l2() / (nu**2 * kappa0**2)


def make_kolmogorov_forcing(
    grid: TorusGrid, nu: float, grashof_number: float, wavenumber: int = 4
) -> Forcing:
    """Shear forcing (A sin(k_f kappa0 y), 0) scaled to the requested Grashof number."""
    if not 1 <= wavenumber <= grid.dealias_cutoff:
        raise ValueError(
            f"forcing wavenumber must lie in [1, {grid.dealias_cutoff}], got {wavenumber}"
        )
    amplitude = grashof_number * nu**2 * grid.kappa0**2 * math.sqrt(2.0 / grid.area)
    _, y = grid.coords
    samples = np.stack(
        [amplitude * np.sin(wavenumber * grid.kappa0 * y), np.zeros_like(y)]
    )
    g = to_spectral(PhysicalVectorField(grid=grid, samples=samples), div_free=True)
    return Forcing.from_field(g)


class SpectralStepper:
    """One step of du/dt = -L u + N(u, t) with L diagonal in Fourier space.

    ``if_rk2`` is the integrating-factor midpoint rule; ``imex_euler`` treats L
    implicitly and N explicitly. ``damping`` adds to the viscous rate nu|k|^2
    (the modal nudging term uses it).
    """

    def __init__(
        self, grid: TorusGrid, cfg: SolverConfig, damping: np.ndarray | float = 0.0
    ):
        self.grid = grid
        self.dt = cfg.dt
        self.integrator = cfg.integrator
        rate = cfg.viscosity_nu * grid.k2 + damping
        if self.integrator is Integrator.IF_RK2:
            self._half = np.exp(-0.5 * self.dt * rate)
            self._full = self._half * self._half
        else:
            self._implicit = 1.0 / (1.0 + self.dt * rate)

    def advance(self, c: np.ndarray, rhs: Rhs, t: float) -> np.ndarray:
        dt = self.dt
        if self.integrator is Integrator.IF_RK2:
            k1 = rhs(c, t)
            mid = self._half * (c + 0.5 * dt * k1)
            k2 = rhs(mid, t + 0.5 * dt)
            return self._full * c + dt * self._half * k2
        return self._implicit * (c + dt * rhs(c, t))


def nse_rhs(
    grid: TorusGrid, f: Forcing, cfg: SolverConfig, extra: Rhs | None = None
) -> Rhs:
    forcing = f.f.coeffs

    def rhs(c: np.ndarray, t: float) -> np.ndarray:
        out = forcing - advection_coeffs(grid, c, c, dealias=cfg.dealias)
        if extra is not None:
            out = out + extra(c, t)
        return out

    return rhs


def steps_for(t_span: float, dt: float) -> int:
    if t_span < 0:
        raise ValueError(f"time span must be non-negative, got {t_span}")
    n = int(round(t_span / dt))
    if abs(n * dt - t_span) > 1e-6 * dt:
        log.debug(f"time span {t_span} rounded to {n} steps of {dt}")
    return n


def march(
    c0: np.ndarray,
    stepper: SpectralStepper,
    rhs: Rhs,
    t0: float,
    n_steps: int,
    stride: int,
    energy_ref: float,
) -> np.ndarray:
    """Advance c0 by n_steps, returning samples every ``stride`` steps (first included).

    The leading state (``c[0]`` when ``c0`` carries a batch axis) is the one
    watched for CFL; every entry is watched for blow-up.
    """
    if stride < 1:
        raise ValueError("sample_stride must be at least 1")
    if n_steps % stride != 0:
        raise ValueError(
            f"{n_steps} steps is not a multiple of sample_stride={stride}"
        )
    grid = stepper.grid
    n_samples = n_steps // stride + 1
    out = np.empty((n_samples,) + c0.shape, dtype=np.complex128)
    c = np.array(c0, dtype=np.complex128, copy=True)
    out[0] = c
    limit = config.BLOWUP_GROWTH_FACTOR * max(energy_ref, 1e-300)
    cfl_warned = False

    for step in range(1, n_steps + 1):
        t = t0 + (step - 1) * stepper.dt
        c = stepper.advance(c, rhs, t)
        if not np.all(np.isfinite(c)):
            raise BlowUpError(t + stepper.dt)
        if step % stride == 0:
            energy = float(np.max(energy_density(grid, c)))
            if energy > limit:
                raise BlowUpError(t + stepper.dt, f"energy grew to {energy:.3e}")
            if not cfl_warned:
                lead = c if c.ndim == 3 else c.reshape((-1,) + c.shape[-3:])[0]
                samples = coeffs_to_samples(lead)
                umax = float(np.sqrt(np.max(samples[0] ** 2 + samples[1] ** 2)))
                courant = stepper.dt * umax * grid.n_modes / grid.period_L
                if courant > config.CFL_LIMIT:
                    log.warning(
                        f"CFL advisory: dt*max|u|*N/L = {courant:.3f} > "
                        f"{config.CFL_LIMIT} at t={t + stepper.dt:.4g}"
                    )
                    cfl_warned = True
            out[step // stride] = c
    return out


def energy_reference(u0: np.ndarray, f: Forcing, cfg: SolverConfig) -> float:
    """Energy scale the blow-up guard compares against."""
    g = f.grid
    steady = (f.l2() / (cfg.viscosity_nu * g.kappa0**2)) ** 2
    return max(float(np.max(energy_density(g, u0))), steady)


def step(
    u: SpectralVectorField,
    f: Forcing,
    cfg: SolverConfig,
    extra_rhs: SpectralVectorField | None = None,
    t: float = 0.0,
) -> SpectralVectorField:
    """Advance one timestep; ``extra_rhs`` is held fixed over the step."""
    u.grid.require_same(f.grid, "forcing")
    grid = u.grid
    extra = None
    if extra_rhs is not None:
        grid.require_same(extra_rhs.grid, "extra_rhs")
        held = project_coeffs(grid, extra_rhs.coeffs)

        def extra(c: np.ndarray, s: float) -> np.ndarray:
            return held

    stepper = SpectralStepper(grid, cfg)
    c = stepper.advance(u.coeffs, nse_rhs(grid, f, cfg, extra), t)
    if not np.all(np.isfinite(c)):
        raise BlowUpError(t + cfg.dt)
    return SpectralVectorField.from_coeffs(grid, c, div_free=True, enforce=False)


def integrate(
    u0: SpectralVectorField,
    f: Forcing,
    cfg: SolverConfig,
    t_final: float,
    sample_stride: int = 1,
    t0: float = 0.0,
) -> Trajectory:
    """S(t)u0 sampled every ``sample_stride`` steps on [t0, t0 + t_final]."""
    u0.grid.require_same(f.grid, "forcing")
    grid = u0.grid
    n_steps = steps_for(t_final, cfg.dt)
    stepper = SpectralStepper(grid, cfg)
    samples = march(
        u0.coeffs,
        stepper,
        nse_rhs(grid, f, cfg),
        t0,
        n_steps,
        sample_stride,
        energy_reference(u0.coeffs, f, cfg),
    )
    return Trajectory.from_stack(grid, t0, cfg.dt * sample_stride, samples)
