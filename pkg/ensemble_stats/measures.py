"""Empirical trajectory statistical solutions: sampling, push-forwards, shifts and evaluations.

Member computations are independent; they run in worker threads bounded by a
semaphore and are reassembled in member order.
"""

from __future__ import annotations

import asyncio
import math
from typing import Callable, Sequence, TypeVar

import numpy as np
from loguru import logger as log
from tqdm.asyncio import tqdm_asyncio

from Config import config
from ensemble_stats.models import (
    AttractorAtoms,
    EmpiricalMeasure,
    EnsembleMemberError,
    GaussianModes,
    InitialMeasureKind,
    Provenance,
)
from interpolants.build import InterpolantOp
from nse_dynamics.attractor import in_absorbing_ball, spin_up_to_absorbing
from nse_dynamics.models import Forcing, SolverConfig, Trajectory
from nse_dynamics.solver import grashof, integrate
from nudging.determining_map import solve_Wplus
from nudging.models import NoiseSpec, NudgingConfig, ObservationStream
from nudging.observe import observe
from spectral_core.fields import SpectralVectorField
from spectral_core.grid import TorusGrid
from spectral_core.operators import energy_density
from spectral_core.random_fields import random_divfree_field

T = TypeVar("T")
R = TypeVar("R")


async def map_members(
    fn: Callable[[int, T], R],
    items: Sequence[T],
    jobs: int | None = None,
    desc: str = "members",
) -> list[R]:
    """fn(i, item) for every member, at most ``jobs`` at a time, results in member order."""
    sem = asyncio.Semaphore(max(1, jobs or config.NUDGE_NSE_JOBS))

    async def run(i: int, item: T) -> R:
        async with sem:
            try:
                return await asyncio.to_thread(fn, i, item)
            except EnsembleMemberError:
                raise
            except Exception as exc:
                raise EnsembleMemberError(i, exc) from exc

    return await tqdm_asyncio.gather(
        *[run(i, item) for i, item in enumerate(items)], desc=desc
    )


def _member_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _gaussian_draw(
    grid: TorusGrid, kind: GaussianModes | AttractorAtoms, seed: int
) -> SpectralVectorField:
    """One draw rescaled to a random H1 radius in [R/4, R]."""
    rng = np.random.default_rng(seed)
    u = random_divfree_field(grid, kind.spectrum, seed)
    h1 = math.sqrt(float(energy_density(grid, u.coeffs, power=1)))
    if h1 == 0:
        return u
    return u * (kind.radius * rng.uniform(0.25, 1.0) / h1)


async def sample_initial_measure_async(
    kind: InitialMeasureKind,
    n: int,
    grid: TorusGrid,
    seed: int = 0,
    f: Forcing | None = None,
    cfg: SolverConfig | None = None,
    jobs: int | None = None,
) -> list[SpectralVectorField]:
    if n < 1:
        raise ValueError("an initial measure needs n >= 1 samples")
    draws = [_gaussian_draw(grid, kind, s) for s in _member_seeds(seed, n)]
    if isinstance(kind, GaussianModes):
        return draws
    if f is None or cfg is None:
        raise ValueError("atoms_on_attractor needs the forcing and solver config")
    G = grashof(f, cfg.viscosity_nu, grid.kappa0)

    def settle(i: int, u0: SpectralVectorField) -> SpectralVectorField:
        return spin_up_to_absorbing(u0, f, cfg, G, max_time=kind.max_time).state

    log.info(f"Spinning up {n} initial states to the absorbing ball (G={G:.4g})")
    return await map_members(settle, draws, jobs, desc="Spin-up")


def sample_initial_measure(
    kind: InitialMeasureKind,
    n: int,
    grid: TorusGrid,
    seed: int = 0,
    f: Forcing | None = None,
    cfg: SolverConfig | None = None,
    jobs: int | None = None,
) -> list[SpectralVectorField]:
    return asyncio.run(sample_initial_measure_async(kind, n, grid, seed, f, cfg, jobs))


async def push_forward_S_async(
    init: Sequence[SpectralVectorField],
    f: Forcing,
    cfg: SolverConfig,
    t_final: float,
    stride: int = 1,
    t0: float = 0.0,
    jobs: int | None = None,
) -> EmpiricalMeasure:
    if not init:
        raise ValueError("an empirical measure needs at least one atom")

    def run(i: int, u0: SpectralVectorField) -> Trajectory:
        return integrate(u0, f, cfg, t_final, sample_stride=stride, t0=t0)

    atoms = await map_members(run, list(init), jobs, desc="Push-forward S")
    return EmpiricalMeasure(atoms=tuple(atoms), provenance=Provenance.PUSHFORWARD_S)


def push_forward_S(
    init: Sequence[SpectralVectorField],
    f: Forcing,
    cfg: SolverConfig,
    t_final: float,
    stride: int = 1,
    t0: float = 0.0,
    jobs: int | None = None,
) -> EmpiricalMeasure:
    return asyncio.run(push_forward_S_async(init, f, cfg, t_final, stride, t0, jobs))


def observe_measure(
    mu: EmpiricalMeasure, op: InterpolantOp, noise: NoiseSpec | None = None
) -> EmpiricalMeasure:
    """J applied atomwise; member i gets noise seed noise.seed + i."""
    streams = []
    for i, atom in enumerate(mu.atoms):
        member_noise = (
            None if noise is None else noise.model_copy(update={"seed": noise.seed + i})
        )
        streams.append(observe(atom, op, member_noise))
    return EmpiricalMeasure(
        atoms=tuple(streams), provenance=Provenance.PUSHFORWARD_J, shift=mu.shift
    )


def _warn_outside_ball(mu: EmpiricalMeasure, f: Forcing, cfg: SolverConfig) -> None:
    nu = cfg.viscosity_nu
    kappa0 = mu.grid.kappa0
    G = grashof(f, nu, kappa0)
    outside = [
        i for i, a in enumerate(mu.atoms) if not in_absorbing_ball(a, G, nu, kappa0).inside
    ]
    if outside:
        log.warning(
            f"{len(outside)}/{mu.n_atoms} atoms leave the absorbing ball "
            f"(first: member {outside[0]})"
        )


async def assimilate_streams_async(
    streams: Sequence[ObservationStream],
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    w0s: Sequence[SpectralVectorField | None] | None = None,
    jobs: int | None = None,
) -> EmpiricalMeasure:
    """W+ applied to each stream, optionally from member-specific initial states."""
    if not streams:
        raise ValueError("an empirical measure needs at least one atom")
    starts = list(w0s) if w0s is not None else [None] * len(streams)
    if len(starts) != len(streams):
        raise ValueError("one initial state per stream is required")

    def run(i: int, v: ObservationStream) -> Trajectory:
        return solve_Wplus(v, f, cfg, ncfg, w0=starts[i])

    atoms = await map_members(run, list(streams), jobs, desc="Push-forward W+")
    return EmpiricalMeasure(atoms=tuple(atoms), provenance=Provenance.PUSHFORWARD_WJ)


async def push_forward_WJ_async(
    mu: EmpiricalMeasure,
    op: InterpolantOp,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    noise: NoiseSpec | None = None,
    jobs: int | None = None,
) -> EmpiricalMeasure:
    """(W+ o J) mu; atom i of the result is paired with atom i of mu."""
    _warn_outside_ball(mu, f, cfg)
    observed = observe_measure(mu, op, noise)
    return await assimilate_streams_async(observed.atoms, f, cfg, ncfg, jobs=jobs)


def push_forward_WJ(
    mu: EmpiricalMeasure,
    op: InterpolantOp,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    noise: NoiseSpec | None = None,
    jobs: int | None = None,
) -> EmpiricalMeasure:
    return asyncio.run(push_forward_WJ_async(mu, op, f, cfg, ncfg, noise, jobs))


def shift_measure(mu: EmpiricalMeasure, t: float) -> EmpiricalMeasure:
    """tau_t applied atomwise."""
    if t == 0:
        return mu
    return EmpiricalMeasure(
        atoms=tuple(a.shifted(t) for a in mu.atoms),
        provenance=Provenance.SHIFTED,
        shift=mu.shift + t,
    )


def eval_measure(mu: EmpiricalMeasure, t: float) -> list[SpectralVectorField]:
    """E_t applied atomwise, t measured from the atoms' start time."""
    return [a.state_at(a.t0 + t) for a in mu.atoms]


def evaluation_measure(mu: EmpiricalMeasure, t: float) -> EmpiricalMeasure:
    """E_t mu as single-sample atoms, for transport with the l2_state ground metric."""
    atoms = tuple(
        Trajectory(grid=mu.grid, t0=0.0, dt_sample=0.0, states=(s,))
        for s in eval_measure(mu, t)
    )
    return EmpiricalMeasure(atoms=atoms, provenance=mu.provenance, shift=mu.shift + t)
