"""Ensemble experiments: push-forwards of an initial measure, decay and determining reports."""

from __future__ import annotations

from pathlib import Path
from typing import Any, Sequence

import numpy as np
from loguru import logger as log
from prefect import flow, task
from prefect.cache_policies import NO_CACHE

from ensemble_stats.measures import (
    assimilate_streams_async,
    observe_measure,
    push_forward_S_async,
    sample_initial_measure_async,
)
from ensemble_stats.models import EmpiricalMeasure, MetricConfig
from ensemble_stats.reports import (
    decay_report_async,
    determining_report,
    lipschitz_transfer_report_async,
)
from io_persistence.diagnostics import write_report
from io_persistence.run_config import RunConfigFile
from io_persistence.snapshots import write_ensemble
from nse_dynamics.models import InsufficientSpanError
from nudging.models import NudgingConfig
from pipelines.context import RunContext, build_context, resolve_nudging


def default_t_grid(t_final: float, mcfg: MetricConfig, n_times: int) -> list[float]:
    """n_times shifts in [0, t_final - n_max * window], so every shifted atom still spans the metric."""
    room = t_final - mcfg.required_span
    if room < 0:
        raise InsufficientSpanError(
            f"t_final={t_final:.4g} is shorter than the metric span {mcfg.required_span:.4g}; "
            "raise run.t_final or lower metrics.n_max"
        )
    if n_times == 1:
        return [0.0]
    return [float(t) for t in np.linspace(0.0, room, n_times)]


def resolve_t_grid(ctx: RunContext, mcfg: MetricConfig, dt_sample: float) -> list[float]:
    ens = ctx.cfg.ensemble
    if ens.t_grid is not None:
        grid = list(ens.t_grid)
    else:
        grid = default_t_grid(ctx.cfg.run.t_final, mcfg, ens.n_times)
    # shifts land on samples
    return [round(t / dt_sample) * dt_sample for t in grid]


async def reference_measure(ctx: RunContext, seed: int) -> EmpiricalMeasure:
    ens = ctx.cfg.ensemble
    run = ctx.cfg.run
    init = await sample_initial_measure_async(
        ens.initial, ens.n_members, ctx.grid, seed, ctx.forcing, ctx.solver, ctx.jobs
    )
    return await push_forward_S_async(
        init, ctx.forcing, ctx.solver, run.t_final, run.sample_stride, 0.0, ctx.jobs
    )


@task(name="Reference ensemble", retries=0, cache_policy=NO_CACHE)
async def reference_measure_task(ctx: RunContext, seed: int) -> EmpiricalMeasure:
    return await reference_measure(ctx, seed)


@task(name="Decay report", retries=0, cache_policy=NO_CACHE)
async def decay_task(
    ctx: RunContext,
    mu: EmpiricalMeasure,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig,
):
    observed = observe_measure(mu, ctx.op, ctx.cfg.nudging.noise)
    assimilated = await assimilate_streams_async(
        observed.atoms, ctx.forcing, ctx.solver, ncfg, jobs=ctx.jobs
    )
    report = await decay_report_async(
        mu,
        ctx.op,
        ctx.forcing,
        ctx.solver,
        ncfg,
        t_grid,
        mcfg,
        ctx.cfg.nudging.noise,
        assimilated,
        ctx.jobs,
    )
    return observed, assimilated, report


@task(name="Determining report", retries=0, cache_policy=NO_CACHE)
async def determining_task(
    ctx: RunContext,
    observed: EmpiricalMeasure,
    assimilated: EmpiricalMeasure,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig,
):
    """Second assimilated ensemble from distinct initial states, same observation streams."""
    kind = ctx.cfg.ensemble.second_initial
    starts = await sample_initial_measure_async(
        kind, observed.n_atoms, ctx.grid, ctx.seed + 1, jobs=ctx.jobs
    )
    other = await assimilate_streams_async(
        observed.atoms, ctx.forcing, ctx.solver, ncfg, starts, ctx.jobs
    )
    return determining_report(assimilated, other, t_grid, mcfg, ncfg.beta)


@task(name="Lipschitz transfer report", retries=0, cache_policy=NO_CACHE)
async def transfer_task(
    ctx: RunContext,
    observed: EmpiricalMeasure,
    assimilated: EmpiricalMeasure,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig,
):
    """Compares against a second reference ensemble drawn with the next seed."""
    mu_b = await reference_measure(ctx, ctx.seed + 1)
    obs_b = observe_measure(mu_b, ctx.op, ctx.cfg.nudging.noise)
    out_b = await assimilate_streams_async(
        obs_b.atoms, ctx.forcing, ctx.solver, ncfg, jobs=ctx.jobs
    )
    return await lipschitz_transfer_report_async(
        observed,
        obs_b,
        assimilated,
        out_b,
        ctx.forcing,
        ctx.solver,
        ncfg,
        t_grid,
        mcfg,
        jobs=ctx.jobs,
    )


@flow(name="Ensemble decay")
async def ensemble_flow(
    cfg: RunConfigFile, output_dir: str, seed: int = 0, jobs: int | None = None
) -> dict[str, Any]:
    log.info("Starting ensemble experiment")
    ctx = build_context(cfg, Path(output_dir), seed, jobs)
    out = ctx.output_dir
    formats = cfg.output.formats
    mcfg = cfg.metric_config(ctx.grid)

    mu = await reference_measure_task(ctx, seed)
    t_grid = resolve_t_grid(ctx, mcfg, mu.atoms[0].dt_sample)
    ncfg, advice = resolve_nudging(ctx)
    observed, assimilated, decay = await decay_task(ctx, mu, ncfg, t_grid, mcfg)
    files = write_report(decay, out, "decay_report", formats)
    summary: dict[str, Any] = {
        "n_members": mu.n_atoms,
        "beta": ncfg.beta,
        "rho": ncfg.rho,
        "grashof": ctx.G,
        "t_grid": t_grid,
        "decay_flags": decay.flags,
        "gamma_H_initial": decay.rows[0].gamma_H if decay.rows else None,
        "gamma_H_final": decay.rows[-1].gamma_H if decay.rows else None,
    }
    if advice is not None:
        summary["beta_auto"] = True

    if cfg.ensemble.second_initial is not None:
        det = await determining_task(ctx, observed, assimilated, ncfg, t_grid, mcfg)
        files += write_report(det, out, "determining_report", formats)
        summary["determining_passed"] = det.passed
    if cfg.ensemble.transfer:
        transfer = await transfer_task(ctx, observed, assimilated, ncfg, t_grid, mcfg)
        files += write_report(transfer, out, "transfer_report", formats)
        summary["transfer_passed"] = transfer.passed

    if cfg.output.write_trajectories:
        files += write_ensemble(mu, out / "reference")
        files += write_ensemble(assimilated, out / "assimilated")
    summary["files"] = [str(p) for p in files]
    log.info("Finished ensemble experiment")
    return summary
