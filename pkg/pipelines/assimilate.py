"""Twin experiments: observe a reference run, nudge from zero and report synchronization."""

from __future__ import annotations

import asyncio
import math
from pathlib import Path
from typing import Any

from loguru import logger as log
from prefect import flow, task
from prefect.cache_policies import NO_CACHE
from pydantic import BaseModel, ConfigDict

from io_persistence.diagnostics import write_json, write_report
from io_persistence.run_config import RunConfigFile
from io_persistence.snapshots import read_trajectory, write_trajectory
from nse_dynamics.models import InsufficientSpanError, Trajectory
from nudging.determining_map import (
    check_forgetting,
    default_burn_in,
    solve_W_burnin,
    solve_Wplus,
)
from nudging.diagnostics import sync_report
from nudging.models import ForgettingCheck, NudgingConfig, ObservationStream, ParamAdvice, SyncReport
from nudging.observe import check_observation_ball, observe, x_norm
from pipelines.context import RunContext, build_context, resolve_nudging
from pipelines.simulate import run_simulation


class AssimilationResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    reference: Trajectory
    stream: ObservationStream
    assimilated: Trajectory
    ncfg: NudgingConfig
    report: SyncReport
    advice: ParamAdvice | None = None
    forgetting: ForgettingCheck | None = None


def reference_trajectory(ctx: RunContext) -> Trajectory:
    """The configured reference file, or a fresh run of the configured flow (twin experiment)."""
    path = ctx.cfg.nudging.reference_path
    if path:
        log.info(f"Reading reference trajectory from {path}")
        return read_trajectory(ctx.resolve(path), ctx.grid)
    return run_simulation(ctx)


def _burn_in_window(u: Trajectory, t_burn: float) -> float:
    """First sample time at least t_burn after the start of the reference."""
    k = math.ceil(t_burn / u.dt_sample - 1e-9)
    t_start = u.t0 + k * u.dt_sample
    if t_start >= u.t_end:
        raise InsufficientSpanError(
            f"burn-in of {t_burn:.4g} leaves nothing of the reference on "
            f"[{u.t0:.4g}, {u.t_end:.4g}]"
        )
    return t_start


def run_assimilation(ctx: RunContext, u: Trajectory | None = None) -> AssimilationResult:
    n = ctx.cfg.nudging
    u = reference_trajectory(ctx) if u is None else u
    v = observe(u, ctx.op, n.noise)
    ncfg, advice = resolve_nudging(ctx, measured=x_norm(v, ctx.nu))
    check_observation_ball(v, ctx.nu, ncfg.rho)

    forgetting = None
    if n.mode == "burnin":
        t_burn = n.t_burn or default_burn_in(ncfg.beta, ctx.nu, ctx.kappa0)
        t_start = _burn_in_window(u, t_burn)
        w = solve_W_burnin(v, ctx.forcing, ctx.solver, ncfg, t_burn, t_start)
        u = u.since(t_start)
        if v.t0 <= t_start - 2 * t_burn:
            forgetting = check_forgetting(v, ctx.forcing, ctx.solver, ncfg, t_burn, t_start)
        else:
            log.info("Reference too short to double the burn-in; skipping the forgetting check")
    else:
        w = solve_Wplus(v, ctx.forcing, ctx.solver, ncfg)

    report = sync_report(w, u, ncfg, ctx.nu, G=ctx.G)
    return AssimilationResult(
        reference=u,
        stream=v,
        assimilated=w,
        ncfg=ncfg,
        report=report,
        advice=advice,
        forgetting=forgetting,
    )


@task(name="Nudged solve", retries=0, cache_policy=NO_CACHE)
async def assimilate_task(ctx: RunContext) -> AssimilationResult:
    return await asyncio.to_thread(run_assimilation, ctx)


@task(name="Write assimilation outputs", retries=1, retry_delay_seconds=5, cache_policy=NO_CACHE)
async def write_assimilation_task(ctx: RunContext, result: AssimilationResult) -> list[str]:
    out = ctx.output_dir
    paths = write_report(result.report, out, "sync_report", ctx.cfg.output.formats)
    if result.advice is not None:
        paths.append(write_json(result.advice, out / "param_advice.json"))
    if result.forgetting is not None:
        paths.append(write_json(result.forgetting, out / "forgetting_check.json"))
    if ctx.cfg.output.write_trajectories:
        paths.append(write_trajectory(result.reference, out / "reference.snp"))
        paths.append(write_trajectory(result.assimilated, out / "assimilated.snp"))
    return [str(p) for p in paths]


@flow(name="Assimilate")
async def assimilate_flow(
    cfg: RunConfigFile, output_dir: str, seed: int = 0, jobs: int | None = None
) -> dict[str, Any]:
    log.info("Starting assimilation")
    ctx = build_context(cfg, Path(output_dir), seed, jobs)
    result = await assimilate_task(ctx)
    files = await write_assimilation_task(ctx, result)
    report = result.report
    admissible = result.ncfg.admissibility(ctx.G)
    log.info(f"Finished assimilation: {report.decay_orders:.2f} decades of decay")
    return {
        "beta": result.ncfg.beta,
        "rho": result.ncfg.rho,
        "grashof": ctx.G,
        "admissible": admissible.ok,
        "decay_orders": report.decay_orders,
        "fitted_rate": report.fitted_rate,
        "bound_rate": report.bound_rate,
        "threshold_time": report.threshold_time,
        "flags": report.flags,
        "forgetting_passed": None if result.forgetting is None else result.forgetting.passed,
        "files": files,
    }
