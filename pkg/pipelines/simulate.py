"""Forward simulation: optional spin-up, integration, snapshots and an energy table."""

from __future__ import annotations

import asyncio
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from loguru import logger as log
from prefect import flow, task
from prefect.cache_policies import NO_CACHE
from pydantic import BaseModel

from io_persistence.diagnostics import write_report
from io_persistence.run_config import RunConfigFile
from io_persistence.snapshots import write_trajectory
from nse_dynamics.attractor import in_absorbing_ball
from nse_dynamics.models import Trajectory
from nse_dynamics.solver import integrate
from pipelines.context import RunContext, build_context, initial_state, settled_state

ENERGY_COLUMNS = ["t", "energy", "enstrophy", "l2_norm", "h1_norm", "h2_norm"]


class EnergySeries(BaseModel):
    """Per-sample energy 1/2 ||u||^2 and enstrophy 1/2 ||grad u||^2."""

    times: list[float]
    l2_norm: list[float]
    h1_norm: list[float]
    h2_norm: list[float]

    @classmethod
    def from_trajectory(cls, traj: Trajectory) -> EnergySeries:
        return cls(
            times=[float(t) for t in traj.times],
            l2_norm=[float(x) for x in traj.l2_series()],
            h1_norm=[float(x) for x in traj.h1_series()],
            h2_norm=[float(x) for x in traj.h2_series()],
        )

    def to_frame(self) -> pd.DataFrame:
        l2 = np.asarray(self.l2_norm)
        h1 = np.asarray(self.h1_norm)
        return pd.DataFrame(
            {
                "t": self.times,
                "energy": 0.5 * l2**2,
                "enstrophy": 0.5 * h1**2,
                "l2_norm": self.l2_norm,
                "h1_norm": self.h1_norm,
                "h2_norm": self.h2_norm,
            },
            columns=ENERGY_COLUMNS,
        )


def run_simulation(ctx: RunContext) -> Trajectory:
    u0, elapsed = settled_state(ctx, initial_state(ctx))
    run = ctx.cfg.run
    return integrate(
        u0, ctx.forcing, ctx.solver, run.t_final, sample_stride=run.sample_stride, t0=elapsed
    )


@task(name="Integrate NSE", retries=0, cache_policy=NO_CACHE)
async def integrate_task(ctx: RunContext) -> Trajectory:
    return await asyncio.to_thread(run_simulation, ctx)


@task(name="Write simulation outputs", retries=1, retry_delay_seconds=5, cache_policy=NO_CACHE)
async def write_simulation_task(ctx: RunContext, traj: Trajectory) -> list[str]:
    out = ctx.output_dir
    paths = write_report(
        EnergySeries.from_trajectory(traj), out, "energy", ctx.cfg.output.formats
    )
    if ctx.cfg.output.write_trajectories:
        paths.append(write_trajectory(traj, out / "trajectory.snp"))
    return [str(p) for p in paths]


@flow(name="Simulate NSE")
async def simulate_flow(
    cfg: RunConfigFile, output_dir: str, seed: int = 0, jobs: int | None = None
) -> dict[str, Any]:
    log.info("Starting simulation")
    ctx = build_context(cfg, Path(output_dir), seed, jobs)
    traj = await integrate_task(ctx)
    absorbing = in_absorbing_ball(traj, ctx.G, ctx.nu, ctx.kappa0, ctx.cfg.nudging.constants.c_L)
    if ctx.G > 0 and not absorbing.inside:
        log.warning(
            f"Trajectory leaves the absorbing ball: max ||grad u||={absorbing.h1_max:.4g} "
            f"(bound {absorbing.h1_bound:.4g})"
        )
    files = await write_simulation_task(ctx, traj)
    log.info(f"Finished simulation: {traj.n_samples} samples on [{traj.t0:.4g}, {traj.t_end:.4g}]")
    return {
        "samples": traj.n_samples,
        "t0": traj.t0,
        "t_end": traj.t_end,
        "grashof": ctx.G,
        "final_h1": float(traj.h1_series()[-1]),
        "inside_absorbing_ball": absorbing.inside,
        "files": files,
    }
