"""Objects every experiment driver derives from a validated run configuration."""

from __future__ import annotations

import math
from pathlib import Path

from loguru import logger as log
from pydantic import BaseModel, ConfigDict

from interpolants.build import InterpolantOp, build_interpolant
from io_persistence.run_config import RunConfigFile
from io_persistence.snapshots import read_snapshot
from nse_dynamics.attractor import spin_up_to_absorbing
from nse_dynamics.models import Forcing, SolverConfig
from nse_dynamics.solver import grashof
from nudging.advisor import advise_parameters, rho_floor_type1
from nudging.models import NudgingConfig, ParamAdvice
from spectral_core.fields import SpectralVectorField
from spectral_core.grid import TorusGrid
from spectral_core.operators import energy_density
from spectral_core.random_fields import random_divfree_field, taylor_green


class RunContext(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    cfg: RunConfigFile
    grid: TorusGrid
    solver: SolverConfig
    forcing: Forcing
    G: float
    op: InterpolantOp
    output_dir: Path
    seed: int = 0
    jobs: int | None = None

    @property
    def nu(self) -> float:
        return self.solver.viscosity_nu

    @property
    def kappa0(self) -> float:
        return self.grid.kappa0

    def resolve(self, path: str) -> Path:
        """Relative input paths are taken against the output directory."""
        p = Path(path)
        return p if p.is_absolute() else self.output_dir / p


def build_context(
    cfg: RunConfigFile, output_dir: Path, seed: int = 0, jobs: int | None = None
) -> RunContext:
    grid = cfg.build_grid()
    solver = cfg.solver_config()
    forcing = cfg.build_forcing(grid)
    G = grashof(forcing, solver.viscosity_nu, grid.kappa0)
    op = build_interpolant(cfg.interpolant_spec(grid))
    log.info(
        f"Run on N={grid.n_modes}, L={grid.period_L:.4g}, nu={solver.viscosity_nu:.4g}, "
        f"dt={solver.dt:.4g}, G={G:.4g}"
    )
    return RunContext(
        cfg=cfg,
        grid=grid,
        solver=solver,
        forcing=forcing,
        G=G,
        op=op,
        output_dir=Path(output_dir),
        seed=seed,
        jobs=jobs,
    )


def initial_state(ctx: RunContext) -> SpectralVectorField:
    init = ctx.cfg.initial
    grid = ctx.grid
    if init.kind == "zero":
        return SpectralVectorField.zeros(grid)
    if init.kind == "taylor_green":
        return taylor_green(grid, init.amplitude)
    if init.kind == "snapshot":
        return read_snapshot(ctx.resolve(init.path), grid).fields[0]
    u = random_divfree_field(grid, init.spectrum, ctx.seed)
    if init.radius is not None:
        h1 = math.sqrt(float(energy_density(grid, u.coeffs, power=1)))
        if h1 > 0:
            u = u * (init.radius / h1)
    return u


def settled_state(ctx: RunContext, u0: SpectralVectorField) -> tuple[SpectralVectorField, float]:
    """Spin u0 up into the absorbing ball when the run asks for it; returns (state, elapsed)."""
    run = ctx.cfg.run
    if not run.spin_up:
        return u0, 0.0
    result = spin_up_to_absorbing(
        u0, ctx.forcing, ctx.solver, ctx.G, max_time=run.spin_up_max_time
    )
    return result.state, result.t0


def resolve_rho(ctx: RunContext, measured: float | None = None) -> float:
    """Configured rho, else the attractor floor (1 + c~1) G raised to cover measured data."""
    n = ctx.cfg.nudging
    if n.rho is not None:
        return n.rho
    rho = rho_floor_type1(ctx.G, n.constants.c_tilde1)
    if measured is not None:
        rho = max(rho, measured * (1 + 1e-6))
    rho = max(rho, 1e-12)
    log.info(f"Observation-ball radius rho={rho:.4g} (auto)")
    return rho


def resolve_nudging(
    ctx: RunContext, measured: float | None = None
) -> tuple[NudgingConfig, ParamAdvice | None]:
    """NudgingConfig with auto rho/beta filled in; the advice is returned when beta was auto."""
    n = ctx.cfg.nudging
    rho = resolve_rho(ctx, measured)
    advice = None
    beta = n.beta
    if beta is None:
        advice = advise_parameters(ctx.G, rho, n.constants, ctx.kappa0)
        beta = advice.beta_min
        log.info(f"beta={beta:.6g} from the parameter advisor")
    ncfg = NudgingConfig(
        beta=beta, interpolant=ctx.op, rho=rho, h=None, constants=n.constants
    )
    return ncfg, advice
