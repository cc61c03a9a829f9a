"""Verification suites: analytic and property oracles for every layer of the toolbox.

Each suite returns CheckResults; a suite never raises on a failed check, only
on broken inputs.
"""

from __future__ import annotations

import asyncio
import math
from typing import Callable, Literal

import numpy as np
import pandas as pd
from loguru import logger as log
from prefect import flow, task
from prefect.cache_policies import NO_CACHE
from pydantic import BaseModel, Field

from ensemble_stats.models import EmpiricalMeasure, GroundMetric, Provenance
from ensemble_stats.transport import brute_force_distance, cost_matrix, kantorovich
from interpolants.bounds import constants_across_h, oscillation_survey, spread
from interpolants.build import build_interpolant
from interpolants.models import BoundId, InterpolantSpec, ModalKind, NodalKind, VolumeAverageKind
from nse_dynamics.attractor import energy_budget
from nse_dynamics.models import Forcing, SolverConfig, Trajectory
from nse_dynamics.solver import integrate, make_kolmogorov_forcing
from nudging.diagnostics import frechet_check
from nudging.models import NudgingConfig
from nudging.observe import observe
from spectral_core.fields import to_physical
from spectral_core.grid import make_grid
from spectral_core.operators import bilinear_B, inner_product, leray_project, norms, stokes_apply
from spectral_core.random_fields import EnergySpectrum, random_divfree_field, taylor_green

Suite = Literal["spectral", "dynamics", "interpolant", "frechet", "transport", "all"]
SUITES = ("spectral", "dynamics", "interpolant", "frechet", "transport")
H1_SPREAD_LIMIT = 2.5


class CheckResult(BaseModel):
    suite: str
    name: str
    value: float
    threshold: float
    passed: bool
    detail: str = ""


class VerifyReport(BaseModel):
    seed: int = 0
    checks: list[CheckResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [c.model_dump() for c in self.checks],
            columns=["suite", "name", "value", "threshold", "passed", "detail"],
        )


def _at_most(suite: str, name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(
        suite=suite,
        name=name,
        value=float(value),
        threshold=threshold,
        passed=bool(value <= threshold),
        detail=detail,
    )


def _at_least(suite: str, name: str, value: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(
        suite=suite,
        name=name,
        value=float(value),
        threshold=threshold,
        passed=bool(value >= threshold),
        detail=detail,
    )


def _unit_h1(grid, seed: int):
    u = random_divfree_field(grid, EnergySpectrum(), seed)
    return u * (1.0 / norms(u).h1)


def spectral_suite(seed: int = 0, n_fields: int = 100) -> list[CheckResult]:
    grid = make_grid(64, 2 * math.pi)
    worst_l2 = worst_h1 = worst_proj = worst_parseval = 0.0
    for i in range(n_fields):
        u = random_divfree_field(grid, EnergySpectrum(), seed + i)
        b = bilinear_B(u, u)
        nb, nu_ = norms(b), norms(u)
        worst_l2 = max(worst_l2, abs(inner_product(b, u)) / (nb.l2 * nu_.l2))
        worst_h1 = max(worst_h1, abs(inner_product(b, stokes_apply(u))) / (nb.l2 * nu_.h2))
        pu = leray_project(u)
        worst_proj = max(worst_proj, norms(pu - u).l2 / nu_.l2)
        samples = to_physical(u).samples
        physical = math.sqrt(float(np.sum(samples**2)) * grid.dx**2)
        worst_parseval = max(worst_parseval, abs(physical - nu_.l2) / nu_.l2)
    return [
        _at_most("spectral", "advection orthogonal to u", worst_l2, 1e-10),
        _at_most("spectral", "advection orthogonal to Au", worst_h1, 1e-10),
        _at_most("spectral", "Leray projection fixes div-free fields", worst_proj, 1e-12),
        _at_most("spectral", "Parseval", worst_parseval, 1e-12),
    ]


def dynamics_suite(seed: int = 0) -> list[CheckResult]:
    results = []
    grid = make_grid(32, 2 * math.pi)
    nu, t_final, dt = 0.1, 1.0, 1e-3
    u0 = taylor_green(grid)
    traj = integrate(u0, Forcing.none(grid), SolverConfig(viscosity_nu=nu, dt=dt), t_final, 100)
    exact = u0 * math.exp(-2 * nu * t_final)
    err = norms(traj.final - exact).l2 / norms(exact).l2
    results.append(_at_most("dynamics", "Taylor-Green decay exp(-2 nu t)", err, 1e-5))

    # self-convergence of if_rk2 on a forced flow
    f = make_kolmogorov_forcing(grid, nu, 5.0, 2)
    v0 = _unit_h1(grid, seed)
    finals = []
    for step in (2e-2, 1e-2, 5e-3):
        cfg = SolverConfig(viscosity_nu=nu, dt=step)
        n = round(0.5 / step)
        finals.append(integrate(v0, f, cfg, 0.5, n).final)
    ratio = norms(finals[0] - finals[1]).l2 / norms(finals[1] - finals[2]).l2
    results.append(_at_least("dynamics", "if_rk2 error ratio on halving dt", ratio, 3.5))

    unforced = integrate(v0, Forcing.none(grid), SolverConfig(viscosity_nu=nu, dt=dt), 0.5, 1)
    residual = float(np.max(np.abs(energy_budget(unforced, nu))))
    scale = norms(v0).l2 ** 2
    results.append(_at_most("dynamics", "energy law residual (relative)", residual / scale, 1e-3))
    return results


def interpolant_suite(seed: int = 0, n_draws: int = 1000) -> list[CheckResult]:
    grid = make_grid(64, 2 * math.pi)
    L = grid.period_L
    scales = (L / 8, L / 16, L / 32)
    results = []
    # h1type1 runs from ~1 on fields rough at scale h to ~sqrt(h/eps) on smooth ones
    for label, make_kind, bound, limit in (
        ("volume_avg type1", lambda h: VolumeAverageKind(h=h), BoundId.TYPE1, 1.5),
        ("nodal type2b", lambda h: NodalKind(h=h), BoundId.TYPE2B, 1.5),
        ("volume_avg h1type1", lambda h: VolumeAverageKind(h=h), BoundId.H1TYPE1, H1_SPREAD_LIMIT),
    ):
        constants = constants_across_h(grid, make_kind, bound, scales, n_samples=30, seed=seed)
        results.append(
            _at_most(
                "interpolant",
                f"{label} constant stable across h",
                spread(constants),
                limit,
                detail=", ".join(f"{c:.4g}" for c in constants),
            )
        )
    survey = oscillation_survey(grid, n_draws, seed)
    results.append(_at_most("interpolant", "oscillation inequality violations", survey.violations, 0))
    return results


def frechet_suite(seed: int = 0) -> list[CheckResult]:
    grid = make_grid(32, 2 * math.pi)
    nu = 0.5
    cfg = SolverConfig(viscosity_nu=nu, dt=1e-2)
    f = make_kolmogorov_forcing(grid, nu, 5.0, 2)
    op = build_interpolant(InterpolantSpec(kind=ModalKind(n_obs_modes=4), grid=grid))
    u = integrate(_unit_h1(grid, seed) * nu, f, cfg, 4.0, 5)
    other = integrate(_unit_h1(grid, seed + 1) * nu, f, cfg, 4.0, 5)
    ncfg = NudgingConfig(beta=10.0, interpolant=op, rho=10.0)
    report = frechet_check(observe(u, op), observe(other, op), f, cfg, ncfg)
    return [
        CheckResult(
            suite="frechet",
            name="remainder slope in Y",
            value=report.slope,
            threshold=2.0,
            passed=report.passed,
            detail=f"tolerance {report.tolerance}",
        )
    ]


def _point_measure(grid, seeds: list[int]) -> EmpiricalMeasure:
    atoms = tuple(
        Trajectory(grid=grid, t0=0.0, dt_sample=0.0, states=(random_divfree_field(grid, EnergySpectrum(), s),))
        for s in seeds
    )
    return EmpiricalMeasure(atoms=atoms, provenance=Provenance.INITIAL_SAMPLE)


def transport_suite(seed: int = 0, n_pairs: int = 20, n_atoms: int = 5) -> list[CheckResult]:
    grid = make_grid(16, 2 * math.pi)
    worst = 0.0
    for p in range(n_pairs):
        base = seed + 1000 * p
        a = _point_measure(grid, [base + i for i in range(n_atoms)])
        b = _point_measure(grid, [base + 500 + i for i in range(n_atoms)])
        exact = kantorovich(a, b, GroundMetric.L2_STATE).distance
        brute = brute_force_distance(cost_matrix(a, b, GroundMetric.L2_STATE))
        worst = max(worst, abs(exact - brute))
    return [_at_most("transport", "assignment equals permutation search", worst, 1e-12)]


SUITE_RUNNERS: dict[str, Callable[[int], list[CheckResult]]] = {
    "spectral": spectral_suite,
    "dynamics": dynamics_suite,
    "interpolant": interpolant_suite,
    "frechet": frechet_suite,
    "transport": transport_suite,
}


def run_suites(suite: Suite = "all", seed: int = 0) -> VerifyReport:
    names = SUITES if suite == "all" else (suite,)
    report = VerifyReport(seed=seed)
    for name in names:
        if name not in SUITE_RUNNERS:
            raise ValueError(f"unknown suite {name!r}; expected one of {SUITES + ('all',)}")
        log.info(f"Running {name} suite")
        report.checks.extend(SUITE_RUNNERS[name](seed))
    return report


@task(name="Verification suite", retries=0, cache_policy=NO_CACHE)
async def suite_task(name: str, seed: int) -> list[CheckResult]:
    return await asyncio.to_thread(SUITE_RUNNERS[name], seed)


@flow(name="Verify")
async def verify_flow(suite: Suite = "all", seed: int = 0) -> VerifyReport:
    names = SUITES if suite == "all" else (suite,)
    report = VerifyReport(seed=seed)
    for name in names:
        checks = await suite_task(name, seed)
        failed = [c.name for c in checks if not c.passed]
        if failed:
            log.warning(f"{name}: failed {failed}")
        else:
            log.info(f"{name}: all {len(checks)} checks passed")
        report.checks.extend(checks)
    return report
