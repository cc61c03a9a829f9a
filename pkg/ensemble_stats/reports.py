"""Decay, determining-parameters and Lipschitz-transfer reports over ensembles."""

from __future__ import annotations

import asyncio
import math
from typing import Sequence

import numpy as np
from loguru import logger as log

from ensemble_stats.measures import (
    assimilate_streams_async,
    evaluation_measure,
    push_forward_WJ_async,
    shift_measure,
)
from ensemble_stats.metrics import series_value, window_sups
from ensemble_stats.models import (
    DecayReport,
    DecayRow,
    DeterminingReport,
    DeterminingRow,
    EmpiricalMeasure,
    GroundMetric,
    LipschitzTransferReport,
    MetricConfig,
    TransferRow,
)
from ensemble_stats.transport import kantorovich, transport_from_cost
from interpolants.build import InterpolantOp
from nse_dynamics.models import Forcing, SolverConfig
from nse_dynamics.solver import grashof
from nudging.models import NoiseSpec, NudgingConfig
from spectral_core.operators import energy_density

# absolute floor under relative slack for distances at round-off level
_ROUND_OFF = 1e-12
# relative slack on the exponential envelope once the transient has passed
ENVELOPE_SLACK = 0.5


def pairwise_error_series(a: EmpiricalMeasure, b: EmpiricalMeasure) -> np.ndarray:
    """||a_i(s) - b_j(s)|| for every pair and sample, shape (Na, Nb, n_samples)."""
    if not a.atoms[0].aligned_with(b.atoms[0]):
        raise ValueError("measures are not on the same time grid")
    out = np.empty((a.n_atoms, b.n_atoms, a.atoms[0].n_samples))
    grid = a.grid
    for i, u in enumerate(a.atoms):
        for j, v in enumerate(b.atoms):
            out[i, j] = np.sqrt(energy_density(grid, u.stack - v.stack))
    return out


def _shifted_costs(
    errors: np.ndarray, start: int, dt_sample: float, mcfg: MetricConfig
) -> np.ndarray:
    """d0+ between every pair of atoms shifted by ``start`` samples."""
    na, nb, _ = errors.shape
    cost = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            sups = window_sups(errors[i, j, start:], dt_sample, mcfg)
            cost[i, j] = series_value(sups, mcfg.nu)
    return cost


def _start_index(mu: EmpiricalMeasure, t: float) -> int:
    return mu.atoms[0].index_of(mu.atoms[0].t0 + t)


async def decay_report_async(
    mu: EmpiricalMeasure,
    op: InterpolantOp,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig | None = None,
    noise: NoiseSpec | None = None,
    assimilated: EmpiricalMeasure | None = None,
    jobs: int | None = None,
    transient: float | None = None,
) -> DecayReport:
    """Gamma_H(tau_t (W+ o J) mu, tau_t mu) and gamma_H at evaluations, per t.

    Rows with t >= ``transient`` are held to the envelope and to monotone decay;
    the default transient is one envelope e-fold, 4 / (beta nu kappa0^2).
    """
    nu = cfg.viscosity_nu
    kappa0 = mu.grid.kappa0
    mcfg = mcfg or MetricConfig.for_flow(nu, kappa0)
    if assimilated is None:
        assimilated = await push_forward_WJ_async(mu, op, f, cfg, ncfg, noise, jobs)
    if assimilated.n_atoms != mu.n_atoms:
        raise ValueError("assimilated and reference measures differ in size")
    G = grashof(f, nu, kappa0)
    rate = ncfg.relaxation_rate(nu)
    if transient is None:
        transient = 4.0 / rate if rate > 0 else 0.0
    errors = pairwise_error_series(assimilated, mu)
    dt_sample = mu.atoms[0].dt_sample
    paired = np.arange(mu.n_atoms)

    rows: list[DecayRow] = []
    mode = None
    for t in t_grid:
        k = _start_index(mu, t)
        cost = _shifted_costs(errors, k, dt_sample, mcfg)
        result = transport_from_cost(cost)
        mode = result.mode
        state_cost = errors[:, :, k]
        decay = math.exp(-0.25 * rate * t)
        rows.append(
            DecayRow(
                t=float(t),
                gamma_H=result.distance,
                paired_bound=float(cost[paired, paired].mean()),
                envelope=math.sqrt(2.0) * nu * kappa0 * G * decay,
                envelope_metric=min(1.0, math.sqrt(2.0) * G * decay),
                gamma_eval=transport_from_cost(state_cost).distance,
                paired_eval_bound=float(state_cost[paired, paired].mean()),
            )
        )
        log.debug(f"t={t:.4g}: Gamma_H={rows[-1].gamma_H:.4e}")

    flags: list[str] = []
    if ncfg.beta == 0:
        flags.append("no nudging")
    if any(r.gamma_H > r.paired_bound + _ROUND_OFF for r in rows):
        flags.append("coupling bound exceeded")
    settled = [r for r in rows if r.t >= transient]
    if ncfg.beta > 0 and any(
        r.gamma_H > (1.0 + ENVELOPE_SLACK) * r.envelope_metric + _ROUND_OFF for r in settled
    ):
        log.warning("Gamma_H exceeds the decay envelope after the transient")
        flags.append("envelope exceeded")
    if not all(
        b.gamma_H <= a.gamma_H + _ROUND_OFF for a, b in zip(settled, settled[1:])
    ):
        flags.append("non-monotone after transient")
    gammas = [r.gamma_H for r in rows]
    log.info(
        f"Decay over {mu.n_atoms} atoms: Gamma_H {gammas[0]:.3e} -> {gammas[-1]:.3e}"
        if gammas
        else "Decay report over an empty time grid"
    )
    return DecayReport(
        rows=rows,
        beta=ncfg.beta,
        rate_bound=0.25 * rate,
        transient=transient,
        n_atoms=mu.n_atoms,
        transport_mode=mode or "exact_assignment",
        flags=flags,
    )


def decay_report(
    mu: EmpiricalMeasure,
    op: InterpolantOp,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig | None = None,
    noise: NoiseSpec | None = None,
    assimilated: EmpiricalMeasure | None = None,
    jobs: int | None = None,
    transient: float | None = None,
) -> DecayReport:
    return asyncio.run(
        decay_report_async(
            mu, op, f, cfg, ncfg, t_grid, mcfg, noise, assimilated, jobs, transient
        )
    )


def determining_report(
    out_a: EmpiricalMeasure,
    out_b: EmpiricalMeasure,
    t_grid: Sequence[float],
    mcfg: MetricConfig,
    beta: float,
    threshold: float = 1e-3,
) -> DeterminingReport:
    """Contraction of two assimilated ensembles that saw the same observations.

    Atom i of both measures must come from the same stream.
    """
    if out_a.n_atoms != out_b.n_atoms:
        raise ValueError("both ensembles must have the same number of members")
    errors = pairwise_error_series(out_a, out_b)
    dt_sample = out_a.atoms[0].dt_sample
    paired = np.arange(out_a.n_atoms)
    rows: list[DeterminingRow] = []
    initial = None
    for t in t_grid:
        cost = _shifted_costs(errors, _start_index(out_a, t), dt_sample, mcfg)
        gamma = transport_from_cost(cost).distance
        initial = gamma if initial is None else initial
        rows.append(
            DeterminingRow(
                t=float(t),
                gamma_H=gamma,
                paired_bound=float(cost[paired, paired].mean()),
                ratio=gamma / initial if initial > 0 else 0.0,
            )
        )
    final_ratio = rows[-1].ratio if rows else 0.0
    passed = final_ratio <= threshold
    log.info(f"Determining report: final ratio {final_ratio:.3e} (threshold {threshold:g})")
    return DeterminingReport(
        rows=rows,
        beta=beta,
        n_atoms=out_a.n_atoms,
        final_ratio=final_ratio,
        threshold=threshold,
        passed=passed,
    )


async def lipschitz_transfer_report_async(
    obs_a: EmpiricalMeasure,
    obs_b: EmpiricalMeasure,
    out_a: EmpiricalMeasure,
    out_b: EmpiricalMeasure,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig | None = None,
    slack: float = 0.05,
    jobs: int | None = None,
) -> LipschitzTransferReport:
    """Kantorovich distances of W+ images against those of the shifted observations.

    The trajectory-level check assimilates the shifted streams (W+ o tau_t);
    the evaluation-level check compares the unshifted outputs at time t.
    """
    nu = cfg.viscosity_nu
    mcfg = mcfg or MetricConfig.for_flow(nu, obs_a.grid.kappa0)
    factor = math.sqrt(8.0 * ncfg.beta)
    eval_factor = factor * nu * (1.0 + 2.0 * ncfg.rho)
    rows: list[TransferRow] = []
    for t in t_grid:
        sa, sb = shift_measure(obs_a, t), shift_measure(obs_b, t)
        gamma_obs = kantorovich(sa, sb, GroundMetric.D0_PLUS, mcfg).distance
        wa = await assimilate_streams_async(sa.atoms, f, cfg, ncfg, jobs=jobs)
        wb = await assimilate_streams_async(sb.atoms, f, cfg, ncfg, jobs=jobs)
        gamma_out = kantorovich(wa, wb, GroundMetric.D0_PLUS, mcfg).distance
        gamma_eval = kantorovich(
            evaluation_measure(out_a, t),
            evaluation_measure(out_b, t),
            GroundMetric.L2_STATE,
        ).distance
        rows.append(
            TransferRow(
                t=float(t),
                gamma_out=gamma_out,
                gamma_obs=gamma_obs,
                gamma_eval=gamma_eval,
                factor=factor,
                eval_factor=eval_factor,
                pass_H=gamma_out <= factor * gamma_obs * (1 + slack) + _ROUND_OFF,
                pass_eval=gamma_eval
                <= eval_factor * gamma_obs * (1 + slack) + _ROUND_OFF,
            )
        )
    report = LipschitzTransferReport(
        rows=rows, beta=ncfg.beta, rho=ncfg.rho, slack=slack
    )
    if not report.passed:
        log.warning("Lipschitz transfer inequality failed at some t")
    return report


def lipschitz_transfer_report(
    obs_a: EmpiricalMeasure,
    obs_b: EmpiricalMeasure,
    out_a: EmpiricalMeasure,
    out_b: EmpiricalMeasure,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    t_grid: Sequence[float],
    mcfg: MetricConfig | None = None,
    slack: float = 0.05,
    jobs: int | None = None,
) -> LipschitzTransferReport:
    return asyncio.run(
        lipschitz_transfer_report_async(
            obs_a, obs_b, out_a, out_b, f, cfg, ncfg, t_grid, mcfg, slack, jobs
        )
    )
