"""Determining maps: the nudged system driven by an observation stream.

W+ starts from w = 0 at the first observation time. W on the whole line has
no initial condition; it is approximated by starting W+ far enough in the
past that the exponential forgetting of the initial state falls below
FORGETTING_TOL.
"""

from __future__ import annotations

import math
from typing import Callable, Literal

import numpy as np
from loguru import logger as log

from Config import config
from nse_dynamics.models import Forcing, InsufficientSpanError, SolverConfig, Trajectory
from nse_dynamics.solver import (
    SpectralStepper,
    energy_reference,
    grashof,
    march,
    nse_rhs,
    steps_for,
)
from nudging.models import ForgettingCheck, NudgingConfig, ObservationStream
from nudging.observe import check_observation_ball
from spectral_core.fields import SpectralVectorField
from spectral_core.grid import TorusGrid
from spectral_core.operators import advection_coeffs, energy_density, project_coeffs

Observation = Callable[[float], np.ndarray]


def _interpolate(stack: np.ndarray, t0: float, dt_sample: float) -> Observation:
    """Piecewise-linear in time between samples."""
    n = stack.shape[0]

    def at(t: float) -> np.ndarray:
        if n == 1:
            return stack[0]
        pos = (t - t0) / dt_sample
        if pos < -1e-9 or pos > n - 1 + 1e-9:
            raise InsufficientSpanError(
                f"t={t} outside observed span [{t0}, {t0 + (n - 1) * dt_sample}]"
            )
        i = min(max(int(math.floor(pos)), 0), n - 2)
        theta = min(max(pos - i, 0.0), 1.0)
        if theta == 0.0:
            return stack[i]
        return (1.0 - theta) * stack[i] + theta * stack[i + 1]

    return at


def _sample_stride(stream: Trajectory, cfg: SolverConfig) -> int:
    if stream.n_samples < 2:
        raise ValueError("an observation stream needs at least two samples")
    ratio = stream.dt_sample / cfg.dt
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > 1e-6 * ratio:
        raise ValueError(
            f"dt_sample={stream.dt_sample} is not a multiple of dt={cfg.dt}"
        )
    return stride


def _feedback(
    grid: TorusGrid, cfg: SolverConfig, ncfg: NudgingConfig
) -> tuple[np.ndarray | float, Callable[[np.ndarray, np.ndarray], np.ndarray]]:
    """(implicit damping, explicit term(c, P v)) for -beta nu kappa0^2 P(J w - v)."""
    op = ncfg.interpolant
    grid.require_same(op.grid, "interpolant")
    rate = ncfg.relaxation_rate(cfg.viscosity_nu)

    if op.is_modal:
        # P_sigma commutes with the mode mask, so the w-part is diagonal.
        def modal(c: np.ndarray, pv: np.ndarray) -> np.ndarray:
            return rate * pv

        return rate * op.mode_mask, modal

    stiffness = rate * cfg.dt
    if stiffness > config.NUDGING_EXPLICIT_GUARD:
        raise ValueError(
            f"explicit nudging needs beta*dt*nu*kappa0^2 <= "
            f"{config.NUDGING_EXPLICIT_GUARD}, got {stiffness:.3g}; reduce dt"
        )
    mask = grid.nyquist_mask

    def explicit(c: np.ndarray, pv: np.ndarray) -> np.ndarray:
        return -rate * (project_coeffs(grid, op.apply_coeffs(c) * mask) - pv)

    return 0.0, explicit


def _warn_admissibility(
    v: ObservationStream, f: Forcing, cfg: SolverConfig, ncfg: NudgingConfig
) -> None:
    nu = cfg.viscosity_nu
    if ncfg.beta == 0:
        log.warning("beta = 0: no nudging, the solve reduces to the NSE from w0")
        return
    G = grashof(f, nu, v.grid.kappa0)
    flags = ncfg.admissibility(G)
    if not flags.condbeta_ok:
        log.warning(
            f"beta={ncfg.beta:.4g} below F log F = {flags.beta_required:.4g} "
            f"(G={G:.4g}, rho={ncfg.rho:.4g})"
        )
    if not flags.condbetah_ok:
        log.warning(
            f"observation scale h={flags.h:.4g} exceeds h_max={flags.h_max:.4g} "
            f"for beta={ncfg.beta:.4g}"
        )
    check_observation_ball(v, nu, ncfg.rho)


def _nudged_march(
    v: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    c0: np.ndarray,
    vbar: ObservationStream | None = None,
) -> np.ndarray:
    """Sampled solution of the nudged system, or of the (w, w*) pair when vbar is given."""
    grid = v.grid
    grid.require_same(f.grid, "forcing")
    stride = _sample_stride(v, cfg)
    damping, feedback = _feedback(grid, cfg, ncfg)
    forcing = f.f.coeffs

    pv = project_coeffs(grid, v.stack)
    if vbar is None:
        obs = _interpolate(pv, v.t0, v.dt_sample)

        def extra(c: np.ndarray, t: float) -> np.ndarray:
            return feedback(c, obs(t))

        rhs = nse_rhs(grid, f, cfg, extra)
    else:
        if not v.aligned_with(vbar):
            raise ValueError("v and vbar are not on the same time grid")
        pair = np.stack([pv, project_coeffs(grid, vbar.stack)], axis=1)
        obs = _interpolate(pair, v.t0, v.dt_sample)

        def rhs(c: np.ndarray, t: float) -> np.ndarray:
            w, ws = c[0], c[1]
            adv = advection_coeffs(
                grid, np.stack([w, w, ws]), np.stack([w, ws, w]), dealias=cfg.dealias
            )
            out = np.stack([forcing - adv[0], -adv[1] - adv[2]])
            return out + feedback(c, obs(t))

    n_steps = (v.n_samples - 1) * stride
    stepper = SpectralStepper(grid, cfg, damping=damping)
    ref = max(
        energy_reference(c0.reshape((-1,) + c0.shape[-3:])[0], f, cfg),
        float(np.max(energy_density(grid, v.stack))),
        float(np.max(energy_density(grid, vbar.stack))) if vbar is not None else 0.0,
    )
    return march(c0, stepper, rhs, v.t0, n_steps, stride, ref)


def solve_Wplus(
    v: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    w0: SpectralVectorField | None = None,
) -> Trajectory:
    """W+(v): the nudged solution on v's time grid, from w(t0) = w0 (zero by default)."""
    grid = v.grid
    _warn_admissibility(v, f, cfg, ncfg)
    if w0 is None:
        c0 = np.zeros((2, grid.n_modes, grid.n_modes), dtype=np.complex128)
    else:
        grid.require_same(w0.grid, "initial state")
        c0 = project_coeffs(grid, w0.coeffs)
    log.info(
        f"Nudged solve on [{v.t0:.4g}, {v.t_end:.4g}] with beta={ncfg.beta:.4g}, "
        f"{'modal' if ncfg.interpolant.is_modal else ncfg.interpolant.spec.kind.kind} J"
    )
    samples = _nudged_march(v, f, cfg, ncfg, c0)
    return Trajectory.from_stack(grid, v.t0, v.dt_sample, samples)


def default_burn_in(
    beta: float,
    nu: float,
    kappa0: float,
    tol: float | None = None,
    safety: float | None = None,
) -> float:
    """Span after which exp(-beta nu kappa0^2 T) falls below tol, times a safety factor."""
    if beta <= 0:
        raise ValueError("burn-in needs beta > 0")
    tol = config.FORGETTING_TOL if tol is None else tol
    safety = config.BURN_IN_SAFETY if safety is None else safety
    return safety * math.log(1.0 / tol) / (beta * nu * kappa0**2)


def _burn_in_start(v: Trajectory, t_start: float, t_burn: float) -> float:
    """Latest sample time at or before t_start - t_burn."""
    k = math.floor((t_start - t_burn - v.t0) / v.dt_sample + 1e-9)
    if k < 0:
        raise InsufficientSpanError(
            f"burn-in of {t_burn:.4g} before t={t_start} needs observations from "
            f"{t_start - t_burn:.4g}, stream starts at {v.t0:.4g}"
        )
    return v.t0 + k * v.dt_sample


def _resolve_burn_in(
    v: ObservationStream, cfg: SolverConfig, ncfg: NudgingConfig, t_burn: float | None
) -> float:
    if t_burn is not None:
        return t_burn
    return default_burn_in(ncfg.beta, cfg.viscosity_nu, v.grid.kappa0)


def solve_W_burnin(
    v: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    t_burn: float | None = None,
    t_start: float = 0.0,
) -> Trajectory:
    """Approximation of W(v) on [t_start, v.t_end] by W+ started t_burn earlier."""
    t_burn = _resolve_burn_in(v, cfg, ncfg, t_burn)
    begin = _burn_in_start(v, t_start, t_burn)
    log.debug(f"Burn-in of {t_start - begin:.4g} before t={t_start}")
    w = solve_Wplus(v.since(begin), f, cfg, ncfg)
    return w.since(t_start)


def check_forgetting(
    v: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    t_burn: float | None = None,
    t_start: float = 0.0,
    tolerance: float = 1e-9,
) -> ForgettingCheck:
    """Compare the burn-in solution at t_start for t_burn and 2 t_burn."""
    t_burn = _resolve_burn_in(v, cfg, ncfg, t_burn)
    short = solve_W_burnin(v, f, cfg, ncfg, t_burn, t_start).states[0]
    long = solve_W_burnin(v, f, cfg, ncfg, 2 * t_burn, t_start).states[0]
    diff = float(np.sqrt(energy_density(v.grid, short.coeffs - long.coeffs, power=1)))
    scale = float(np.sqrt(energy_density(v.grid, long.coeffs, power=1)))
    rel = diff / scale if scale > 0 else diff
    log.info(f"Doubling burn-in {t_burn:.4g} changes w(t_start) by {rel:.3e} (H1, rel)")
    return ForgettingCheck(
        t_burn=t_burn,
        t_start=t_start,
        rel_change=rel,
        tolerance=tolerance,
        passed=rel <= tolerance,
    )


def solve_linearized(
    v: ObservationStream,
    vbar: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    mode: Literal["plus", "burnin"] = "plus",
    t_burn: float | None = None,
    t_start: float = 0.0,
) -> Trajectory:
    """w* solving the nudged system linearized around w = W(v), driven by vbar.

    w and w* are advanced together by the same stepper, so w* is the exact
    derivative of the discrete solution map.
    """
    grid = v.grid
    grid.require_same(vbar.grid, "vbar")
    if not v.aligned_with(vbar):
        raise ValueError("v and vbar are not on the same time grid")
    if mode == "burnin":
        t_burn = _resolve_burn_in(v, cfg, ncfg, t_burn)
        begin = _burn_in_start(v, t_start, t_burn)
        v, vbar = v.since(begin), vbar.since(begin)
    elif mode != "plus":
        raise ValueError(f"unknown mode {mode!r}; expected 'plus' or 'burnin'")

    _warn_admissibility(v, f, cfg, ncfg)
    c0 = np.zeros((2, 2, grid.n_modes, grid.n_modes), dtype=np.complex128)
    samples = _nudged_march(v, f, cfg, ncfg, c0, vbar=vbar)
    ws = Trajectory.from_stack(grid, v.t0, v.dt_sample, samples[:, 1])
    return ws.since(t_start) if mode == "burnin" else ws
