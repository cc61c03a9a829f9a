"""Synchronization, Y-norm and data-dependence diagnostics of the determining maps."""

from __future__ import annotations

import math
from typing import Literal, Sequence

import numpy as np
from loguru import logger as log
from scipy.integrate import cumulative_trapezoid

from nse_dynamics.models import Forcing, InsufficientSpanError, SolverConfig, Trajectory
from nse_dynamics.solver import grashof
from nudging.determining_map import solve_linearized, solve_W_burnin, solve_Wplus
from nudging.models import (
    BoundCheck,
    DataLipschitzReport,
    FrechetReport,
    NudgingConfig,
    ObservationStream,
    SyncReport,
)
from nudging.observe import combined, x_distance, x_norm


def _decaying_segment(g: np.ndarray) -> tuple[int, int]:
    """[peak, first sample within a decade of the floor reached after the peak]."""
    start = int(np.argmax(g))
    tail = g[start:]
    floor = float(tail.min())
    end = start + int(np.argmax(tail <= 10.0 * floor))
    return start, end


def sync_report(
    w: Trajectory,
    u: Trajectory,
    ncfg: NudgingConfig,
    nu: float,
    G: float | None = None,
    target: float | None = None,
) -> SyncReport:
    """Error series of w against u with a least-squares exponential rate.

    ``target`` defaults to 1e-8 times the largest error; ``G`` adds the
    envelope sqrt(2) nu kappa0 G exp(-beta nu kappa0^2 t / 4).
    """
    if not w.aligned_with(u):
        raise ValueError("w and u are not on the same time grid")
    diff = w.difference(u)
    grad_err = diff.h1_series()
    l2_err = diff.l2_series()
    times = w.times
    kappa0 = w.grid.kappa0
    rate = ncfg.relaxation_rate(nu)
    flags: list[str] = []
    if ncfg.beta == 0:
        flags.append("no nudging")

    peak = float(grad_err.max())
    target = 1e-8 * peak if target is None else target
    envelope: list[float] = []
    if G is not None:
        envelope = list(
            math.sqrt(2.0) * nu * kappa0 * G * np.exp(-0.25 * rate * (times - times[0]))
        )

    fitted = None
    threshold = None
    orders = 0.0
    if peak == 0.0:
        flags.append("identical")
    else:
        hit = np.nonzero(grad_err <= target)[0]
        threshold = float(times[hit[0]]) if hit.size else None
        start, end = _decaying_segment(grad_err)
        tail_min = float(grad_err[start:].min())
        orders = math.log10(peak / tail_min) if tail_min > 0 else math.inf
        if end - start >= 2:
            seg = slice(start, end + 1)
            slope, _ = np.polyfit(times[seg], np.log(grad_err[seg]), 1)
            fitted = float(-slope)
            if fitted < 0.25 * rate:
                flags.append("rate below bound")
                log.warning(
                    f"Fitted sync rate {fitted:.4g} below beta nu kappa0^2/4 = {0.25 * rate:.4g}"
                )
        else:
            flags.append("decay segment too short")

    log.info(
        f"Sync: ||grad(w-u)|| from {peak:.3e} over {orders:.2f} decades, "
        f"fitted rate {fitted if fitted is not None else float('nan'):.4g}"
    )
    return SyncReport(
        times=[float(t) for t in times],
        grad_err=[float(x) for x in grad_err],
        l2_err=[float(x) for x in l2_err],
        envelope=[float(x) for x in envelope],
        fitted_rate=fitted,
        predicted_rate=0.5 * rate,
        bound_rate=0.25 * rate,
        threshold_time=threshold,
        target=target,
        beta=ncfg.beta,
        decay_orders=orders,
        flags=flags,
    )


def windowed_dissipation(traj: Trajectory, nu: float) -> np.ndarray:
    """(1/(nu kappa0^2)) int_s^{s+1/(nu kappa0^2)} ||A u||^2 for every sample s with a full window."""
    kappa0 = traj.grid.kappa0
    window = 1.0 / (nu * kappa0**2)
    m = max(1, int(round(window / traj.dt_sample))) if traj.n_samples > 1 else 1
    if traj.n_samples - 1 < m:
        raise InsufficientSpanError(
            f"trajectory span {traj.t_end - traj.t0:.4g} is shorter than one "
            f"averaging window {window:.4g}"
        )
    cum = cumulative_trapezoid(traj.h2_series() ** 2, traj.times, initial=0.0)
    return (cum[m:] - cum[:-m]) / (nu * kappa0**2)


def y_norm(w: Trajectory, nu: float) -> float:
    """Discrete ||w||_Y over the stored span."""
    kappa0 = w.grid.kappa0
    grad_part = float(np.max(w.h1_series() ** 2)) / (nu * kappa0) ** 2
    return math.sqrt(grad_part + float(np.max(windowed_dissipation(w, nu))))


def _check(name: str, lhs: float, rhs: float, slack: float) -> BoundCheck:
    # absolute floor keeps round-off on identical inputs from failing
    passed = lhs <= rhs * (1.0 + slack) + 1e-24
    if not passed:
        log.warning(f"{name}: {lhs:.4g} > {rhs:.4g}")
    return BoundCheck(name=name, lhs=lhs, rhs=rhs, slack=slack, passed=passed)


def data_lipschitz_check(
    v1: ObservationStream,
    v2: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    w1: Trajectory | None = None,
    w2: Trajectory | None = None,
    slack: float = 0.05,
) -> DataLipschitzReport:
    """Sampled versions of the a priori bounds on W+ and on its dependence on the data."""
    if ncfg.beta <= 0:
        raise ValueError("the data bounds need beta > 0")
    nu = cfg.viscosity_nu
    kappa0 = v1.grid.kappa0
    beta = ncfg.beta
    G = grashof(f, nu, kappa0)
    w1 = solve_Wplus(v1, f, cfg, ncfg) if w1 is None else w1
    w2 = solve_Wplus(v2, f, cfg, ncfg) if w2 is None else w2
    x1, x2 = x_norm(v1, nu), x_norm(v2, nu)
    dx = x_distance(v2, v1, nu)
    dw = w2.difference(w1)

    checks: list[BoundCheck] = []
    for i, (w, x) in enumerate(((w1, x1), (w2, x2)), start=1):
        load = G**2 / beta + x**2
        checks.append(
            _check(
                f"estw1[{i}]",
                float(np.max(w.h1_series() ** 2)),
                2.0 * (nu * kappa0) ** 2 * load,
                slack,
            )
        )
        checks.append(
            _check(
                f"estw2[{i}]",
                float(np.max(windowed_dissipation(w, nu))),
                2.0 * (1.0 + beta) * load,
                slack,
            )
        )
    checks.append(
        _check(
            "estdiffw1",
            float(np.max(dw.h1_series() ** 2)),
            4.0 * (nu * kappa0) ** 2 * dx**2,
            slack,
        )
    )
    checks.append(
        _check(
            "estdiffw2",
            float(np.max(windowed_dissipation(dw, nu))),
            4.0 * (2.0 + beta) * dx**2,
            slack,
        )
    )
    return DataLipschitzReport(
        beta=beta, x_norm_1=x1, x_norm_2=x2, x_distance=dx, checks=checks
    )


def frechet_check(
    v: ObservationStream,
    vbar: ObservationStream,
    f: Forcing,
    cfg: SolverConfig,
    ncfg: NudgingConfig,
    epsilons: Sequence[float] = (1e-1, 1e-2, 1e-3),
    mode: Literal["plus", "burnin"] = "plus",
    t_burn: float | None = None,
    tolerance: float = 0.2,
) -> FrechetReport:
    """||W(v + eps vbar) - W(v) - eps w*||_Y against eps; the log-log slope should be 2."""
    nu = cfg.viscosity_nu

    def solve(stream: ObservationStream) -> Trajectory:
        if mode == "burnin":
            return solve_W_burnin(stream, f, cfg, ncfg, t_burn=t_burn)
        return solve_Wplus(stream, f, cfg, ncfg)

    base = solve(v)
    ws = solve_linearized(v, vbar, f, cfg, ncfg, mode=mode, t_burn=t_burn)
    residuals = []
    for eps in epsilons:
        w_eps = solve(combined(v, vbar, eps))
        remainder = Trajectory.from_stack(
            base.grid,
            base.t0,
            base.dt_sample,
            w_eps.stack - base.stack - eps * ws.stack,
        )
        residuals.append(y_norm(remainder, nu))
        log.debug(f"Frechet remainder at eps={eps:.1e}: {residuals[-1]:.4e}")

    slope, _ = np.polyfit(np.log(epsilons), np.log(residuals), 1)
    slope = float(slope)
    passed = abs(slope - 2.0) <= tolerance
    log.info(f"Frechet remainder slope {slope:.3f} ({'pass' if passed else 'fail'})")
    return FrechetReport(
        epsilons=list(epsilons),
        residuals=residuals,
        slope=slope,
        passed=passed,
        tolerance=tolerance,
    )
