"""Smallest admissible relaxation strength, largest observation scale and rho-floors."""

from __future__ import annotations

import math

from loguru import logger as log
from scipy.optimize import bisect

from Config import config
from nudging.models import NudgingConstants, ParamAdvice


class NoAdmissibleBetaError(ValueError):
    def __init__(self, G: float, rho: float, beta_hi: float):
        self.G = G
        self.rho = rho
        super().__init__(
            f"no admissible beta up to {beta_hi:.3g} for G={G:.4g}, rho={rho:.4g}"
        )


def _load(beta: float, G: float, rho: float, c1_star: float) -> float:
    return c1_star * (G**2 / beta + rho**2)


def condition_gap(beta: float, G: float, rho: float, c1_star: float = 1.0) -> float:
    """beta - F log F with F = c1*(G^2/beta + rho^2); non-negative iff beta is admissible."""
    F = _load(beta, G, rho, c1_star)
    return beta - F * math.log(F)


def h_max_for(beta: float, kappa0: float = 1.0, c2_star: float = 1.0) -> float:
    if beta <= 0:
        raise ValueError("beta must be positive")
    return math.sqrt(c2_star / beta) / kappa0


def beta_max_for(h: float, kappa0: float = 1.0, c2_star: float = 1.0) -> float:
    """Largest beta compatible with the observation scale h."""
    if h <= 0:
        raise ValueError("h must be positive")
    return c2_star / (kappa0**2 * h**2)


def rho_floor_type1(G: float, c_tilde1: float = 1.0, ball: bool = False) -> float:
    floor = (1.0 + c_tilde1) * G
    return math.sqrt(2.0) * floor if ball else floor


def rho_floor_type2(
    G: float, beta: float, constants: NudgingConstants, ball: bool = False
) -> float:
    if beta <= 0:
        return math.inf
    c3 = constants.resolved_c3_ball() if ball else constants.resolved_c3()
    return c3 * (G + (G + constants.c_L**-2) ** 3 / math.sqrt(beta))


def advise_parameters(
    G: float,
    rho: float,
    constants: NudgingConstants | None = None,
    kappa0: float = 1.0,
) -> ParamAdvice:
    """Bisection in log(beta) for the crossing of beta = F log F."""
    if G < 0:
        raise ValueError(f"G must be non-negative, got {G}")
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    constants = constants or NudgingConstants()
    c1 = constants.c1_star
    lo, hi = config.BETA_RANGE
    flags: list[str] = []

    def gap(s: float) -> float:
        return condition_gap(math.exp(s), G, rho, c1)

    vacuous = False
    if gap(math.log(lo)) >= 0:
        beta = lo
        vacuous = _load(lo, G, rho, c1) <= 1.0
        if vacuous:
            flags.append("condition vacuous")
    elif gap(math.log(hi)) < 0:
        raise NoAdmissibleBetaError(G, rho, hi)
    else:
        s = bisect(gap, math.log(lo), math.log(hi), xtol=config.BISECTION_RTOL / 4)
        beta = math.exp(s)
        while condition_gap(beta, G, rho, c1) < 0:
            beta *= 1.0 + config.BISECTION_RTOL
    log.info(f"Advice for G={G:.4g}, rho={rho:.4g}: beta_min={beta:.6g}")

    return ParamAdvice(
        beta_min=beta,
        h_max=h_max_for(beta, kappa0, constants.c2_star),
        grashof=G,
        rho=rho,
        kappa0=kappa0,
        constants=constants,
        vacuous=vacuous,
        rho_floor_type1=rho_floor_type1(G, constants.c_tilde1),
        rho_floor_type1_ball=rho_floor_type1(G, constants.c_tilde1, ball=True),
        rho_floor_type2=rho_floor_type2(G, beta, constants),
        rho_floor_type2_ball=rho_floor_type2(G, beta, constants, ball=True),
        flags=flags,
    )
