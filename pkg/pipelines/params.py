"""Parameter advice for a given flow: minimal beta, maximal h and the rho-floors."""

from __future__ import annotations

from pydantic import BaseModel

from nudging.advisor import advise_parameters, beta_max_for, condition_gap, h_max_for
from nudging.models import NudgingConstants, ParamAdvice


class ParamsResult(BaseModel):
    advice: ParamAdvice
    beta: float | None = None
    h: float | None = None
    beta_max_for_h: float | None = None
    h_max_for_beta: float | None = None
    condbeta_ok: bool | None = None
    condbetah_ok: bool | None = None


def params_advice(
    grashof: float,
    rho: float,
    beta: float | None = None,
    h: float | None = None,
    kappa0: float = 1.0,
    constants: NudgingConstants | None = None,
) -> ParamsResult:
    """Advice for (G, rho), checked against a proposed beta and/or observation scale h."""
    constants = constants or NudgingConstants()
    advice = advise_parameters(grashof, rho, constants, kappa0)
    result = ParamsResult(advice=advice, beta=beta, h=h)
    if h is not None:
        result.beta_max_for_h = beta_max_for(h, kappa0, constants.c2_star)
    if beta is not None:
        if beta > 0:
            result.h_max_for_beta = h_max_for(beta, kappa0, constants.c2_star)
        result.condbeta_ok = beta > 0 and condition_gap(beta, grashof, rho, constants.c1_star) >= 0
    b = beta if beta is not None else advice.beta_min
    if h is not None:
        result.condbetah_ok = b * kappa0**2 * h**2 <= constants.c2_star
    return result
