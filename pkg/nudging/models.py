from __future__ import annotations

import math

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from interpolants.build import InterpolantOp
from nse_dynamics.attractor import ATTRACTOR_H2_CONSTANT
from nse_dynamics.models import Trajectory
from spectral_core.fields import SpectralVectorField


class NudgingConstants(BaseModel):
    """Absolute constants of the admissibility conditions. None derives c3 from the others."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    c1_star: float = Field(default=1.0, gt=0)
    c2_star: float = Field(default=1.0, gt=0)
    c3_star: float | None = Field(default=None, gt=0)
    c3_star_ball: float | None = Field(default=None, gt=0)
    c_L: float = Field(default=1.0, gt=0)
    c_T: float = Field(default=1.0, gt=0)
    c_B: float = Field(default=1.0, gt=0)
    c_tilde1: float = Field(default=1.0, ge=0)
    c_tilde21: float = Field(default=1.0, ge=0)
    c_tilde22: float = Field(default=1.0, ge=0)

    @property
    def c2(self) -> float:
        return ATTRACTOR_H2_CONSTANT * self.c_L**4

    def _type2_coupling(self) -> float:
        return self.c_tilde22 * self.c2 * math.sqrt(self.c2_star)

    def resolved_c3(self) -> float:
        if self.c3_star is not None:
            return self.c3_star
        return max(1.0 + self.c_tilde21, self._type2_coupling())

    def resolved_c3_ball(self) -> float:
        if self.c3_star_ball is not None:
            return self.c3_star_ball
        return max(math.sqrt(2.0) * (1.0 + self.c_tilde21), self._type2_coupling())


class AdmissibilityFlags(BaseModel):
    condbeta_ok: bool
    condbetah_ok: bool
    beta: float
    beta_required: float
    h: float
    h_max: float

    @property
    def ok(self) -> bool:
        return self.condbeta_ok and self.condbetah_ok


class NudgingConfig(BaseModel):
    """Relaxation strength, observation operator and observation-ball radius."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    beta: float = Field(ge=0)
    interpolant: InterpolantOp
    rho: float = Field(gt=0)
    h: float | None = Field(default=None, gt=0)
    constants: NudgingConstants = NudgingConstants()

    @property
    def observation_scale(self) -> float:
        return self.h if self.h is not None else self.interpolant.h

    def relaxation_rate(self, nu: float) -> float:
        """beta nu kappa0^2, the coefficient of the feedback term."""
        return self.beta * nu * self.interpolant.grid.kappa0**2

    def admissibility(self, G: float) -> AdmissibilityFlags:
        c = self.constants
        kappa0 = self.interpolant.grid.kappa0
        h = self.observation_scale
        if self.beta > 0:
            load = c.c1_star * (G**2 / self.beta + self.rho**2)
            required = load * math.log(load) if load > 0 else 0.0
            h_max = math.sqrt(c.c2_star / self.beta) / kappa0
        else:
            required = math.inf
            h_max = math.inf
        return AdmissibilityFlags(
            condbeta_ok=self.beta > 0 and self.beta >= required,
            condbetah_ok=self.beta * kappa0**2 * h**2 <= c.c2_star,
            beta=self.beta,
            beta_required=required,
            h=h,
            h_max=h_max,
        )


class NoiseSpec(BaseModel):
    """Additive observation error of fixed L2 magnitude per sample."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    magnitude: float = Field(ge=0)
    seed: int = 0


class ObservationStream(Trajectory):
    """Observed data v(t) = J u(t) (+ noise) on a uniform time grid."""

    noise: NoiseSpec | None = None

    @property
    def values(self) -> tuple[SpectralVectorField, ...]:
        return self.states

    @property
    def sup_grad(self) -> float:
        return float(self.h1_series().max())


class ParamAdvice(BaseModel):
    beta_min: float
    h_max: float
    grashof: float
    rho: float
    kappa0: float
    constants: NudgingConstants
    vacuous: bool = False
    rho_floor_type1: float
    rho_floor_type1_ball: float
    rho_floor_type2: float
    rho_floor_type2_ball: float
    flags: list[str] = Field(default_factory=list)


class SyncReport(BaseModel):
    """Decay of ||grad(w - u)|| for a nudged run against its reference."""

    times: list[float] = Field(default_factory=list)
    grad_err: list[float] = Field(default_factory=list)
    l2_err: list[float] = Field(default_factory=list)
    envelope: list[float] = Field(default_factory=list)
    fitted_rate: float | None = None
    predicted_rate: float
    bound_rate: float
    threshold_time: float | None = None
    target: float
    beta: float
    decay_orders: float = 0.0
    flags: list[str] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        n = len(self.times)
        envelope = self.envelope if len(self.envelope) == n else [np.nan] * n
        return pd.DataFrame(
            {
                "t": self.times,
                "grad_err": self.grad_err,
                "l2_err": self.l2_err,
                "envelope": envelope,
            },
            columns=["t", "grad_err", "l2_err", "envelope"],
        )


class BoundCheck(BaseModel):
    name: str
    lhs: float
    rhs: float
    slack: float = 0.05
    passed: bool


class DataLipschitzReport(BaseModel):
    beta: float
    x_norm_1: float
    x_norm_2: float
    x_distance: float
    checks: list[BoundCheck] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [c.model_dump() for c in self.checks],
            columns=["name", "lhs", "rhs", "slack", "passed"],
        )


class FrechetReport(BaseModel):
    """Remainder of the linearization in the Y-norm at decreasing perturbation sizes."""

    epsilons: list[float]
    residuals: list[float]
    slope: float
    passed: bool
    tolerance: float = 0.2

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"eps": self.epsilons, "residual": self.residuals},
            columns=["eps", "residual"],
        )


class ForgettingCheck(BaseModel):
    """Sensitivity of the burn-in solution at t_start to doubling the burn-in span."""

    t_burn: float
    t_start: float
    rel_change: float
    tolerance: float = 1e-9
    passed: bool
