from __future__ import annotations

from enum import Enum
from typing import Annotated, Literal, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from Config import config
from nse_dynamics.models import Trajectory
from spectral_core.grid import TorusGrid
from spectral_core.random_fields import EnergySpectrum


class EnsembleMemberError(RuntimeError):
    """A per-member computation failed; ``index`` names the member."""

    def __init__(self, index: int, cause: BaseException):
        self.index = index
        self.cause = cause
        super().__init__(f"ensemble member {index} failed: {cause}")


class Provenance(str, Enum):
    INITIAL_SAMPLE = "initial_sample"
    PUSHFORWARD_S = "pushforward_S"
    PUSHFORWARD_WJ = "pushforward_WJ"
    PUSHFORWARD_J = "pushforward_J"
    SHIFTED = "shifted"


class EmpiricalMeasure(BaseModel):
    """Equal-weight empirical measure over trajectories sharing one time grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    atoms: tuple[Trajectory, ...]
    provenance: Provenance
    shift: float = 0.0

    @model_validator(mode="after")
    def _check_atoms(self) -> EmpiricalMeasure:
        if not self.atoms:
            raise ValueError("an empirical measure needs at least one atom")
        first = self.atoms[0]
        for i, a in enumerate(self.atoms[1:], start=1):
            if not a.aligned_with(first):
                raise ValueError(f"atom {i} is not on the time grid of atom 0")
        return self

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def grid(self) -> TorusGrid:
        return self.atoms[0].grid

    @property
    def times(self) -> np.ndarray:
        return self.atoms[0].times


class MetricConfig(BaseModel):
    """Truncation and time scale of the trajectory metrics d0+ and d1+."""

    model_config = ConfigDict(frozen=True)

    n_max: int = Field(default=config.METRIC_N_MAX, ge=1)
    window: float = Field(gt=0)
    nu: float = Field(gt=0)
    kappa0: float = Field(gt=0)

    @classmethod
    def for_flow(cls, nu: float, kappa0: float, n_max: int | None = None) -> MetricConfig:
        return cls(
            n_max=n_max or config.METRIC_N_MAX,
            window=1.0 / (nu * kappa0**2),
            nu=nu,
            kappa0=kappa0,
        )

    @property
    def required_span(self) -> float:
        return self.n_max * self.window

    @property
    def tail_bound(self) -> float:
        return 2.0**-self.n_max


class GroundMetric(str, Enum):
    D0_PLUS = "d0_plus"
    D1_PLUS = "d1_plus"
    L2_STATE = "l2_state"


class TransportMode(str, Enum):
    EXACT_ASSIGNMENT = "exact_assignment"
    ENTROPIC = "entropic"


class TransportResult(BaseModel):
    distance: float
    mode: TransportMode
    assignment: list[int] | None = None
    coupling: list[list[float]] | None = None
    regularization: float | None = None


class GaussianModes(BaseModel):
    """Random div-free fields with the given spectrum, kept inside B_V(radius)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["gaussian_modes"] = "gaussian_modes"
    spectrum: EnergySpectrum = EnergySpectrum()
    radius: float = Field(gt=0)


class AttractorAtoms(BaseModel):
    """Gaussian draws integrated until they enter the absorbing ball."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["atoms_on_attractor"] = "atoms_on_attractor"
    spectrum: EnergySpectrum = EnergySpectrum()
    radius: float = Field(gt=0)
    max_time: float | None = Field(default=None, gt=0)


InitialMeasureKind = Annotated[
    Union[GaussianModes, AttractorAtoms], Field(discriminator="kind")
]


DECAY_COLUMNS = [
    "t",
    "gamma_H",
    "paired_bound",
    "envelope",
    "envelope_metric",
    "gamma_eval",
    "paired_eval_bound",
]


class DecayRow(BaseModel):
    t: float
    gamma_H: float
    paired_bound: float
    envelope: float
    envelope_metric: float
    gamma_eval: float
    paired_eval_bound: float


class DecayReport(BaseModel):
    """Kantorovich distance between assimilated and reference measures against time."""

    rows: list[DecayRow] = Field(default_factory=list)
    beta: float
    rate_bound: float
    transient: float = 0.0
    n_atoms: int
    transport_mode: TransportMode
    flags: list[str] = Field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.model_dump() for r in self.rows], columns=DECAY_COLUMNS)


class DeterminingRow(BaseModel):
    t: float
    gamma_H: float
    paired_bound: float
    ratio: float


class DeterminingReport(BaseModel):
    """Contraction of two assimilated ensembles driven by the same observations."""

    rows: list[DeterminingRow] = Field(default_factory=list)
    beta: float
    n_atoms: int
    final_ratio: float
    threshold: float = 1e-3
    passed: bool

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [r.model_dump() for r in self.rows],
            columns=["t", "gamma_H", "paired_bound", "ratio"],
        )


class TransferRow(BaseModel):
    t: float
    gamma_out: float
    gamma_obs: float
    gamma_eval: float
    factor: float
    eval_factor: float
    pass_H: bool
    pass_eval: bool


class LipschitzTransferReport(BaseModel):
    rows: list[TransferRow] = Field(default_factory=list)
    beta: float
    rho: float
    slack: float = 0.05

    @property
    def passed(self) -> bool:
        return all(r.pass_H and r.pass_eval for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [r.model_dump() for r in self.rows],
            columns=[
                "t",
                "gamma_out",
                "gamma_obs",
                "gamma_eval",
                "factor",
                "eval_factor",
                "pass_H",
                "pass_eval",
            ],
        )
