from __future__ import annotations

import math
from enum import Enum
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from spectral_core.grid import TorusGrid


class ModalKind(BaseModel):
    """Low-mode projector P_N keeping |k|/kappa0 <= n_obs_modes."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["modal"] = "modal"
    n_obs_modes: int = Field(ge=1)
    h: float | None = Field(default=None, gt=0)


class VolumeAverageKind(BaseModel):
    """Mollified cell averages over an (L/h) x (L/h) tiling."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["volume_avg"] = "volume_avg"
    h: float = Field(gt=0)
    eps: float | None = Field(default=None, ge=0)


class NodalKind(BaseModel):
    """Mollified nodal values at x_j = (cell corner + node_offset * h)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["nodal"] = "nodal"
    h: float = Field(gt=0)
    eps: float | None = Field(default=None, ge=0)
    node_offset: tuple[float, float] = (0.5, 0.5)


InterpolantKind = Annotated[
    Union[ModalKind, VolumeAverageKind, NodalKind], Field(discriminator="kind")
]


class InterpolantSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: InterpolantKind
    grid: TorusGrid

    @model_validator(mode="after")
    def _check_cells(self) -> InterpolantSpec:
        k = self.kind
        if isinstance(k, ModalKind):
            return self
        ratio = self.grid.period_L / k.h
        n_cells = round(ratio)
        if n_cells < 1 or abs(ratio - n_cells) > 1e-9 * ratio:
            raise ValueError(f"h={k.h} does not divide L={self.grid.period_L}")
        if self.grid.n_modes % n_cells != 0:
            raise ValueError(
                f"L/h={n_cells} cells per side must divide n_modes={self.grid.n_modes}"
            )
        if self.eps >= k.h / 2:
            raise ValueError(f"eps={self.eps} must be smaller than h/2={k.h / 2}")
        if isinstance(k, NodalKind) and not all(0 <= o < 1 for o in k.node_offset):
            raise ValueError("node_offset must lie in [0, 1) x [0, 1)")
        return self

    @property
    def h(self) -> float:
        """Observation scale; for modal observations 2 pi / (kappa0 (2 n + 1)) unless overridden."""
        k = self.kind
        if isinstance(k, ModalKind):
            if k.h is not None:
                return k.h
            return 2.0 * math.pi / (self.grid.kappa0 * (2 * k.n_obs_modes + 1))
        return k.h

    @property
    def eps(self) -> float:
        k = self.kind
        if isinstance(k, ModalKind):
            return 0.0
        return k.h / 4 if k.eps is None else k.eps

    @property
    def n_cells(self) -> int:
        """Cells per side, (L/h); zero for modal observations."""
        if isinstance(self.kind, ModalKind):
            return 0
        return round(self.grid.period_L / self.kind.h)


class BoundId(str, Enum):
    TYPE1 = "type1"
    TYPE2 = "type2"
    TYPE2B = "type2b"
    H1TYPE1 = "h1type1"
    H1TYPE2 = "h1type2"
    APPENDIX = "appendix"


class BoundReport(BaseModel):
    """Empirical surrogate for an interpolant inequality constant."""

    bound_id: BoundId
    kind: str
    measured_constants: list[float] = Field(default_factory=list)
    n_samples: int
    h_values: list[float] = Field(default_factory=list)
    seed: int = 0
    ratios: list[float] = Field(default_factory=list)
    fit_constants: list[float] | None = None
    violations: int = 0
