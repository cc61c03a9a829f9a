from __future__ import annotations

from enum import Enum
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    from typing_extensions import Self

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    PrivateAttr,
    field_validator,
    model_validator,
)

from Config import config
from spectral_core.fields import SpectralVectorField
from spectral_core.grid import TorusGrid
from spectral_core.operators import energy_density, leray_project


class InsufficientSpanError(ValueError):
    """A time window reaches outside the stored samples."""


class Integrator(str, Enum):
    IMEX_EULER = "imex_euler"
    IF_RK2 = "if_rk2"


class SolverConfig(BaseModel):
    """Time-stepping parameters for the 2D NSE and its nudged variants."""

    model_config = ConfigDict(frozen=True)

    viscosity_nu: float = Field(gt=0)
    dt: float = Field(gt=0)
    integrator: Integrator = Integrator.IF_RK2
    dealias: bool = True


class Forcing(BaseModel):
    """Time-independent body force, stored already Leray-projected."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    f: SpectralVectorField

    @field_validator("f")
    @classmethod
    def _check_div_free(cls, v: SpectralVectorField) -> SpectralVectorField:
        if v.divergence_residual() > config.DIV_FREE_TOL:
            raise ValueError("forcing must be divergence-free; use Forcing.from_field")
        return v

    @classmethod
    def from_field(cls, g: SpectralVectorField) -> Forcing:
        return cls(f=leray_project(g))

    @classmethod
    def none(cls, grid: TorusGrid) -> Forcing:
        return cls(f=SpectralVectorField.zeros(grid))

    @property
    def grid(self) -> TorusGrid:
        return self.f.grid

    def l2(self) -> float:
        return float(np.sqrt(energy_density(self.grid, self.f.coeffs)))


class AttractorBounds(BaseModel):
    h1_bound: float
    h2_bound: float


class Trajectory(BaseModel):
    """Fields sampled on the uniform time grid t0 + i * dt_sample."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TorusGrid
    t0: float
    dt_sample: float
    states: tuple[SpectralVectorField, ...]

    _stack: np.ndarray | None = PrivateAttr(default=None)

    @model_validator(mode="after")
    def _check(self) -> Trajectory:
        if not self.states:
            raise ValueError("a trajectory needs at least one state")
        if len(self.states) > 1 and not self.dt_sample > 0:
            raise ValueError("dt_sample must be positive")
        for s in self.states:
            self.grid.require_same(s.grid, "trajectory state")
        return self

    @classmethod
    def from_stack(
        cls,
        grid: TorusGrid,
        t0: float,
        dt_sample: float,
        stack: np.ndarray,
        div_free: bool = True,
        **extra: Any,
    ) -> Self:
        stack = np.array(stack, dtype=np.complex128, copy=True)
        stack.flags.writeable = False
        states = tuple(
            SpectralVectorField.from_coeffs(grid, s, div_free=div_free, enforce=False)
            for s in stack
        )
        traj = cls(grid=grid, t0=t0, dt_sample=dt_sample, states=states, **extra)
        traj._stack = stack
        return traj

    @property
    def stack(self) -> np.ndarray:
        """All coefficients as one read-only (n_samples, 2, N, N) array."""
        if self._stack is None:
            stack = np.stack([s.coeffs for s in self.states])
            stack.flags.writeable = False
            self._stack = stack
        return self._stack

    @property
    def n_samples(self) -> int:
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt_sample * np.arange(self.n_samples)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt_sample * (self.n_samples - 1)

    @property
    def final(self) -> SpectralVectorField:
        return self.states[-1]

    @property
    def div_free(self) -> bool:
        return all(s.div_free for s in self.states)

    def index_of(self, t: float) -> int:
        """Sample index of time t; t must sit on the sample grid."""
        if self.n_samples == 1:
            if abs(t - self.t0) > 1e-9:
                raise InsufficientSpanError(f"t={t} is not the single sample time")
            return 0
        pos = (t - self.t0) / self.dt_sample
        idx = int(round(pos))
        if abs(pos - idx) > 1e-6:
            raise ValueError(f"t={t} is not a multiple of dt_sample={self.dt_sample}")
        if not 0 <= idx < self.n_samples:
            raise InsufficientSpanError(
                f"t={t} outside stored span [{self.t0}, {self.t_end}]"
            )
        return idx

    def state_at(self, t: float) -> SpectralVectorField:
        return self.states[self.index_of(t)]

    def shifted(self, sigma: float) -> Self:
        """tau_sigma: the trajectory s -> u(s + sigma), relabelled to start at t0."""
        k = self.index_of(self.t0 + sigma)
        return self._slice(k, self.n_samples, self.t0)

    def since(self, t: float) -> Self:
        """Samples with time >= t, keeping their absolute times."""
        k = self.index_of(t)
        return self._slice(k, self.n_samples, self.t0 + k * self.dt_sample)

    def _slice(self, start: int, stop: int, t0: float) -> Self:
        traj = self.model_copy(update={"t0": t0, "states": self.states[start:stop]})
        traj._stack = None if self._stack is None else self._stack[start:stop]
        return traj

    def aligned_with(self, other: Trajectory) -> bool:
        return (
            self.grid.matches(other.grid)
            and self.n_samples == other.n_samples
            and abs(self.t0 - other.t0) <= 1e-9 * max(1.0, abs(self.t0))
            and (
                self.n_samples == 1
                or abs(self.dt_sample - other.dt_sample) <= 1e-12 * self.dt_sample
            )
        )

    def difference(self, other: Trajectory) -> Trajectory:
        if not self.aligned_with(other):
            raise ValueError("trajectories are not on the same time grid")
        return Trajectory.from_stack(
            self.grid,
            self.t0,
            self.dt_sample,
            self.stack - other.stack,
            div_free=self.div_free and other.div_free,
        )

    def l2_series(self) -> np.ndarray:
        return np.sqrt(energy_density(self.grid, self.stack))

    def h1_series(self) -> np.ndarray:
        return np.sqrt(energy_density(self.grid, self.stack, power=1))

    def h2_series(self) -> np.ndarray:
        return np.sqrt(energy_density(self.grid, self.stack, power=2))


class SpinUpResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    state: SpectralVectorField
    t0: float
    h1_bound: float
    h1_final: float
    steps: int
