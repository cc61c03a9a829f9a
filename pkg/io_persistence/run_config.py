"""Run configuration documents: JSON sections validated strictly, with dotted overrides."""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from Config import config
from ensemble_stats.models import AttractorAtoms, GaussianModes, MetricConfig
from interpolants.models import InterpolantKind, InterpolantSpec, ModalKind
from nse_dynamics.models import Forcing, Integrator, SolverConfig
from nse_dynamics.solver import make_kolmogorov_forcing
from nudging.models import NoiseSpec, NudgingConstants
from spectral_core.grid import TorusGrid
from spectral_core.random_fields import EnergySpectrum


class ConfigValidationError(ValueError):
    """Invalid run configuration; ``errors`` holds (dotted path, message) pairs."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = errors
        super().__init__("; ".join(f"{p}: {m}" for p, m in errors))

    @classmethod
    def from_pydantic(cls, exc: ValidationError) -> ConfigValidationError:
        return cls(
            [(".".join(str(x) for x in e["loc"]) or "<root>", e["msg"]) for e in exc.errors()]
        )


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class GridSection(_Section):
    n_modes: int
    period_L: float = Field(gt=0)
    dealias_fraction: float = 2.0 / 3.0


class SolverSection(_Section):
    viscosity_nu: float = Field(gt=0)
    dt: float = Field(gt=0)
    integrator: Integrator = Integrator.IF_RK2
    dealias: bool = True


class ForcingSection(_Section):
    kind: Literal["kolmogorov", "none"] = "kolmogorov"
    grashof: float | None = Field(default=None, ge=0)
    wavenumber: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _needs_grashof(self) -> ForcingSection:
        if self.kind == "kolmogorov" and self.grashof is None:
            raise ValueError("kolmogorov forcing needs an explicit grashof value")
        return self


class InitialSection(_Section):
    kind: Literal["random", "taylor_green", "zero", "snapshot"] = "random"
    spectrum: EnergySpectrum = EnergySpectrum()
    radius: float | None = Field(default=None, gt=0)
    amplitude: float = 1.0
    path: str | None = None

    @model_validator(mode="after")
    def _needs_path(self) -> InitialSection:
        if self.kind == "snapshot" and not self.path:
            raise ValueError("snapshot initial data needs a path")
        return self


class RunSection(_Section):
    t_final: float = Field(gt=0)
    sample_stride: int = Field(default=1, ge=1)
    spin_up: bool = True
    spin_up_max_time: float | None = Field(default=None, gt=0)


class NudgingSection(_Section):
    beta: float | None = Field(default=None, ge=0)
    interpolant: InterpolantKind = Field(default_factory=lambda: ModalKind(n_obs_modes=5))
    rho: float | None = Field(default=None, gt=0)
    constants: NudgingConstants = NudgingConstants()
    noise: NoiseSpec | None = None
    mode: Literal["plus", "burnin"] = "plus"
    t_burn: float | None = Field(default=None, gt=0)
    reference_path: str | None = None


class EnsembleSection(_Section):
    n_members: int = Field(default=16, ge=1)
    initial: GaussianModes | AttractorAtoms = Field(
        default_factory=lambda: GaussianModes(radius=1.0), discriminator="kind"
    )
    t_grid: list[float] | None = None
    n_times: int = Field(default=10, ge=1)
    second_initial: GaussianModes | None = None
    transfer: bool = False


class MetricsSection(_Section):
    n_max: int = Field(default=config.METRIC_N_MAX, ge=1)


class OutputSection(_Section):
    directory: str | None = None
    write_trajectories: bool = True
    formats: list[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])


class RunConfigFile(_Section):
    grid: GridSection
    solver: SolverSection
    forcing: ForcingSection = ForcingSection(kind="none")
    initial: InitialSection = InitialSection()
    run: RunSection
    nudging: NudgingSection = NudgingSection()
    ensemble: EnsembleSection = EnsembleSection()
    metrics: MetricsSection = MetricsSection()
    output: OutputSection = OutputSection()

    def build_grid(self) -> TorusGrid:
        return TorusGrid(**self.grid.model_dump())

    def solver_config(self) -> SolverConfig:
        return SolverConfig(**self.solver.model_dump())

    def build_forcing(self, grid: TorusGrid) -> Forcing:
        if self.forcing.kind == "none":
            return Forcing.none(grid)
        return make_kolmogorov_forcing(
            grid,
            self.solver.viscosity_nu,
            self.forcing.grashof,
            self.forcing.wavenumber,
        )

    def interpolant_spec(self, grid: TorusGrid) -> InterpolantSpec:
        return InterpolantSpec(kind=self.nudging.interpolant, grid=grid)

    def metric_config(self, grid: TorusGrid) -> MetricConfig:
        return MetricConfig.for_flow(
            self.solver.viscosity_nu, grid.kappa0, self.metrics.n_max
        )


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(doc: dict[str, Any], overrides: Sequence[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` assignments; values are JSON when they parse."""
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise ConfigValidationError([(item, "override must look like key=value")])
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            child = node.get(part)
            if not isinstance(child, dict):
                child = {}
                node[part] = child
            node = child
        node[parts[-1]] = _parse_value(raw)
    return doc


def parse_run_config(
    doc: dict[str, Any], overrides: Sequence[str] = ()
) -> RunConfigFile:
    doc = apply_overrides(json.loads(json.dumps(doc)), overrides)
    try:
        cfg = RunConfigFile.model_validate(doc)
    except ValidationError as exc:
        raise ConfigValidationError.from_pydantic(exc) from exc
    _check_domain(cfg)
    return cfg


def _check_domain(cfg: RunConfigFile) -> None:
    """Build the grid and interpolant once so their constraints surface as config errors."""
    errors: list[tuple[str, str]] = []
    try:
        grid = cfg.build_grid()
    except ValidationError as exc:
        errors += [(f"grid.{e['loc'][0]}" if e["loc"] else "grid", e["msg"]) for e in exc.errors()]
        raise ConfigValidationError(errors) from exc
    try:
        cfg.interpolant_spec(grid)
    except ValidationError as exc:
        errors += [("nudging.interpolant", e["msg"]) for e in exc.errors()]
    if errors:
        raise ConfigValidationError(errors)


def load_run_config(
    path: str | os.PathLike, overrides: Sequence[str] = ()
) -> RunConfigFile:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigValidationError([(str(path), f"cannot read: {exc}")]) from exc
    except json.JSONDecodeError as exc:
        raise ConfigValidationError([(str(path), f"invalid JSON: {exc}")]) from exc
    if not isinstance(doc, dict):
        raise ConfigValidationError([(str(path), "top level must be an object")])
    return parse_run_config(doc, overrides)


def resolved_document(cfg: RunConfigFile) -> dict[str, Any]:
    return cfg.model_dump(mode="json")
