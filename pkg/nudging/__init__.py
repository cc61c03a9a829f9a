"""Determining maps W and W+, their linearization, diagnostics and parameter advice."""

from nudging.advisor import (
    NoAdmissibleBetaError,
    advise_parameters,
    beta_max_for,
    condition_gap,
    h_max_for,
    rho_floor_type1,
    rho_floor_type2,
)
from nudging.determining_map import (
    check_forgetting,
    default_burn_in,
    solve_linearized,
    solve_W_burnin,
    solve_Wplus,
)
from nudging.diagnostics import (
    data_lipschitz_check,
    frechet_check,
    sync_report,
    windowed_dissipation,
    y_norm,
)
from nudging.models import (
    AdmissibilityFlags,
    BoundCheck,
    DataLipschitzReport,
    ForgettingCheck,
    FrechetReport,
    NoiseSpec,
    NudgingConfig,
    NudgingConstants,
    ObservationStream,
    ParamAdvice,
    SyncReport,
)
from nudging.observe import check_observation_ball, combined, observe, x_distance, x_norm

__all__ = [
    "AdmissibilityFlags",
    "BoundCheck",
    "DataLipschitzReport",
    "ForgettingCheck",
    "FrechetReport",
    "NoAdmissibleBetaError",
    "NoiseSpec",
    "NudgingConfig",
    "NudgingConstants",
    "ObservationStream",
    "ParamAdvice",
    "SyncReport",
    "advise_parameters",
    "beta_max_for",
    "check_forgetting",
    "check_observation_ball",
    "combined",
    "condition_gap",
    "data_lipschitz_check",
    "default_burn_in",
    "frechet_check",
    "h_max_for",
    "observe",
    "rho_floor_type1",
    "rho_floor_type2",
    "solve_W_burnin",
    "solve_Wplus",
    "solve_linearized",
    "sync_report",
    "windowed_dissipation",
    "x_distance",
    "x_norm",
]
