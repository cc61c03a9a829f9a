"""Finite-rank observation operators J and empirical checks of their bounds."""

from interpolants.bounds import (
    SquarePatch,
    appendix_oscillation_check,
    constants_across_h,
    measure_bound,
    oscillation_survey,
    spread,
)
from interpolants.build import (
    InterpolantOp,
    apply_J,
    build_interpolant,
    observed_data,
    operator_rank,
    spanned_dimension,
)
from interpolants.models import (
    BoundId,
    BoundReport,
    InterpolantSpec,
    ModalKind,
    NodalKind,
    VolumeAverageKind,
)

__all__ = [
    "BoundId",
    "BoundReport",
    "InterpolantOp",
    "InterpolantSpec",
    "ModalKind",
    "NodalKind",
    "SquarePatch",
    "VolumeAverageKind",
    "appendix_oscillation_check",
    "apply_J",
    "build_interpolant",
    "constants_across_h",
    "measure_bound",
    "observed_data",
    "operator_rank",
    "oscillation_survey",
    "spanned_dimension",
    "spread",
]
