"""Empirical trajectory statistical solutions, truncated metrics and Kantorovich distances."""

from ensemble_stats.measures import (
    assimilate_streams_async,
    eval_measure,
    evaluation_measure,
    map_members,
    observe_measure,
    push_forward_S,
    push_forward_S_async,
    push_forward_WJ,
    push_forward_WJ_async,
    sample_initial_measure,
    sample_initial_measure_async,
    shift_measure,
)
from ensemble_stats.metrics import d0_plus, d1_plus, ground_distance, state_distance
from ensemble_stats.models import (
    AttractorAtoms,
    DecayReport,
    DeterminingReport,
    EmpiricalMeasure,
    EnsembleMemberError,
    GaussianModes,
    GroundMetric,
    LipschitzTransferReport,
    MetricConfig,
    Provenance,
    TransportMode,
    TransportResult,
)
from ensemble_stats.reports import (
    decay_report,
    decay_report_async,
    determining_report,
    lipschitz_transfer_report,
    lipschitz_transfer_report_async,
)
from ensemble_stats.transport import brute_force_distance, cost_matrix, kantorovich

__all__ = [
    "AttractorAtoms",
    "DecayReport",
    "DeterminingReport",
    "EmpiricalMeasure",
    "EnsembleMemberError",
    "GaussianModes",
    "GroundMetric",
    "LipschitzTransferReport",
    "MetricConfig",
    "Provenance",
    "TransportMode",
    "TransportResult",
    "assimilate_streams_async",
    "brute_force_distance",
    "cost_matrix",
    "d0_plus",
    "d1_plus",
    "decay_report",
    "decay_report_async",
    "determining_report",
    "eval_measure",
    "evaluation_measure",
    "ground_distance",
    "kantorovich",
    "lipschitz_transfer_report",
    "lipschitz_transfer_report_async",
    "map_members",
    "observe_measure",
    "push_forward_S",
    "push_forward_S_async",
    "push_forward_WJ",
    "push_forward_WJ_async",
    "sample_initial_measure",
    "sample_initial_measure_async",
    "shift_measure",
    "state_distance",
]
