"""Kantorovich distance between equal-weight empirical measures.

For equal weights an optimal coupling is a permutation, so the distance is
an assignment problem; above EXACT_ASSIGNMENT_MAX_ATOMS the entropic
approximation from POT is used and labelled as such.
"""

from __future__ import annotations

import itertools

import numpy as np
import ot
from loguru import logger as log
from scipy.optimize import linear_sum_assignment

from Config import config
from ensemble_stats.metrics import ground_distance
from ensemble_stats.models import (
    EmpiricalMeasure,
    GroundMetric,
    MetricConfig,
    TransportMode,
    TransportResult,
)


def cost_matrix(
    a: EmpiricalMeasure,
    b: EmpiricalMeasure,
    ground: GroundMetric = GroundMetric.D0_PLUS,
    mcfg: MetricConfig | None = None,
) -> np.ndarray:
    cost = np.empty((a.n_atoms, b.n_atoms))
    for i, u in enumerate(a.atoms):
        for j, v in enumerate(b.atoms):
            cost[i, j] = ground_distance(u, v, ground, mcfg)
    return cost


def assignment_distance(cost: np.ndarray) -> TransportResult:
    rows, cols = linear_sum_assignment(cost)
    return TransportResult(
        distance=float(cost[rows, cols].mean()),
        mode=TransportMode.EXACT_ASSIGNMENT,
        assignment=[int(c) for c in cols],
    )


def entropic_distance(cost: np.ndarray, reg: float | None = None) -> TransportResult:
    n = cost.shape[0]
    weights = np.full(n, 1.0 / n)
    scale = float(cost.max()) if cost.size and cost.max() > 0 else 1.0
    reg = config.ENTROPIC_REG * scale if reg is None else reg
    plan = ot.sinkhorn(weights, weights, cost, reg)
    return TransportResult(
        distance=float(np.sum(plan * cost)),
        mode=TransportMode.ENTROPIC,
        coupling=plan.tolist(),
        regularization=reg,
    )


def kantorovich(
    a: EmpiricalMeasure,
    b: EmpiricalMeasure,
    ground: GroundMetric = GroundMetric.D0_PLUS,
    mcfg: MetricConfig | None = None,
) -> TransportResult:
    if a.n_atoms != b.n_atoms:
        raise ValueError(
            f"unequal atom counts {a.n_atoms} and {b.n_atoms}; pad or subsample first"
        )
    return transport_from_cost(cost_matrix(a, b, ground, mcfg))


def transport_from_cost(cost: np.ndarray) -> TransportResult:
    """Exact assignment up to EXACT_ASSIGNMENT_MAX_ATOMS atoms, entropic above."""
    n = cost.shape[0]
    if n == 0:
        raise ValueError("cannot transport between empty measures")
    if n <= config.EXACT_ASSIGNMENT_MAX_ATOMS:
        return assignment_distance(cost)
    log.warning(
        f"{n} atoms exceed {config.EXACT_ASSIGNMENT_MAX_ATOMS}; "
        "using the approximate entropic distance"
    )
    return entropic_distance(cost)


def brute_force_distance(cost: np.ndarray) -> float:
    """Minimum over all permutations; only for small N."""
    n = cost.shape[0]
    idx = np.arange(n)
    return min(
        float(cost[idx, list(p)].mean()) for p in itertools.permutations(range(n))
    )
