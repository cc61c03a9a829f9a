"""Empirical certification of the interpolant inequalities."""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from loguru import logger as log
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.optimize import nnls

from interpolants.build import InterpolantOp, build_interpolant
from interpolants.models import (
    BoundId,
    BoundReport,
    InterpolantKind,
    InterpolantSpec,
    NodalKind,
)
from spectral_core.grid import TorusGrid
from spectral_core.operators import energy_density
from spectral_core.random_fields import (
    EnergySpectrum,
    random_divfree_field,
    random_scalar_coeffs,
)

DECAY_SLOPES = (2.0, 3.0, 4.0)
_PATCH_NODES = 64

_FIRST_ORDER = {BoundId.TYPE1, BoundId.H1TYPE1}


def _sample_norms(op: InterpolantOp, seed: int, index: int) -> tuple[float, ...]:
    """(||phi - J phi||, ||grad(phi - J phi)||, ||grad phi||, ||A phi||) for one draw."""
    grid = op.grid
    spectrum = EnergySpectrum(slope=DECAY_SLOPES[index % len(DECAY_SLOPES)])
    phi = random_divfree_field(grid, spectrum, seed + index).coeffs
    err = phi - op.apply_coeffs(phi)
    err[..., 0, 0] = 0.0
    return (
        math.sqrt(energy_density(grid, err)),
        math.sqrt(energy_density(grid, err, power=1)),
        math.sqrt(energy_density(grid, phi, power=1)),
        math.sqrt(energy_density(grid, phi, power=2)),
    )


def measure_bound(
    op: InterpolantOp, bound_id: BoundId, n_samples: int = 30, seed: int = 0
) -> BoundReport:
    """Largest observed ratio for ``bound_id`` over seeded random fields.

    Two-constant bounds report the constant that works with equal weights on
    both terms; type2b also carries the non-negative least-squares fit.
    """
    bound_id = BoundId(bound_id)
    if bound_id is BoundId.APPENDIX:
        return oscillation_survey(op.grid, n_samples, seed)
    if bound_id in _FIRST_ORDER and isinstance(op.spec.kind, NodalKind):
        log.warning(f"{bound_id.value} is not expected to hold for nodal observations")

    h = op.h
    ratios: list[float] = []
    rows: list[tuple[float, float]] = []
    targets: list[float] = []
    for i in range(n_samples):
        e0, e1, g1, g2 = _sample_norms(op, seed, i)
        if bound_id is BoundId.TYPE1:
            ratios.append(e0 / (h * g1))
        elif bound_id is BoundId.TYPE2:
            ratios.append(e0 / (h * g1 + h**2 * g2))
        elif bound_id is BoundId.TYPE2B:
            term1 = h * g1
            term2 = h**1.5 * math.sqrt(g1 * g2)
            ratios.append(e0 / (term1 + term2))
            rows.append((term1, term2))
            targets.append(e0)
        elif bound_id is BoundId.H1TYPE1:
            ratios.append(e1 / g1)
        else:
            ratios.append(e1 / (g1 + h * g2))

    c = max(ratios) if ratios else 0.0
    fit = None
    if bound_id is BoundId.TYPE1 or bound_id is BoundId.H1TYPE1:
        constants = [c]
    else:
        constants = [c, c]
    if rows:
        coef, _ = nnls(np.asarray(rows), np.asarray(targets))
        fit = [float(x) for x in coef]

    report = BoundReport(
        bound_id=bound_id,
        kind=op.spec.kind.kind,
        measured_constants=constants,
        n_samples=n_samples,
        h_values=[h],
        seed=seed,
        ratios=ratios,
        fit_constants=fit,
    )
    log.info(
        f"{bound_id.value} ({report.kind}, h={h:.4g}): constants {report.measured_constants}"
    )
    return report


def constants_across_h(
    grid: TorusGrid,
    make_kind: Callable[[float], InterpolantKind],
    bound_id: BoundId,
    h_values: Sequence[float],
    n_samples: int = 30,
    seed: int = 0,
) -> list[float]:
    """Leading measured constant of ``bound_id`` for the same kind at each scale h."""
    constants = []
    for h in h_values:
        op = build_interpolant(InterpolantSpec(kind=make_kind(h), grid=grid))
        constants.append(measure_bound(op, bound_id, n_samples, seed).measured_constants[0])
    return constants


def spread(constants: Sequence[float]) -> float:
    """max/min of positive finite constants, inf otherwise."""
    if not constants or not all(math.isfinite(c) and c > 0 for c in constants):
        return math.inf
    return max(constants) / min(constants)


class SquarePatch(BaseModel):
    """Real band-limited scalar (N x N coefficients, mean allowed) restricted to a square."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: TorusGrid
    coeffs: np.ndarray
    origin: tuple[float, float] = (0.0, 0.0)
    side: float = Field(gt=0)

    @model_validator(mode="after")
    def _check(self) -> SquarePatch:
        n = self.grid.n_modes
        if self.coeffs.shape != (n, n):
            raise ValueError(f"coeffs must have shape ({n}, {n})")
        return self

    def contains(self, p: tuple[float, float]) -> bool:
        tol = 1e-12 * self.side
        return all(
            o - tol <= x <= o + self.side + tol for x, o in zip(p, self.origin)
        )

    def _basis(self, pts: np.ndarray) -> np.ndarray:
        return np.exp(1j * self.grid.kappa0 * np.outer(pts, self.grid.mode_index))

    def evaluate(self, c: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Tensor-grid values sum_k c(k) exp(i k.x) at xs x ys."""
        return np.real(self._basis(xs) @ c @ self._basis(ys).T)

    def l2_on_square(self, c: np.ndarray) -> float:
        x, w = np.polynomial.legendre.leggauss(_PATCH_NODES)
        half = 0.5 * self.side
        xs = self.origin[0] + half * (x + 1.0)
        ys = self.origin[1] + half * (x + 1.0)
        vals = self.evaluate(c, xs, ys)
        ww = np.outer(w, w) * half * half
        return float(np.sqrt(np.sum(ww * vals**2)))


def appendix_oscillation_check(
    phi: SquarePatch, points: tuple[tuple[float, float], tuple[float, float]]
) -> dict[str, float]:
    """Both sides of |phi(x) - phi(y)| <= 2 (|grad phi|^2 + sqrt(2) l |grad phi| |phi_xy|)^(1/2) on the square."""
    p, q = points
    if not (phi.contains(p) and phi.contains(q)):
        raise ValueError("points must lie inside the square")
    g = phi.grid
    c = phi.coeffs
    vp = phi.evaluate(c, np.array([p[0]]), np.array([p[1]]))[0, 0]
    vq = phi.evaluate(c, np.array([q[0]]), np.array([q[1]]))[0, 0]
    cx = 1j * g.kx * c
    cy = 1j * g.ky * c
    cxy = -g.kx * g.ky * c
    grad = math.hypot(phi.l2_on_square(cx), phi.l2_on_square(cy))
    mixed = phi.l2_on_square(cxy)
    rhs = 2.0 * math.sqrt(grad**2 + math.sqrt(2.0) * phi.side * grad * mixed)
    return {"lhs": float(abs(vp - vq)), "rhs": float(rhs)}


def oscillation_survey(grid: TorusGrid, n_draws: int = 1000, seed: int = 0) -> BoundReport:
    """Random (phi, square, point pair) draws; counts violations of the oscillation inequality."""
    rng = np.random.default_rng(seed)
    L = grid.period_L
    ratios: list[float] = []
    violations = 0
    for i in range(n_draws):
        coeffs = random_scalar_coeffs(grid, slope=rng.uniform(1.0, 3.0), seed=seed + i)
        side = L * rng.uniform(0.05, 1.0)
        corner = rng.uniform(0.0, L, size=2)
        patch = SquarePatch(grid=grid, coeffs=coeffs, origin=tuple(corner), side=side)
        pts = corner + side * rng.uniform(0.0, 1.0, size=(2, 2))
        out = appendix_oscillation_check(patch, (tuple(pts[0]), tuple(pts[1])))
        if out["lhs"] > out["rhs"]:
            violations += 1
        if out["rhs"] > 0:
            ratios.append(out["lhs"] / out["rhs"])
    if violations:
        log.warning(f"Oscillation inequality violated in {violations}/{n_draws} draws")
    return BoundReport(
        bound_id=BoundId.APPENDIX,
        kind="scalar",
        measured_constants=[max(ratios) if ratios else 0.0],
        n_samples=n_draws,
        seed=seed,
        ratios=ratios,
        violations=violations,
    )
