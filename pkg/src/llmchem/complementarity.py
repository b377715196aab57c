"""Evaluation-side metrics for candidate ensembles.

An ensemble is a set of points in the unit (accuracy, quality) square.  Its
complementarity index blends two views: the hypervolume the points dominate
(coverage of the accuracy-quality trade-off) and Rao's quadratic entropy
(pairwise member diversity).  Marginal-complementarity grids show where a
hypothetical new member would raise the index; soft-voting effectiveness and
Pearson correlation support downstream comparisons.
"""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .core import ModelProfile
from .errors import DomainError, UndefinedCorrelationError

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class EnsemblePoint:
    """One member's position in the unit accuracy-quality square."""

    model: str
    accuracy: float
    quality_norm: float

    def __post_init__(self) -> None:
        for label, value in (("accuracy", self.accuracy), ("quality_norm", self.quality_norm)):
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise DomainError(f"{label} must be in [0, 1], got {value!r}")

    @classmethod
    def from_profile(cls, profile: ModelProfile) -> "EnsemblePoint":
        return cls(model=profile.model, accuracy=profile.accuracy, quality_norm=profile.quality_norm)


@dataclass(frozen=True)
class CIParams:
    """Trade-off weight and geometry for the complementarity index."""

    lam: float = 0.5  # weight on coverage; 1 - lam goes to diversity
    reference_point: tuple[float, float] = (0.0, 0.0)
    distance_norm: float = SQRT2  # max distance in the unit square

    def __post_init__(self) -> None:
        if not math.isfinite(self.lam) or not 0.0 <= self.lam <= 1.0:
            raise DomainError(f"lam must be in [0, 1], got {self.lam!r}")


def hypervolume2d(
    points: Iterable[EnsemblePoint], ref: tuple[float, float] = (0.0, 0.0)
) -> float:
    """Area of the region dominated by ``points`` above ``ref``.

    Computed by a staircase sweep: sort by accuracy descending and accumulate
    each strictly-new quality level's rectangle.  Points that do not dominate
    the reference point contribute nothing; the empty set has volume 0.
    """
    rx, ry = ref
    dominating = [
        (p.accuracy, p.quality_norm)
        for p in points
        if p.accuracy > rx and p.quality_norm > ry
    ]
    dominating.sort(key=lambda xy: (-xy[0], -xy[1]))
    area = 0.0
    best_quality = ry
    for accuracy, quality in dominating:
        if quality > best_quality:
            area += (accuracy - rx) * (quality - best_quality)
            best_quality = quality
    return area


def rao_entropy(points: Sequence[EnsemblePoint]) -> float:
    """Mean pairwise distance under uniform weights, scaled to [0, 1).

    ``sum_ij (1/n^2) * d_ij / sqrt(2)`` with Euclidean distances in the unit
    square.  Zero exactly when all members coincide (including n = 1).
    """
    n = len(points)
    if n == 0:
        raise DomainError("Rao entropy needs at least one point")
    total = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            total += 2.0 * math.dist(
                (points[i].accuracy, points[i].quality_norm),
                (points[j].accuracy, points[j].quality_norm),
            )
    return total / (n * n) / SQRT2


def complementarity_index(
    points: Sequence[EnsemblePoint], params: CIParams = CIParams()
) -> float:
    """Convex blend of coverage and diversity: lam * HV + (1 - lam) * Rao."""
    coverage = hypervolume2d(points, params.reference_point)
    diversity = rao_entropy(points)
    return params.lam * coverage + (1.0 - params.lam) * diversity


#: Grid verdicts below this max |delta| are reported as saturated.
SATURATION_THRESHOLD = 0.01

#: Placeholder member name for hypothetical grid points.
_HYPOTHETICAL = "+candidate"


@dataclass(frozen=True)
class ChemistryMap:
    """Marginal complementarity of a hypothetical new member per grid cell.

    ``cells[i][j]`` holds the index change for a candidate at the centre of
    accuracy bin i and quality bin j.  A near-uniform grid (max |delta| below
    the saturation threshold) marks an ensemble that new members cannot
    improve.
    """

    grid_size: int
    cells: tuple[tuple[float, ...], ...]  # [accuracy bin][quality bin]
    ensemble: tuple[EnsemblePoint, ...]
    params: CIParams
    base_index: float

    @property
    def max_delta(self) -> float:
        return max(value for row in self.cells for value in row)

    @property
    def max_abs_delta(self) -> float:
        return max(abs(value) for row in self.cells for value in row)

    @property
    def saturated(self) -> bool:
        return self.max_abs_delta < SATURATION_THRESHOLD

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["accuracy_bin", "quality_bin", "delta_ci"])
            for i, row in enumerate(self.cells):
                for j, value in enumerate(row):
                    writer.writerow([i, j, repr(value)])

    def summary(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "lambda": self.params.lam,
            "base_index": self.base_index,
            "max_delta_ci": self.max_delta,
            "max_abs_delta_ci": self.max_abs_delta,
            "saturated": self.saturated,
        }


def delta_ci_map(
    ensemble: Sequence[EnsemblePoint],
    params: CIParams = CIParams(),
    grid_size: int = 50,
) -> ChemistryMap:
    """Index change from adding a hypothetical member at each grid cell centre.

    Cell centres sample the open unit square (never exactly 0 or 1), so the
    grid stays clear of degenerate boundary candidates.
    """
    if grid_size < 2:
        raise DomainError(f"grid_size must be >= 2, got {grid_size}")
    base = complementarity_index(ensemble, params)
    members = list(ensemble)
    cells: list[tuple[float, ...]] = []
    for i in range(grid_size):
        accuracy = (i + 0.5) / grid_size
        row: list[float] = []
        for j in range(grid_size):
            quality = (j + 0.5) / grid_size
            candidate = EnsemblePoint(_HYPOTHETICAL, accuracy=accuracy, quality_norm=quality)
            row.append(complementarity_index(members + [candidate], params) - base)
        cells.append(tuple(row))
    return ChemistryMap(
        grid_size=grid_size,
        cells=tuple(cells),
        ensemble=tuple(ensemble),
        params=params,
        base_index=base,
    )


def effectiveness_soft_vote(member_accuracies_per_task: Sequence[Sequence[float]]) -> float:
    """Fraction of tasks the ensemble gets right under soft voting.

    A task counts as correct when the mean member accuracy on it is strictly
    above 0.5.
    """
    tasks = [list(row) for row in member_accuracies_per_task]
    if not tasks or any(not row for row in tasks):
        raise DomainError("effectiveness needs at least one task and one member")
    for row in tasks:
        for value in row:
            if not math.isfinite(value) or not 0.0 <= value <= 1.0:
                raise DomainError(f"accuracy must be in [0, 1], got {value!r}")
    correct = sum(1 for row in tasks if (sum(row) / len(row)) > 0.5)
    return correct / len(tasks)


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Pearson product-moment correlation, defined for non-constant series."""
    if len(xs) != len(ys):
        raise UndefinedCorrelationError(
            f"series lengths differ: {len(xs)} vs {len(ys)}"
        )
    if len(xs) < 2:
        raise UndefinedCorrelationError("correlation needs at least two points")
    try:
        r = statistics.correlation(xs, ys)
    except statistics.StatisticsError as exc:
        raise UndefinedCorrelationError(str(exc)) from exc
    return max(-1.0, min(1.0, r))
