"""Consensus grading and accuracy blending.

Quality scores come from an iterative minimum-variance estimate over a
grader-by-output grade matrix: each output's consensus is the
inverse-variance-weighted mean of its grades, and each grader's variance is
re-estimated against the leave-that-grader-out consensus of what it graded.
Low variance means the grader tracks the consensus, so its inverse maps to a
review accuracy.  A model's final accuracy blends generation accuracy (match
against references) with review accuracy, 75/25 when ground truth exists and
25/75 when it does not.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping

from .errors import (
    ContractViolationError,
    DomainError,
    MalformedMatrixError,
    ParseError,
)

VARIANCE_FLOOR = 1e-10
PRIOR_VARIANCE = 1.0
DEFAULT_MAX_ITERS = 20
DEFAULT_TOL = 1e-6

Comparator = Callable[[str, str], float]


@dataclass(frozen=True)
class GradeMatrix:
    """Sparse grader-by-output grade matrix, grades in [0, 10]."""

    outputs: tuple[str, ...]
    graders: tuple[str, ...]
    grades: dict[tuple[str, str], float]  # (grader, output) -> grade

    def __post_init__(self) -> None:
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "graders", tuple(self.graders))
        if len(set(self.outputs)) != len(self.outputs):
            raise MalformedMatrixError("duplicate output ids")
        if len(set(self.graders)) != len(self.graders):
            raise MalformedMatrixError("duplicate grader ids")
        known_outputs = set(self.outputs)
        known_graders = set(self.graders)
        graded: set[str] = set()
        for (grader, output), grade in self.grades.items():
            if grader not in known_graders:
                raise MalformedMatrixError(f"grade from unknown grader {grader!r}")
            if output not in known_outputs:
                raise MalformedMatrixError(f"grade for unknown output {output!r}")
            if not math.isfinite(grade) or not 0.0 <= grade <= 10.0:
                raise MalformedMatrixError(
                    f"grade for ({grader!r}, {output!r}) must be in [0, 10], got {grade!r}"
                )
            graded.add(output)
        ungraded = known_outputs - graded
        if ungraded:
            raise MalformedMatrixError(f"outputs without any grade: {sorted(ungraded)}")

    @classmethod
    def from_rows(cls, rows: Iterable[tuple[str, str, float]]) -> "GradeMatrix":
        """Build from (grader, output, grade) rows, preserving first-seen order."""
        graders: list[str] = []
        outputs: list[str] = []
        grades: dict[tuple[str, str], float] = {}
        for grader, output, grade in rows:
            if grader not in graders:
                graders.append(grader)
            if output not in outputs:
                outputs.append(output)
            key = (grader, output)
            if key in grades:
                raise MalformedMatrixError(f"duplicate grade for {key!r}")
            grades[key] = float(grade)
        return cls(outputs=tuple(outputs), graders=tuple(graders), grades=grades)

    def graders_of(self, output: str) -> list[str]:
        # Sorted so that accumulation order never depends on declaration order.
        return sorted(g for g in self.graders if (g, output) in self.grades)

    def outputs_of(self, grader: str) -> list[str]:
        return sorted(o for o in self.outputs if (grader, o) in self.grades)


@dataclass(frozen=True)
class ConsensusResult:
    """Converged (or truncated) state of the minimum-variance iteration."""

    consensus: dict[str, float]  # output -> consensus grade
    variance: dict[str, float]  # grader -> variance estimate
    review_accuracy: dict[str, float]  # grader -> 1 / (1 + variance)
    iterations: int
    converged: bool


@dataclass(frozen=True)
class AccuracyBlend:
    """Weights for combining generation and review accuracy."""

    gen_weight_with_gt: float = 0.75
    review_weight_with_gt: float = 0.25
    gen_weight_without_gt: float = 0.25
    review_weight_without_gt: float = 0.75

    def __post_init__(self) -> None:
        for gen, review, label in (
            (self.gen_weight_with_gt, self.review_weight_with_gt, "with ground truth"),
            (self.gen_weight_without_gt, self.review_weight_without_gt, "without ground truth"),
        ):
            if abs((gen + review) - 1.0) > 1e-12:
                raise DomainError(f"blend weights {label} must sum to 1.0")


def _weighted_consensus(
    matrix: GradeMatrix,
    variance: Mapping[str, float],
    output: str,
    *,
    exclude: str | None = None,
) -> float | None:
    """Inverse-variance-weighted mean grade of one output; None if no grader."""
    total = 0.0
    weight_sum = 0.0
    for grader in sorted(matrix.graders):
        if grader == exclude:
            continue
        grade = matrix.grades.get((grader, output))
        if grade is None:
            continue
        weight = 1.0 / variance[grader]
        total += weight * grade
        weight_sum += weight
    if weight_sum == 0.0:
        return None
    return total / weight_sum


def vancouver_consensus(
    matrix: GradeMatrix,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
) -> ConsensusResult:
    """Iterate consensus scores and grader variances to a fixed point.

    Each round: (1) every output's consensus becomes the
    inverse-variance-weighted mean of its grades; (2) every grader's variance
    becomes the mean squared deviation of its grades from the
    leave-that-grader-out consensus of the outputs it graded, floored at
    ``VARIANCE_FLOOR``.  Outputs where the grader stands alone are skipped in
    its estimate; a grader with no estimable output keeps the neutral prior
    variance 1.0.  Stops when the largest consensus change drops below
    ``tol`` or after ``max_iters`` rounds.  Internal iteration follows sorted
    grader and output ids, so declaration order never affects the result.
    """
    if max_iters < 1:
        raise DomainError(f"max_iters must be >= 1, got {max_iters}")
    if not (math.isfinite(tol) and tol > 0.0):
        raise DomainError(f"tol must be finite and > 0, got {tol!r}")

    variance: dict[str, float] = {g: PRIOR_VARIANCE for g in matrix.graders}
    consensus: dict[str, float] = {}
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        new_consensus: dict[str, float] = {}
        for output in matrix.outputs:
            value = _weighted_consensus(matrix, variance, output)
            if value is None:  # unreachable: the matrix requires >= 1 grade
                raise MalformedMatrixError(f"output {output!r} has no grades")
            new_consensus[output] = value

        change = (
            max(abs(new_consensus[o] - consensus[o]) for o in matrix.outputs)
            if consensus
            else math.inf
        )
        consensus = new_consensus

        new_variance: dict[str, float] = {}
        for grader in matrix.graders:
            deviations: list[float] = []
            for output in matrix.outputs_of(grader):
                others = _weighted_consensus(matrix, variance, output, exclude=grader)
                if others is None:
                    continue  # grader stands alone on this output
                deviations.append((matrix.grades[(grader, output)] - others) ** 2)
            if deviations:
                estimate = sum(deviations) / len(deviations)
                new_variance[grader] = max(VARIANCE_FLOOR, estimate)
            else:
                new_variance[grader] = variance[grader]
        variance = new_variance

        if change < tol:
            converged = True
            break

    review = {g: review_accuracy_from_variance(v) for g, v in variance.items()}
    return ConsensusResult(
        consensus=consensus,
        variance=variance,
        review_accuracy=review,
        iterations=iterations,
        converged=converged,
    )


def review_accuracy_from_variance(v: float) -> float:
    """Map a variance estimate to a review accuracy in (0, 1].

    Uses ``1 / (1 + v)``: strictly decreasing, 1.0 for a perfect reviewer,
    approaching 0 as the variance grows.
    """
    if not math.isfinite(v) or v < 0.0:
        raise DomainError(f"variance must be finite and >= 0, got {v!r}")
    return 1.0 / (1.0 + v)


def _normalized_exact_match(result: str, reference: str) -> float:
    canon = lambda text: " ".join(text.split()).casefold()  # noqa: E731
    return 1.0 if canon(result) == canon(reference) else 0.0


def generation_accuracy(
    result: str,
    ground_truth: str | None,
    comparator: Comparator = _normalized_exact_match,
) -> float:
    """How well one output matches its reference answer.

    Without a reference the score is 0.0.  The default comparator is exact
    match after whitespace and case normalisation; task-specific comparators
    may return any value in [0, 1].
    """
    if ground_truth is None:
        return 0.0
    score = comparator(result, ground_truth)
    if not math.isfinite(score) or not 0.0 <= score <= 1.0:
        raise ContractViolationError(
            f"comparator must return a value in [0, 1], got {score!r}"
        )
    return score


def combined_accuracy(
    gen: float,
    review: float,
    has_ground_truth: bool,
    blend: AccuracyBlend = AccuracyBlend(),
) -> float:
    """Blend generation and review accuracy into the final accuracy.

    75% generation / 25% review when ground truth exists; the emphasis flips
    to 25% / 75% when it does not.
    """
    if not math.isfinite(gen) or not 0.0 <= gen <= 1.0:
        raise DomainError(f"generation accuracy must be in [0, 1], got {gen!r}")
    if not math.isfinite(review) or not 0.0 <= review <= 1.0:
        raise DomainError(f"review accuracy must be in [0, 1], got {review!r}")
    if has_ground_truth:
        return blend.gen_weight_with_gt * gen + blend.review_weight_with_gt * review
    return blend.gen_weight_without_gt * gen + blend.review_weight_without_gt * review


def load_grades_csv(path: str | Path) -> GradeMatrix:
    """Read a ``grader,output_id,grade`` CSV into a grade matrix."""
    rows: list[tuple[str, str, float]] = []
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != ["grader", "output_id", "grade"]:
            raise ParseError(
                f"expected header grader,output_id,grade, got {reader.fieldnames}"
            )
        for number, row in enumerate(reader, start=2):
            try:
                grade = float(row["grade"])
            except (TypeError, ValueError):
                raise ParseError("grade is not a number", row=number, field="grade") from None
            rows.append((row["grader"], row["output_id"], grade))
    try:
        return GradeMatrix.from_rows(rows)
    except MalformedMatrixError as exc:
        raise ParseError(f"invalid grade matrix in {path}: {exc}") from exc


def load_ground_truth_csv(path: str | Path) -> dict[str, str]:
    """Read an ``output_id,reference`` CSV into a reference map."""
    references: dict[str, str] = {}
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != ["output_id", "reference"]:
            raise ParseError(
                f"expected header output_id,reference, got {reader.fieldnames}"
            )
        for number, row in enumerate(reader, start=2):
            output = row["output_id"]
            if output in references:
                raise ParseError(
                    "duplicate output id", row=number, field="output_id"
                )
            references[output] = row["reference"]
    return references
