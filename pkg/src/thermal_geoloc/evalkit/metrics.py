"""
Recall@N, prior-constrained recall and top-1 position error
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..exceptions import InputError
from ..models.descriptor import DescriptorIndex, QuerySet, RetrievalResult
from ..retrieval import knn_batch, knn_within

Position = Tuple[float, float]


def _first_hit_rank(result: RetrievalResult, truth: Position, radius_m: float) -> int:
    """0-based rank of the first retrieval within radius_m of truth, -1 if none"""
    if len(result) == 0:
        return -1
    geo = np.hypot(result.positions[:, 0] - truth[0], result.positions[:, 1] - truth[1])
    hits = np.flatnonzero(geo <= radius_m)
    return int(hits[0]) if hits.size else -1


def recall_at_n(
    results: Sequence[RetrievalResult],
    truths: Sequence[Position],
    n: int,
    success_radius_m: float = 50.0,
) -> float:
    """Percentage of queries with at least one of the top-n within success_radius_m"""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if len(results) != len(truths):
        raise InputError(f"{len(results)} results but {len(truths)} true positions")
    if not results:
        return 0.0
    hits = 0
    for result, truth in zip(results, truths):
        rank = _first_hit_rank(result, truth, success_radius_m)
        if 0 <= rank < n:
            hits += 1
    return 100.0 * hits / len(results)


def search_all(index: DescriptorIndex, queries: QuerySet, k: int) -> List[RetrievalResult]:
    return knn_batch(index, queries.descriptors, k)


def search_prior(
    index: DescriptorIndex, queries: QuerySet, k: int, d_m: float = 512.0
) -> List[RetrievalResult]:
    """knn_within centred on each query's true position"""
    return [
        knn_within(index, q, k, (float(pos[0]), float(pos[1])), d_m)
        for q, pos in zip(queries.descriptors, queries.positions)
    ]


def _truths(queries: QuerySet) -> List[Position]:
    return [(float(x), float(y)) for x, y in queries.positions]


def recall_prior(
    index: DescriptorIndex,
    queries: QuerySet,
    n: int,
    d_m: float = 512.0,
    success_radius_m: float = 50.0,
) -> float:
    """recall_at_n with candidates limited to d_m around the true position

    Queries with no candidate in range count as failures.
    """
    results = search_prior(index, queries, n, d_m)
    return recall_at_n(results, _truths(queries), n, success_radius_m)


def top1_errors(
    results: Sequence[RetrievalResult], truths: Sequence[Position]
) -> Tuple[List[float], int]:
    """Top-1 position errors in meters, and the number of empty results"""
    errors = []
    skipped = 0
    for result, truth in zip(results, truths):
        if len(result) == 0:
            skipped += 1
            continue
        x, y = result.top1_position
        errors.append(math.hypot(x - truth[0], y - truth[1]))
    return errors, skipped


def l2_error_prior(
    index: DescriptorIndex, queries: QuerySet, d_m: float = 512.0
) -> Tuple[float, List[float]]:
    """Mean top-1 position error (m) within the d_m prior, and per-query errors

    Queries with no candidate in range are left out of both.
    """
    errors, skipped = top1_errors(search_prior(index, queries, 1, d_m), _truths(queries))
    if skipped:
        logging.warning(f"{skipped} queries had no database tile within {d_m} m")
    if not errors:
        return float("nan"), []
    return float(np.mean(errors)), errors


@dataclass
class Histogram:
    """Counts per [edges[i], edges[i+1]) bin, plus under- and overflow"""

    edges: List[float]
    counts: List[int]
    overflow: int = 0
    underflow: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts) + self.overflow + self.underflow

    def rows(self) -> List[Tuple[float, float, int]]:
        """(bin_start, bin_end, count), overflow last with an infinite end"""
        out = [
            (self.edges[i], self.edges[i + 1], count) for i, count in enumerate(self.counts)
        ]
        out.append((self.edges[-1], math.inf, self.overflow))
        if self.underflow:
            out.insert(0, (-math.inf, self.edges[0], self.underflow))
        return out


def error_histogram(errors: Sequence[float], bin_edges: Sequence[float]) -> Histogram:
    """Bin errors; values >= the last edge go to overflow"""
    edges = [float(e) for e in bin_edges]
    if len(edges) < 2:
        raise InputError("Histogram needs at least two edges")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise InputError(f"Histogram edges must be strictly increasing: {edges}")

    values = np.asarray(errors, dtype=np.float64)
    slots = np.searchsorted(np.asarray(edges), values, side="right")
    counts = [int(np.count_nonzero(slots == i + 1)) for i in range(len(edges) - 1)]
    return Histogram(
        edges=edges,
        counts=counts,
        overflow=int(np.count_nonzero(slots == len(edges))),
        underflow=int(np.count_nonzero(slots == 0)),
    )


@dataclass
class Outcomes:
    """Per-query localization outcome counts from top-1 prior errors"""

    success: int = 0
    offset_error: int = 0
    failure: int = 0


def classify_outcomes(
    errors: Sequence[float],
    empty: int,
    success_radius_m: float = 50.0,
    failure_radius_m: float = 100.0,
) -> Outcomes:
    """success within success_radius_m, failure at failure_radius_m or beyond"""
    outcomes = Outcomes(failure=empty)
    for error in errors:
        if error <= success_radius_m:
            outcomes.success += 1
        elif error < failure_radius_m:
            outcomes.offset_error += 1
        else:
            outcomes.failure += 1
    return outcomes
