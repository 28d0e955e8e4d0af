"""
End-to-end evaluation of a trained model against a descriptor index
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import EmptyDatasetError, FingerprintMismatchError
from ..models.descriptor import DescriptorIndex, QuerySet
from ..models.tile import PairedCrop
from ..retrieval import knn_batch, knn_within
from ..sgm.embedding import embed_images, model_fingerprint
from ..sgm.networks import SgmModel
from .metrics import Outcomes, classify_outcomes, recall_at_n, top1_errors


@dataclass
class EvalReport:
    """Metrics of one ablation cell on one split"""

    r_at: Dict[int, float] = field(default_factory=dict)
    r_prior_at: Dict[Tuple[float, int], float] = field(default_factory=dict)
    l2_prior: Dict[float, float] = field(default_factory=dict)
    per_query_errors: List[float] = field(default_factory=list)
    skipped: int = 0
    queries: int = 0
    outcomes: Outcomes = field(default_factory=Outcomes)
    embed_ms_per_query: float = 0.0
    match_ms_per_query: float = 0.0
    cell_name: str = ""
    split: str = ""
    config_fingerprint: str = ""
    model_fingerprint: str = ""
    config: Dict[str, Any] = field(default_factory=dict)

    def as_flat_dict(self) -> Dict[str, str]:
        """key=value view used by the report file"""
        flat: Dict[str, str] = {
            "cell": self.cell_name,
            "split": self.split,
            "queries": str(self.queries),
            "skipped": str(self.skipped),
        }
        for n, value in sorted(self.r_at.items()):
            flat[f"recall_at_{n}"] = f"{value:.4f}"
        for (d, n), value in sorted(self.r_prior_at.items()):
            flat[f"recall_prior_{d:g}_at_{n}"] = f"{value:.4f}"
        for d, value in sorted(self.l2_prior.items()):
            flat[f"l2_prior_{d:g}_m"] = f"{value:.4f}"
        flat["outcome_success"] = str(self.outcomes.success)
        flat["outcome_offset_error"] = str(self.outcomes.offset_error)
        flat["outcome_failure"] = str(self.outcomes.failure)
        flat["embed_ms_per_query"] = f"{self.embed_ms_per_query:.3f}"
        flat["match_ms_per_query"] = f"{self.match_ms_per_query:.3f}"
        flat["config_fingerprint"] = self.config_fingerprint
        flat["model_fingerprint"] = self.model_fingerprint
        return flat


def check_fingerprint(model: SgmModel, index: DescriptorIndex) -> str:
    """Refuse an index built by different weights"""
    fingerprint = model_fingerprint(model)
    if index.model_fingerprint and index.model_fingerprint != fingerprint:
        raise FingerprintMismatchError(
            f"Index was built by model {index.model_fingerprint[:12]}, checkpoint is"
            f" {fingerprint[:12]}; rebuild the index"
        )
    return fingerprint


def evaluate_queries(
    index: DescriptorIndex,
    queries: QuerySet,
    recall_ns: Sequence[int] = (1, 5),
    prior_radius_m: float = 512.0,
    success_radius_m: float = 50.0,
) -> EvalReport:
    """All metrics from precomputed query descriptors"""
    if len(queries) == 0:
        raise EmptyDatasetError("No queries to evaluate")
    k = max(recall_ns)
    truths = [(float(x), float(y)) for x, y in queries.positions]

    start = time.perf_counter()
    free = knn_batch(index, queries.descriptors, k)
    match_seconds = time.perf_counter() - start
    prior = [
        knn_within(index, q, k, truth, prior_radius_m)
        for q, truth in zip(queries.descriptors, truths)
    ]

    report = EvalReport(queries=len(queries))
    for n in sorted(set(recall_ns)):
        report.r_at[n] = recall_at_n(free, truths, n, success_radius_m)
        report.r_prior_at[(prior_radius_m, n)] = recall_at_n(
            prior, truths, n, success_radius_m
        )
    errors, empty = top1_errors(prior, truths)
    report.per_query_errors = errors
    report.skipped = empty
    report.l2_prior[prior_radius_m] = float(np.mean(errors)) if errors else math.nan
    report.outcomes = classify_outcomes(errors, empty, success_radius_m)
    report.match_ms_per_query = 1000.0 * match_seconds / len(queries)
    if empty:
        logging.warning(f"{empty} queries had no database tile within {prior_radius_m} m")
    return report


def evaluate(
    model: SgmModel,
    index: DescriptorIndex,
    query_pairs: Sequence[PairedCrop],
    recall_ns: Sequence[int] = (1, 5),
    prior_radius_m: float = 512.0,
    success_radius_m: float = 50.0,
    batch_size: int = 32,
    config: Optional[Dict[str, Any]] = None,
) -> EvalReport:
    """Embed thermal queries, search the index and compute every metric"""
    fingerprint = check_fingerprint(model, index)
    if not query_pairs:
        raise EmptyDatasetError("No query pairs to evaluate")

    start = time.perf_counter()
    descriptors, _ = embed_images(model, [p.thermal for p in query_pairs], batch_size)
    embed_seconds = time.perf_counter() - start

    queries = QuerySet(
        descriptors=descriptors,
        positions=np.array([p.position for p in query_pairs]),
        tile_ids=np.array([p.tile_id for p in query_pairs]),
    )
    report = evaluate_queries(index, queries, recall_ns, prior_radius_m, success_radius_m)
    report.embed_ms_per_query = 1000.0 * embed_seconds / len(query_pairs)
    report.model_fingerprint = fingerprint
    report.config = dict(config or {})
    logging.info(
        f"Evaluated {report.queries} queries: "
        + ", ".join(f"R@{n} {v:.1f}" for n, v in sorted(report.r_at.items()))
        + f", L2^{prior_radius_m:g} {report.l2_prior[prior_radius_m]:.1f} m"
    )
    return report
