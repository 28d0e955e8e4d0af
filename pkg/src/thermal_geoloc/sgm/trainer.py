"""
Training loop of the geo-localization module: cached partial mining, triplet
margin loss and the optional domain-adversarial branch
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch.optim import Adam

from ..evalkit.metrics import recall_prior
from ..exceptions import EmptyDatasetError, TrainingDivergedError
from ..mining import MiningCache, TripletBatch, mine_triplets, refresh_cache
from ..models.config import DannMode, SgmConfig
from ..models.descriptor import QuerySet
from ..models.tile import DatasetSplit, GeoTile, PairedCrop
from ..retrieval import build_index
from ..utils.checkpoint import data_fingerprint, save_checkpoint
from .embedding import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    embed_images,
    images_to_tensor,
    init_clusters,
    sgm_checkpoint_payload,
)
from .losses import dann_loss, sgm_total_loss, triplet_margin_loss
from .networks import SgmModel, build_sgm


@dataclass
class SgmTrainResult:
    model: SgmModel
    history: List[Dict[str, float]] = field(default_factory=list)
    best_score: float = -1.0
    best_epoch: int = 0
    best_path: Optional[Path] = None
    last_path: Optional[Path] = None


@dataclass
class _Pool:
    """Thermal queries and the satellite database they mine against"""

    name: str
    pairs: Sequence[PairedCrop]
    database: List[GeoTile]
    cache: Optional[MiningCache] = None


def validation_score(
    model: SgmModel,
    pairs: Sequence[PairedCrop],
    prior_radius_m: float,
    success_radius_m: float = 50.0,
    batch_size: int = 32,
) -> float:
    """R@1 (percent) with candidates limited to prior_radius_m around the truth"""
    index = build_index(model, [p.satellite for p in pairs], batch_size)
    descriptors, _ = embed_images(model, [p.thermal for p in pairs], batch_size)
    queries = QuerySet(
        descriptors=descriptors,
        positions=np.array([p.position for p in pairs]),
        tile_ids=np.array([p.tile_id for p in pairs]),
    )
    return recall_prior(index, queries, 1, prior_radius_m, success_radius_m)


def _sample_queries(
    rng: np.random.Generator, pools: List[_Pool], count: int, mix_ratio: float
) -> List[Tuple[_Pool, PairedCrop]]:
    queries = []
    for _ in range(count):
        pool = pools[0]
        if len(pools) > 1 and rng.random() < mix_ratio:
            pool = pools[1]
        queries.append((pool, pool.pairs[int(rng.integers(len(pool.pairs)))]))
    return queries


def _mine_batch(
    model: SgmModel, batch: List[Tuple[_Pool, PairedCrop]], config: SgmConfig
) -> Tuple[List[Tuple[PairedCrop, TripletBatch]], int]:
    """Mine each query of a batch; returns usable triplets and the skip count"""
    descriptors, _ = embed_images(
        model, [pair.thermal for _, pair in batch], config.infer_batch_size
    )
    mined = []
    skipped = 0
    for (pool, pair), descriptor in zip(batch, descriptors):
        assert pool.cache is not None
        triplets = mine_triplets(
            descriptor,
            pair.position,
            pool.cache,
            config.pos_radius_m,
            config.neg_radius_m,
            config.negatives_per_query,
            query=pair.thermal,
        )
        if triplets is None or not triplets.negatives:
            skipped += 1
            continue
        mined.append((pair, triplets))
    return mined, skipped


def sgm_batch_loss(
    model: SgmModel,
    mined: List[Tuple[PairedCrop, TripletBatch]],
    config: SgmConfig,
) -> Tuple[torch.Tensor, torch.Tensor, Optional[torch.Tensor]]:
    """Forward queries, positives and negatives together in train mode

    Each query expands to one triplet per mined negative, sharing (q, p).
    """
    queries = [pair.thermal for pair, _ in mined]
    positives = [t.positive for _, t in mined]
    negatives = [n for _, t in mined for n in t.negatives]
    counts = [len(t.negatives) for _, t in mined]

    device = next(model.parameters()).device
    thermal = images_to_tensor(queries).to(device).expand(-1, 3, -1, -1)
    satellite = images_to_tensor(positives + negatives).to(device)  # type: ignore[arg-type]
    descriptors = model(torch.cat([thermal, satellite]))

    b = len(mined)
    q_desc, p_desc, n_desc = descriptors[:b], descriptors[b : 2 * b], descriptors[2 * b :]
    owner = torch.repeat_interleave(
        torch.arange(b, device=device), torch.tensor(counts, device=device)
    )
    q_trip, p_trip = q_desc[owner], p_desc[owner]

    triplet = triplet_margin_loss(q_trip, p_trip, n_desc, config.margin)
    dann: Optional[torch.Tensor] = None
    if config.dann_mode == DannMode.FULL:
        dann = dann_loss(model.domain_classifier, q_trip, p_trip, n_desc)
    elif config.dann_mode == DannMode.ONLY_POSITIVE:
        dann = dann_loss(model.domain_classifier, q_trip, p_trip, None)
    total = sgm_total_loss(triplet, dann, config.lambda2, config.dann_mode)
    return total, triplet, dann


def train_sgm(
    config: SgmConfig,
    splits: DatasetSplit,
    generated: Sequence[PairedCrop] = (),
    checkpoint_dir: Optional[Union[str, Path]] = None,
    success_radius_m: float = 50.0,
    metadata: Optional[Dict[str, Any]] = None,
) -> SgmTrainResult:
    """Train the embedding network on real (and optionally generated) pairs

    Thermal sides must already be contrast-enhanced when config.use_ce is set.
    The best epoch by validation R@1 within val_prior_radius_m is kept; with an
    empty val split the train split is scored instead.
    """
    config.validate()
    if not splits.train:
        raise EmptyDatasetError("Train split is empty")
    if config.use_generated and not generated:
        raise EmptyDatasetError("use_generated is set but the generated dataset is empty")

    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    device = torch.device(config.device)

    pools = [_Pool("real", splits.train, [p.satellite for p in splits.train])]
    if config.use_generated:
        pools.append(_Pool("generated", generated, [p.satellite for p in generated]))
    val_pairs = splits.val or splits.train
    if not splits.val:
        logging.warning("Validation split is empty; selecting checkpoints on train")

    model = build_sgm(config, pretrained=config.pretrained).to(device)
    init_clusters(
        model,
        pools[0].database,
        config.cluster_init,
        config.seed,
        batch_size=config.infer_batch_size,
    )
    optimizer = Adam(model.parameters(), lr=config.learning_rate)

    root = Path(checkpoint_dir) if checkpoint_dir else None
    result = SgmTrainResult(model)
    if root is not None:
        result.best_path = root / BEST_CHECKPOINT
        result.last_path = root / LAST_CHECKPOINT
    fingerprint = data_fingerprint(
        [p.tile_id for pool in pools for p in pool.pairs], extra="sgm"
    )

    logging.info(
        f"Training SGM ({config.backbone}, K={config.num_clusters},"
        f" C_final={config.c_final}, dann={config.dann_mode.value},"
        f" generated={config.use_generated}) on {len(splits.train)} real"
        f" + {len(generated) if config.use_generated else 0} generated pairs"
    )

    step = 0
    for epoch in range(config.epochs):
        for pool in pools:
            pool.cache = refresh_cache(
                model,
                pool.database,
                config.cache_size,
                seed=int(rng.integers(2**31)),
                epoch=epoch,
                batch_size=config.infer_batch_size,
            )
        queries = _sample_queries(
            rng, pools, config.queries_per_epoch, config.generated_mix_ratio
        )

        model.train()
        totals = {"loss": 0.0, "triplet": 0.0, "dann": 0.0}
        batches = 0
        skipped = 0
        for start in range(0, len(queries), config.batch_queries):
            mined, batch_skipped = _mine_batch(
                model, queries[start : start + config.batch_queries], config
            )
            skipped += batch_skipped
            if not mined:
                continue
            model.train()
            optimizer.zero_grad()
            loss, triplet, dann = sgm_batch_loss(model, mined, config)
            value = float(loss.detach())
            if not np.isfinite(value):
                raise TrainingDivergedError(step, "SGM loss", value)
            loss.backward()
            optimizer.step()

            totals["loss"] += value
            totals["triplet"] += float(triplet.detach().mean())
            totals["dann"] += float(dann.detach().mean()) if dann is not None else 0.0
            batches += 1
            step += 1

        if skipped:
            logging.info(
                f"Epoch {epoch + 1}: skipped {skipped}/{len(queries)} queries without"
                f" a positive within {config.pos_radius_m} m or any negative"
            )

        score = validation_score(
            model,
            val_pairs,
            config.val_prior_radius_m,
            success_radius_m,
            config.infer_batch_size,
        )
        entry = {k: v / max(batches, 1) for k, v in totals.items()}
        entry.update(
            {"epoch": float(epoch + 1), "skipped": float(skipped), "val_recall": score}
        )
        result.history.append(entry)
        logging.info(
            f"SGM epoch {epoch + 1}/{config.epochs}: loss {entry['loss']:.4f}"
            f" (triplet {entry['triplet']:.4f}, dann {entry['dann']:.4f}),"
            f" val R_{config.val_prior_radius_m:g}@1 {score:.1f}%"
        )

        improved = score > result.best_score
        if improved:
            result.best_score = score
            result.best_epoch = epoch + 1
        if root is not None:
            payload = sgm_checkpoint_payload(
                model,
                config,
                epoch=epoch + 1,
                history=result.history,
                val_recall=score,
                netvlad_alpha=model.aggregation.alpha,
                data_fingerprint=fingerprint,
                **(metadata or {}),
            )
            save_checkpoint(root / LAST_CHECKPOINT, payload)
            if improved:
                save_checkpoint(root / BEST_CHECKPOINT, payload)
                logging.debug(f"New best checkpoint at epoch {epoch + 1}")

    return result
