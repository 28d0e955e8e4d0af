"""
Hardest-positive / hardest-negative selection against a mining cache
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np

from ..exceptions import EmptyDatasetError, InputError
from ..models.descriptor import Descriptor
from ..models.tile import GeoTile
from .cache import MiningCache


@dataclass(eq=False)
class TripletBatch:
    """One query with its mined positive and negatives (cache row indices)"""

    query_position: Tuple[float, float]
    positive_index: int
    negative_indices: List[int]
    positive_id: int
    negative_ids: List[int]
    positive_distance: float
    negative_distances: List[float] = field(default_factory=list)
    query: Optional[GeoTile] = None
    positive: Optional[GeoTile] = None
    negatives: List[GeoTile] = field(default_factory=list)


def _ranked(distances: np.ndarray, tile_ids: np.ndarray) -> np.ndarray:
    """Order by descriptor distance, then tile_id ascending"""
    return np.lexsort((tile_ids, distances))


def mine_triplets(
    query_desc: Union[Descriptor, np.ndarray],
    query_pos: Tuple[float, float],
    cache: MiningCache,
    pos_radius_m: float = 35.0,
    neg_radius_m: float = 50.0,
    n_neg: int = 10,
    query: Optional[GeoTile] = None,
) -> Optional[TripletBatch]:
    """Mine one query against the cache; None means skip (no positive in radius)

    Positive: embedding-nearest cached tile with geo distance <= pos_radius_m.
    Negatives: the n_neg embedding-nearest cached tiles with geo distance
    > neg_radius_m. Tiles in between are used for neither role.
    """
    if len(cache) == 0:
        raise EmptyDatasetError("Mining cache is empty")
    vector = np.asarray(query_desc, dtype=np.float64)
    if vector.shape != (cache.descriptors.shape[1],):
        raise InputError(
            f"Query descriptor has shape {vector.shape}, cache rows have"
            f" {cache.descriptors.shape[1]}"
        )

    geo = np.hypot(
        cache.positions[:, 0] - query_pos[0], cache.positions[:, 1] - query_pos[1]
    )
    desc = np.linalg.norm(cache.descriptors.astype(np.float64) - vector, axis=1)

    positives = np.flatnonzero(geo <= pos_radius_m)
    if positives.size == 0:
        logging.debug(f"No cached tile within {pos_radius_m} m of {query_pos}; skipping")
        return None
    best = positives[_ranked(desc[positives], cache.tile_ids[positives])[0]]

    candidates = np.flatnonzero(geo > neg_radius_m)
    hardest = candidates[_ranked(desc[candidates], cache.tile_ids[candidates])][:n_neg]
    if hardest.size < n_neg:
        logging.warning(
            f"Only {hardest.size} of {n_neg} negatives available beyond {neg_radius_m} m"
        )

    tiles = cache.tiles
    return TripletBatch(
        query_position=(float(query_pos[0]), float(query_pos[1])),
        positive_index=int(best),
        negative_indices=[int(i) for i in hardest],
        positive_id=int(cache.tile_ids[best]),
        negative_ids=[int(cache.tile_ids[i]) for i in hardest],
        positive_distance=float(desc[best]),
        negative_distances=[float(desc[i]) for i in hardest],
        query=query,
        positive=tiles[best] if tiles else None,
        negatives=[tiles[i] for i in hardest] if tiles else [],
    )
