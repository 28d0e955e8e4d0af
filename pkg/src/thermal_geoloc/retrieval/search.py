"""
Descriptor database construction and exact nearest-neighbour search
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..exceptions import EmptyDatasetError, InputError
from ..models.descriptor import Descriptor, DescriptorIndex, RetrievalResult
from ..models.tile import GeoTile
from ..sgm.embedding import embed_images, model_fingerprint
from ..sgm.networks import SgmModel

# Rows per distance block; bounds the float64 temporaries
BLOCK_ROWS = 4096

QueryVector = Union[Descriptor, np.ndarray]


def build_index(
    model: SgmModel, db_tiles: Sequence[GeoTile], batch_size: int = 32
) -> DescriptorIndex:
    """Embed every database tile in tile_id order"""
    if not db_tiles:
        raise EmptyDatasetError("Cannot build an index from an empty tile list")
    tiles = sorted(db_tiles, key=lambda t: t.tile_id)
    descriptors, degenerate = embed_images(model, tiles, batch_size)
    if degenerate.any():
        first = tiles[int(np.flatnonzero(degenerate)[0])]
        raise InputError(
            f"Tile {first.tile_id} produced a degenerate descriptor"
            f" ({int(degenerate.sum())} in total); cannot index it"
        )
    index = DescriptorIndex(
        descriptors=descriptors,
        positions=np.array([t.position for t in tiles], dtype=np.float64),
        tile_ids=np.array([t.tile_id for t in tiles], dtype=np.int64),
        model_fingerprint=model_fingerprint(model),
    )
    logging.info(f"Built {index!r}")
    return index


def descriptor_distances(
    descriptors: np.ndarray, q: QueryVector, rows: Optional[np.ndarray] = None
) -> np.ndarray:
    """L2 distances accumulated in float64 from float32 rows"""
    vector = np.asarray(q, dtype=np.float64).ravel()
    if vector.shape[0] != descriptors.shape[1]:
        raise InputError(
            f"Query has {vector.shape[0]} dims, index has {descriptors.shape[1]}"
        )
    if rows is None:
        rows = np.arange(descriptors.shape[0])
    out = np.empty(rows.shape[0], dtype=np.float64)
    for start in range(0, rows.shape[0], BLOCK_ROWS):
        block = descriptors[rows[start : start + BLOCK_ROWS]].astype(np.float64)
        out[start : start + BLOCK_ROWS] = np.sqrt(((block - vector) ** 2).sum(axis=1))
    return out


def _top_k(
    index: DescriptorIndex, q: QueryVector, k: int, rows: np.ndarray
) -> RetrievalResult:
    distances = descriptor_distances(index.descriptors, q, rows)
    order = np.lexsort((index.tile_ids[rows], distances))[:k]
    chosen = rows[order]
    return RetrievalResult(
        tile_ids=index.tile_ids[chosen].copy(),
        positions=index.positions[chosen].copy(),
        distances=distances[order],
    )


def _checked_k(index: DescriptorIndex, k: int) -> int:
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if index.size == 0:
        raise EmptyDatasetError("Descriptor index is empty")
    if k > index.size:
        logging.warning(f"k={k} exceeds index size {index.size}; returning all rows")
        k = index.size
    return k


def knn(index: DescriptorIndex, q: QueryVector, k: int) -> RetrievalResult:
    """Exact top-k by descriptor distance; ties go to the lower tile_id"""
    k = _checked_k(index, k)
    return _top_k(index, q, k, np.arange(index.size))


def knn_batch(
    index: DescriptorIndex, queries: np.ndarray, k: int
) -> List[RetrievalResult]:
    """knn for every query row; k is checked once for the whole batch"""
    k = _checked_k(index, k)
    rows = np.arange(index.size)
    return [_top_k(index, q, k, rows) for q in queries]


def knn_within(
    index: DescriptorIndex,
    q: QueryVector,
    k: int,
    center: Tuple[float, float],
    radius_m: float,
) -> RetrievalResult:
    """Exact top-k among tiles within radius_m (inclusive) of center

    No candidate in range gives an empty result flagged as failed.
    """
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if not radius_m > 0:
        raise InputError(f"radius_m must be > 0, got {radius_m}")
    geo = np.hypot(index.positions[:, 0] - center[0], index.positions[:, 1] - center[1])
    rows = np.flatnonzero(geo <= radius_m)
    if rows.size == 0:
        logging.debug(f"No database tile within {radius_m} m of {center}")
        return RetrievalResult.empty()
    return _top_k(index, q, k, rows)

