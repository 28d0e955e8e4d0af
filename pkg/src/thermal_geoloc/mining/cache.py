"""
Per-epoch cache of database embeddings for partial mining
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from ..exceptions import EmptyDatasetError, InputError
from ..models.tile import GeoTile
from ..sgm.embedding import embed_tiles
from ..sgm.networks import SgmModel


@dataclass(frozen=True, eq=False)
class MiningCache:
    """Embeddings of a random subset of database tiles, fixed for one epoch"""

    descriptors: np.ndarray
    positions: np.ndarray
    tile_ids: np.ndarray
    tiles: Tuple[GeoTile, ...] = ()
    epoch_stamp: int = 0

    def __post_init__(self) -> None:
        n = self.descriptors.shape[0]
        if self.descriptors.ndim != 2:
            raise InputError(f"Cache descriptors must be 2-D, got {self.descriptors.shape}")
        if self.positions.shape != (n, 2) or self.tile_ids.shape != (n,):
            raise InputError("Cache descriptors, positions and tile_ids disagree in length")
        if self.tiles and len(self.tiles) != n:
            raise InputError("Cache tiles disagree in length with its descriptors")
        if not np.all(np.isfinite(self.positions)):
            raise InputError("Cache positions must be finite")

    def __len__(self) -> int:
        return int(self.descriptors.shape[0])

    @classmethod
    def from_arrays(
        cls,
        descriptors: np.ndarray,
        positions: np.ndarray,
        tile_ids: Sequence[int],
        epoch_stamp: int = 0,
    ) -> "MiningCache":
        return cls(
            descriptors=np.asarray(descriptors, dtype=np.float32),
            positions=np.asarray(positions, dtype=np.float64).reshape(-1, 2),
            tile_ids=np.asarray(tile_ids, dtype=np.int64),
            epoch_stamp=epoch_stamp,
        )


def sample_cache_tiles(
    db_tiles: Sequence[GeoTile], cache_size: int, seed: int
) -> np.ndarray:
    """Indices of min(cache_size, |db|) tiles drawn without replacement, sorted"""
    rng = np.random.default_rng(seed)
    take = min(cache_size, len(db_tiles))
    return np.sort(rng.choice(len(db_tiles), take, replace=False))


def refresh_cache(
    model: SgmModel,
    db_tiles: Sequence[GeoTile],
    cache_size: int,
    seed: int,
    epoch: int = 0,
    batch_size: int = 32,
) -> MiningCache:
    """Sample and embed database tiles for this epoch's mining"""
    if not db_tiles:
        raise EmptyDatasetError("Cannot build a mining cache from an empty database")
    if cache_size < 1:
        raise InputError(f"cache_size must be >= 1, got {cache_size}")

    chosen = sample_cache_tiles(db_tiles, cache_size, seed)
    tiles = tuple(db_tiles[i] for i in chosen)
    descriptors = embed_tiles(model, tiles, batch_size)
    cache = MiningCache(
        descriptors=descriptors,
        positions=np.array([t.position for t in tiles], dtype=np.float64).reshape(-1, 2),
        tile_ids=np.array([t.tile_id for t in tiles], dtype=np.int64),
        tiles=tiles,
        epoch_stamp=epoch,
    )
    logging.debug(f"Epoch {epoch}: cached {len(cache)} of {len(db_tiles)} database tiles")
    return cache
