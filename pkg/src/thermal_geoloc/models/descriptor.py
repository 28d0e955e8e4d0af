"""
Descriptor, index and query data models
"""

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from ..exceptions import InputError

UNIT_NORM_TOLERANCE = 1e-4


@dataclass(frozen=True, eq=False)
class Descriptor:
    """Global image embedding

    ``degenerate`` marks the zero vector returned when aggregation has nothing to
    normalize.
    """

    vector: np.ndarray
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    def __array__(self, dtype=None) -> np.ndarray:  # type: ignore[no-untyped-def]
        return self.vector if dtype is None else self.vector.astype(dtype)


@dataclass(frozen=True, eq=False)
class DescriptorIndex:
    """Satellite descriptor database with metric positions"""

    descriptors: np.ndarray
    positions: np.ndarray
    tile_ids: np.ndarray
    model_fingerprint: str = ""

    def __post_init__(self) -> None:
        descriptors = np.ascontiguousarray(self.descriptors, dtype=np.float32)
        positions = np.ascontiguousarray(self.positions, dtype=np.float64)
        tile_ids = np.ascontiguousarray(self.tile_ids, dtype=np.int64)
        if descriptors.ndim != 2:
            raise InputError(f"Descriptors must be 2-D, got {descriptors.shape}")
        n = descriptors.shape[0]
        if positions.shape != (n, 2) or tile_ids.shape != (n,):
            raise InputError(
                f"Index rows disagree: descriptors {descriptors.shape}, "
                f"positions {positions.shape}, tile_ids {tile_ids.shape}"
            )
        if len(np.unique(tile_ids)) != n:
            raise InputError("Index tile_ids must be unique")
        if n:
            norms = np.linalg.norm(descriptors.astype(np.float64), axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > UNIT_NORM_TOLERANCE)
            if bad.size:
                raise InputError(
                    f"Index rows are not unit-norm (tile {int(tile_ids[bad[0]])} has"
                    f" norm {norms[bad[0]]:.6f})"
                )
        object.__setattr__(self, "descriptors", descriptors)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "tile_ids", tile_ids)

    @property
    def size(self) -> int:
        return int(self.descriptors.shape[0])

    @property
    def c_final(self) -> int:
        return int(self.descriptors.shape[1])

    def __repr__(self) -> str:
        return (
            f"DescriptorIndex(N={self.size}, c_final={self.c_final}, "
            f"fingerprint='{self.model_fingerprint[:12]}')"
        )


@dataclass(frozen=True, eq=False)
class RetrievalResult:
    """Ranked neighbours of one query, nearest first"""

    tile_ids: np.ndarray
    positions: np.ndarray
    distances: np.ndarray
    failed: bool = False

    def __len__(self) -> int:
        return int(self.tile_ids.shape[0])

    @property
    def top1_position(self) -> Tuple[float, float]:
        if len(self) == 0:
            raise IndexError("Empty retrieval result has no top-1")
        return (float(self.positions[0, 0]), float(self.positions[0, 1]))

    def as_rows(self) -> List[Tuple[int, Tuple[float, float], float]]:
        return [
            (int(t), (float(p[0]), float(p[1])), float(d))
            for t, p, d in zip(self.tile_ids, self.positions, self.distances)
        ]

    @classmethod
    def empty(cls) -> "RetrievalResult":
        return cls(
            tile_ids=np.zeros(0, dtype=np.int64),
            positions=np.zeros((0, 2), dtype=np.float64),
            distances=np.zeros(0, dtype=np.float64),
            failed=True,
        )


@dataclass(frozen=True, eq=False)
class QuerySet:
    """Query descriptors with their true positions"""

    descriptors: np.ndarray
    positions: np.ndarray
    tile_ids: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __post_init__(self) -> None:
        descriptors = np.atleast_2d(np.asarray(self.descriptors))
        positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 2)
        if descriptors.shape[0] != positions.shape[0]:
            raise InputError(
                f"{descriptors.shape[0]} query descriptors but"
                f" {positions.shape[0]} positions"
            )
        tile_ids = np.asarray(self.tile_ids, dtype=np.int64)
        if tile_ids.size == 0:
            tile_ids = np.arange(descriptors.shape[0], dtype=np.int64)
        object.__setattr__(self, "descriptors", descriptors)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "tile_ids", tile_ids)

    def __len__(self) -> int:
        return int(self.descriptors.shape[0])
