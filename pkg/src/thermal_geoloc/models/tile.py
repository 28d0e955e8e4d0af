"""
Tile, pair and split data models
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import InputError


class TileSource(str, Enum):
    """Where the thermal side of a pair comes from"""

    REAL = "real"
    GENERATED = "generated"


@dataclass(frozen=True, eq=False)
class GeoTile:
    """Square crop of a raster map with its geo-position"""

    image: np.ndarray
    pixel_offset: Tuple[int, int]
    position: Tuple[float, float]
    tile_id: int
    validity: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    @property
    def crop_size(self) -> int:
        return int(self.image.shape[0])

    @property
    def channels(self) -> int:
        return int(self.image.shape[2]) if self.image.ndim == 3 else 1

    def __repr__(self) -> str:
        return (
            f"GeoTile(tile_id={self.tile_id}, offset={self.pixel_offset}, "
            f"position=({self.position[0]:.1f}, {self.position[1]:.1f}), "
            f"shape={self.image.shape})"
        )


@dataclass(frozen=True, eq=False)
class PairedCrop:
    """Aligned satellite/thermal tile pair"""

    satellite: GeoTile
    thermal: GeoTile
    source: TileSource = TileSource.REAL
    invalid_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.satellite.position != self.thermal.position:
            raise InputError(
                f"Pair positions differ: {self.satellite.position} vs"
                f" {self.thermal.position}"
            )
        if not 0.0 <= self.invalid_fraction <= 1.0:
            raise InputError(f"invalid_fraction out of range: {self.invalid_fraction}")
        if self.source == TileSource.GENERATED and self.invalid_fraction != 0.0:
            raise InputError("Generated pairs cannot contain invalid regions")

    @property
    def tile_id(self) -> int:
        return self.thermal.tile_id

    @property
    def position(self) -> Tuple[float, float]:
        return self.thermal.position

    def __repr__(self) -> str:
        return (
            f"PairedCrop(tile_id={self.tile_id}, source={self.source.value}, "
            f"invalid_fraction={self.invalid_fraction:.3f})"
        )


Rect = Tuple[float, float, float, float]


@dataclass
class DatasetSplit:
    """Region-based train/val/test partition of paired crops"""

    train: List[PairedCrop]
    val: List[PairedCrop]
    test: List[PairedCrop]
    split_spec: Dict[str, List[Rect]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        seen: Dict[int, str] = {}
        for name in ("train", "val", "test"):
            for pair in getattr(self, name):
                if pair.tile_id in seen:
                    raise InputError(
                        f"Tile {pair.tile_id} appears in both '{seen[pair.tile_id]}'"
                        f" and '{name}'"
                    )
                seen[pair.tile_id] = name

    def get(self, name: str) -> List[PairedCrop]:
        if name not in ("train", "val", "test"):
            raise KeyError(f"Unknown split '{name}'")
        return getattr(self, name)

    @property
    def counts(self) -> Dict[str, int]:
        """Number of pairs per split"""
        return {"train": len(self.train), "val": len(self.val), "test": len(self.test)}

    def __str__(self) -> str:
        c = self.counts
        return f"DatasetSplit {c['train']}/{c['val']}/{c['test']} (train/val/test)"
