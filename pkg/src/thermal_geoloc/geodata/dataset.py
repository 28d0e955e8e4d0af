"""
Tiled dataset assembly and its JSON manifest
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

from ..exceptions import ConfigError
from ..models.config import DEFAULT_SPLIT_FRACTIONS
from ..models.raster import RasterMap
from ..models.tile import DatasetSplit, GeoTile, PairedCrop, Rect
from ..utils.checkpoint import atomic_write_bytes
from .io import load_raster
from .pairing import pair_crops
from .splits import (
    SplitSpec,
    point_in_regions,
    select_in_regions,
    split_by_region,
    strip_split_spec,
)
from .tiling import tile_map

MANIFEST_VERSION = 1


@dataclass
class TiledDataset:
    """Paired crops split by region, plus unpaired satellite tiles"""

    split: DatasetSplit
    unpaired_satellite: List[GeoTile]
    crop_size: int
    stride: int
    generated_regions: List[Rect] = field(default_factory=list)
    fingerprint: str = ""

    @property
    def pairs(self) -> List[PairedCrop]:
        return self.split.train + self.split.val + self.split.test


def build_dataset(
    satellite: RasterMap,
    thermal: RasterMap,
    crop_size: int,
    stride: int,
    split_spec: SplitSpec,
    generated_regions: Optional[List[Rect]] = None,
    unpaired_satellite: Optional[RasterMap] = None,
    split_fractions: Sequence[float] = DEFAULT_SPLIT_FRACTIONS,
) -> TiledDataset:
    """Tile, pair and split co-registered maps

    Satellite tiles centred in a generated region are treated as lacking thermal
    coverage: they become the unpaired pool and their pairs are left out of the splits.
    An empty split_spec is replaced by x strips of the real pairs sized by
    split_fractions.
    """
    generated_regions = list(generated_regions or [])
    sat_tiles = tile_map(satellite, crop_size, stride)
    thermal_tiles = tile_map(thermal, crop_size, stride)
    pairs = pair_crops(sat_tiles, thermal_tiles)

    real_pairs = [p for p in pairs if not point_in_regions(p.position, generated_regions)]
    unpaired = select_in_regions(sat_tiles, generated_regions)

    if unpaired_satellite is not None:
        extra = tile_map(
            unpaired_satellite, crop_size, stride, first_tile_id=len(sat_tiles)
        )
        unpaired.extend(extra)

    if not split_spec:
        split_spec = strip_split_spec([p.position for p in real_pairs], split_fractions)
    split = split_by_region(real_pairs, split_spec)
    logging.info(
        f"Dataset: {len(real_pairs)} real pairs, {len(unpaired)} unpaired satellite tiles"
    )
    return TiledDataset(
        split=split,
        unpaired_satellite=unpaired,
        crop_size=crop_size,
        stride=stride,
        generated_regions=generated_regions,
    )


def write_dataset_manifest(
    dataset: TiledDataset,
    path: Union[str, Path],
    satellite_map: str,
    thermal_map: str,
    unpaired_satellite_map: str = "",
    fingerprint: str = "",
) -> None:
    """Record how the dataset was built so later stages can rebuild it"""
    manifest: Dict[str, Any] = {
        "version": MANIFEST_VERSION,
        "satellite_map": str(satellite_map),
        "thermal_map": str(thermal_map),
        "unpaired_satellite_map": str(unpaired_satellite_map),
        "crop_size": dataset.crop_size,
        "stride": dataset.stride,
        "split_spec": {k: [list(r) for r in v] for k, v in dataset.split.split_spec.items()},
        "generated_regions": [list(r) for r in dataset.generated_regions],
        "counts": dataset.split.counts,
        "tile_ids": {
            name: [p.tile_id for p in dataset.split.get(name)]
            for name in ("train", "val", "test")
        },
        "unpaired_tile_ids": [t.tile_id for t in dataset.unpaired_satellite],
        "fingerprint": fingerprint,
    }
    atomic_write_bytes(path, json.dumps(manifest, indent=2).encode("utf-8"))
    logging.info(f"Wrote dataset manifest {path}")


def load_dataset(path: Union[str, Path]) -> TiledDataset:
    """Rebuild a dataset from its manifest and check it still matches"""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Dataset manifest {path} not found; run the tile stage first")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if manifest.get("version") != MANIFEST_VERSION:
        raise ConfigError(f"Unsupported dataset manifest version {manifest.get('version')}")

    unpaired_path = manifest.get("unpaired_satellite_map") or ""
    dataset = build_dataset(
        satellite=load_raster(manifest["satellite_map"]),
        thermal=load_raster(manifest["thermal_map"]),
        crop_size=int(manifest["crop_size"]),
        stride=int(manifest["stride"]),
        split_spec={
            k: [tuple(r) for r in v]  # type: ignore[misc]
            for k, v in manifest["split_spec"].items()
        },
        generated_regions=[
            tuple(r) for r in manifest["generated_regions"]  # type: ignore[misc]
        ],
        unpaired_satellite=load_raster(unpaired_path) if unpaired_path else None,
    )
    for name in ("train", "val", "test"):
        ids = [p.tile_id for p in dataset.split.get(name)]
        if ids != manifest["tile_ids"][name]:
            raise ConfigError(
                f"Maps changed since {path} was written ({name} split differs)"
            )
    dataset.fingerprint = str(manifest.get("fingerprint", ""))
    return dataset
