"""
Map loading, tiling, pairing and splitting
"""

from .dataset import TiledDataset, build_dataset, load_dataset, write_dataset_manifest
from .io import load_raster, read_image, save_raster, write_image
from .pairing import filter_invalid, invalid_fraction, pair_crops
from .splits import (
    SplitSpec,
    load_split_spec,
    parse_split_spec,
    select_in_regions,
    split_by_region,
    strip_split_spec,
)
from .tiling import tile_map, tiles_per_axis

__all__ = [
    "SplitSpec",
    "TiledDataset",
    "build_dataset",
    "filter_invalid",
    "invalid_fraction",
    "load_dataset",
    "load_raster",
    "load_split_spec",
    "pair_crops",
    "parse_split_spec",
    "read_image",
    "save_raster",
    "select_in_regions",
    "split_by_region",
    "strip_split_spec",
    "tile_map",
    "tiles_per_axis",
    "write_dataset_manifest",
    "write_image",
]
