"""
Models package for thermal geo-localization
"""

from .config import (
    CEConfig,
    DannMode,
    ExperimentConfig,
    PathsConfig,
    SgmConfig,
    TgmConfig,
)
from .descriptor import Descriptor, DescriptorIndex, QuerySet, RetrievalResult
from .raster import RasterMap
from .tile import DatasetSplit, GeoTile, PairedCrop, Rect, TileSource
from .world import TERRAIN_CLASSES, WorldSpec

__all__ = [
    "CEConfig",
    "DannMode",
    "DatasetSplit",
    "Descriptor",
    "DescriptorIndex",
    "ExperimentConfig",
    "GeoTile",
    "PairedCrop",
    "PathsConfig",
    "QuerySet",
    "RasterMap",
    "Rect",
    "RetrievalResult",
    "SgmConfig",
    "TERRAIN_CLASSES",
    "TgmConfig",
    "TileSource",
    "WorldSpec",
]
