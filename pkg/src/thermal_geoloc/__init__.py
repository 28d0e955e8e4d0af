"""
thermal-geoloc - Satellite-thermal geo-localization

Matches thermal aerial images against a geo-referenced satellite map: a
satellite-to-thermal generator widens the training data, a NetVLAD embedding
trained with triplet and domain-adversarial losses ranks satellite tiles, and
an exact-search index with recall and error metrics evaluates the result.
"""

__version__ = "0.3.0"
__author__ = "thermal-geoloc developers"

from .core.pipeline import GeoLocalizationPipeline
from .exceptions import GeoLocError
from .models.config import CEConfig, DannMode, ExperimentConfig, SgmConfig, TgmConfig
from .models.descriptor import Descriptor, DescriptorIndex, RetrievalResult
from .models.raster import RasterMap
from .models.tile import DatasetSplit, GeoTile, PairedCrop

__all__ = [
    "GeoLocalizationPipeline",
    "GeoLocError",
    "ExperimentConfig",
    "TgmConfig",
    "SgmConfig",
    "CEConfig",
    "DannMode",
    "RasterMap",
    "GeoTile",
    "PairedCrop",
    "DatasetSplit",
    "Descriptor",
    "DescriptorIndex",
    "RetrievalResult",
]
