"""
Partial triplet mining over cached database embeddings
"""

from .cache import MiningCache, refresh_cache, sample_cache_tiles
from .triplets import TripletBatch, mine_triplets

__all__ = [
    "MiningCache",
    "TripletBatch",
    "mine_triplets",
    "refresh_cache",
    "sample_cache_tiles",
]
