"""
Satellite descriptor database and exact search
"""

from .search import build_index, descriptor_distances, knn, knn_batch, knn_within
from .storage import (
    FORMAT_VERSION,
    MAGIC,
    decode_index,
    encode_index,
    load_index,
    save_index,
)

__all__ = [
    "FORMAT_VERSION",
    "MAGIC",
    "build_index",
    "decode_index",
    "descriptor_distances",
    "encode_index",
    "knn",
    "knn_batch",
    "knn_within",
    "load_index",
    "save_index",
]
