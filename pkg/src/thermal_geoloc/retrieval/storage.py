"""
Binary descriptor index file

Layout (little-endian): magic b"STGL", u32 version, u32 c_final, u64 N, then
N*c_final f32 descriptors, N*2 f64 positions, N u64 tile ids, a 64-byte ASCII
model fingerprint, and a trailing u32 CRC32 of everything before it.
"""

import logging
import struct
import zlib
from pathlib import Path
from typing import Union

import numpy as np

from ..exceptions import (
    ChecksumError,
    IndexFormatError,
    TruncatedIndexError,
    UnsupportedVersionError,
)
from ..models.descriptor import DescriptorIndex
from ..utils.checkpoint import atomic_write_bytes

MAGIC = b"STGL"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIIQ")
FINGERPRINT_BYTES = 64
CRC = struct.Struct("<I")


def _payload_size(c_final: int, n: int) -> int:
    return n * c_final * 4 + n * 2 * 8 + n * 8 + FINGERPRINT_BYTES


def encode_index(index: DescriptorIndex) -> bytes:
    fingerprint = index.model_fingerprint.encode("ascii")
    if len(fingerprint) > FINGERPRINT_BYTES:
        raise IndexFormatError(
            f"Model fingerprint is {len(fingerprint)} bytes, at most"
            f" {FINGERPRINT_BYTES} fit"
        )
    body = b"".join(
        [
            HEADER.pack(MAGIC, FORMAT_VERSION, index.c_final, index.size),
            index.descriptors.astype("<f4").tobytes(),
            index.positions.astype("<f8").tobytes(),
            index.tile_ids.astype("<u8").tobytes(),
            fingerprint.ljust(FINGERPRINT_BYTES, b"\0"),
        ]
    )
    return body + CRC.pack(zlib.crc32(body) & 0xFFFFFFFF)


def decode_index(data: bytes) -> DescriptorIndex:
    if len(data) < HEADER.size:
        raise TruncatedIndexError(f"Index file is {len(data)} bytes, shorter than its header")
    magic, version, c_final, n = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise IndexFormatError(f"Bad magic {magic!r}, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"Index format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    expected = HEADER.size + _payload_size(c_final, n) + CRC.size
    if len(data) < expected:
        raise TruncatedIndexError(
            f"Index file is {len(data)} bytes, header announces {expected}"
        )
    if len(data) > expected:
        raise IndexFormatError(f"{len(data) - expected} trailing bytes after the index")

    body = data[: expected - CRC.size]
    (stored_crc,) = CRC.unpack_from(data, expected - CRC.size)
    if zlib.crc32(body) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError("Index payload does not match its CRC32")

    offset = HEADER.size
    descriptors = np.frombuffer(data, dtype="<f4", count=n * c_final, offset=offset)
    offset += n * c_final * 4
    positions = np.frombuffer(data, dtype="<f8", count=n * 2, offset=offset)
    offset += n * 2 * 8
    tile_ids = np.frombuffer(data, dtype="<u8", count=n, offset=offset)
    offset += n * 8
    fingerprint = data[offset : offset + FINGERPRINT_BYTES].rstrip(b"\0").decode("ascii")

    return DescriptorIndex(
        descriptors=descriptors.reshape(n, c_final).astype(np.float32),
        positions=positions.reshape(n, 2).astype(np.float64),
        tile_ids=tile_ids.astype(np.int64),
        model_fingerprint=fingerprint,
    )


def save_index(index: DescriptorIndex, path: Union[str, Path]) -> None:
    atomic_write_bytes(path, encode_index(index))
    logging.info(f"Saved {index!r} to {path}")


def load_index(path: Union[str, Path]) -> DescriptorIndex:
    path = Path(path)
    if not path.exists():
        raise IndexFormatError(f"Index file {path} not found; run build-index first")
    index = decode_index(path.read_bytes())
    logging.debug(f"Loaded {index!r} from {path}")
    return index
