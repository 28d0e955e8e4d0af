"""
Pairing of co-registered satellite and thermal tiles
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from ..exceptions import InputError, PairingMismatchError
from ..models.tile import GeoTile, PairedCrop, TileSource


def invalid_fraction(tile: GeoTile) -> float:
    """Fraction of pixels flagged invalid in the tile's validity mask"""
    if tile.validity is None:
        return 0.0
    return float(1.0 - np.count_nonzero(tile.validity) / tile.validity.size)


def pair_crops(
    sat_tiles: List[GeoTile], thermal_tiles: List[GeoTile]
) -> List[PairedCrop]:
    """Match satellite and thermal tiles by pixel offset

    Output follows the thermal tile order.
    """
    sat_by_offset: Dict[Tuple[int, int], GeoTile] = {}
    for tile in sat_tiles:
        sat_by_offset[tuple(tile.pixel_offset)] = tile  # type: ignore[index]
    thermal_offsets = {tuple(t.pixel_offset) for t in thermal_tiles}

    for offset in sorted(sat_by_offset):
        if offset not in thermal_offsets:
            raise PairingMismatchError(
                f"Satellite tile at offset {offset} has no thermal counterpart", offset
            )

    pairs = []
    for thermal in thermal_tiles:
        offset = tuple(thermal.pixel_offset)
        satellite = sat_by_offset.get(offset)  # type: ignore[arg-type]
        if satellite is None:
            raise PairingMismatchError(
                f"Thermal tile at offset {offset} has no satellite counterpart", offset
            )
        if satellite.position != thermal.position:
            raise PairingMismatchError(
                f"Tiles at offset {offset} are not co-registered: satellite at"
                f" {satellite.position}, thermal at {thermal.position}",
                offset,
            )
        pairs.append(
            PairedCrop(
                satellite=satellite,
                thermal=thermal,
                source=TileSource.REAL,
                invalid_fraction=invalid_fraction(thermal),
            )
        )

    logging.debug(f"Paired {len(pairs)} satellite/thermal crops")
    return pairs


def filter_invalid(
    pairs: List[PairedCrop], max_invalid_fraction: float = 0.0
) -> List[PairedCrop]:
    """Keep pairs whose invalid fraction does not exceed the threshold

    Meant for TGM training data; SGM keeps every pair.
    """
    if not 0.0 <= max_invalid_fraction <= 1.0:
        raise InputError(
            f"max_invalid_fraction must lie in [0, 1], got {max_invalid_fraction}"
        )
    kept = [p for p in pairs if p.invalid_fraction <= max_invalid_fraction]
    if len(kept) < len(pairs):
        logging.info(
            f"Dropped {len(pairs) - len(kept)} of {len(pairs)} pairs with invalid"
            f" fraction > {max_invalid_fraction}"
        )
    return kept
