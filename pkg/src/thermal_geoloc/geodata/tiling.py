"""
Sliding-window tiling of raster maps into geo-referenced crops
"""

import logging
from typing import List

from ..exceptions import TilingError
from ..models.raster import RasterMap
from ..models.tile import GeoTile


def tiles_per_axis(dim: int, crop_size: int, stride: int) -> int:
    """Number of fully contained placements along one axis"""
    if crop_size > dim:
        return 0
    return (dim - crop_size) // stride + 1


def tile_map(
    raster: RasterMap, crop_size: int, stride: int, first_tile_id: int = 0
) -> List[GeoTile]:
    """Tile a map into crop_size crops every stride pixels, row-major

    Crops are views into the map. Each tile is positioned at its centre:
    origin + meters_per_pixel * (offset + crop_size / 2) per axis.
    """
    if stride < 1:
        raise TilingError(f"Stride must be >= 1, got {stride}")
    if crop_size < 1:
        raise TilingError(f"Crop size must be >= 1, got {crop_size}")
    if crop_size > min(raster.height, raster.width):
        raise TilingError(
            f"Map of {raster.height}x{raster.width} px is smaller than crop size"
            f" {crop_size}; tiling would produce no tiles"
        )

    rows = tiles_per_axis(raster.height, crop_size, stride)
    cols = tiles_per_axis(raster.width, crop_size, stride)
    half = crop_size / 2.0
    mask = raster.validity_mask

    tiles = []
    tile_id = first_tile_id
    for i in range(rows):
        r = i * stride
        for j in range(cols):
            c = j * stride
            tiles.append(
                GeoTile(
                    image=raster.pixels[r : r + crop_size, c : c + crop_size],
                    pixel_offset=(r, c),
                    position=raster.pixel_to_position(r + half, c + half),
                    tile_id=tile_id,
                    validity=(
                        None if mask is None else mask[r : r + crop_size, c : c + crop_size]
                    ),
                )
            )
            tile_id += 1

    logging.debug(
        f"Tiled {raster.height}x{raster.width} map into {rows}x{cols} = {len(tiles)}"
        f" crops (crop {crop_size}, stride {stride})"
    )
    return tiles
