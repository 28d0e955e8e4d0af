"""
Raster map data model
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..exceptions import InputError


@dataclass(frozen=True, eq=False)
class RasterMap:
    """Geo-referenced image with intensities normalized to [0, 1]

    Pixels are stored as (height, width, channels); a 2-D array is promoted to a
    single channel. ``origin`` is the metric (x, y) of pixel (0, 0), x along columns
    and y along rows.
    """

    pixels: np.ndarray
    meters_per_pixel: float = 1.0
    origin: Tuple[float, float] = (0.0, 0.0)
    validity_mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        pixels = np.asarray(self.pixels)
        if pixels.ndim == 2:
            pixels = pixels[:, :, np.newaxis]
        if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
            raise InputError(
                f"Raster must be HxW, HxWx1 or HxWx3, got shape {pixels.shape}"
            )
        if not np.all(np.isfinite(pixels)):
            raise InputError("Raster contains non-finite pixels")
        if pixels.size and (pixels.min() < 0.0 or pixels.max() > 1.0):
            raise InputError(
                f"Raster values must lie in [0, 1], got [{pixels.min()}, {pixels.max()}]"
            )
        if not self.meters_per_pixel > 0:
            raise InputError(
                f"meters_per_pixel must be positive, got {self.meters_per_pixel}"
            )
        object.__setattr__(self, "pixels", pixels)
        object.__setattr__(
            self, "origin", (float(self.origin[0]), float(self.origin[1]))
        )

        if self.validity_mask is not None:
            mask = np.asarray(self.validity_mask, dtype=bool)
            if mask.shape != pixels.shape[:2]:
                raise InputError(
                    f"Validity mask shape {mask.shape} does not match raster"
                    f" {pixels.shape[:2]}"
                )
            object.__setattr__(self, "validity_mask", mask)

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def channels(self) -> int:
        return int(self.pixels.shape[2])

    def pixel_to_position(self, row: float, col: float) -> Tuple[float, float]:
        """Metric (x, y) of a fractional pixel coordinate"""
        return (
            self.origin[0] + self.meters_per_pixel * col,
            self.origin[1] + self.meters_per_pixel * row,
        )

    def __repr__(self) -> str:
        return (
            f"RasterMap(shape={self.pixels.shape}, "
            f"meters_per_pixel={self.meters_per_pixel}, origin={self.origin}, "
            f"mask={'yes' if self.validity_mask is not None else 'no'})"
        )
