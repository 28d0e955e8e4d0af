"""
Procedural co-registered satellite/thermal worlds
"""

import logging
from typing import Tuple

import numpy as np

from ..exceptions import ConfigError
from ..models.raster import RasterMap
from ..models.world import TERRAIN_CLASSES, WorldSpec

# Noise stream ids mixed into the Philox key
STREAM_HEIGHT = 0
STREAM_VARIATION = 1
STREAM_THERMAL = 2

# RGB base colour per terrain class
CLASS_COLORS = np.array(
    [
        [0.76, 0.66, 0.48],  # desert
        [0.33, 0.48, 0.24],  # farm
        [0.42, 0.42, 0.43],  # road
        [0.72, 0.69, 0.66],  # building
    ]
)

# thermal = offset + gain * luminance, per terrain class
THERMAL_OFFSET = np.array([0.45, 0.20, 0.60, 0.70])
THERMAL_GAIN = np.array([0.10, 0.30, 0.30, 0.25])

COLOR_VARIATION = 0.15
BASE_CELL = 64
OCTAVES = 4


def _generator(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream)"""
    if seed < 0:
        raise ConfigError(f"World seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(key=seed * 16 + stream))


def _value_noise(rng: np.random.Generator, shape: Tuple[int, int], cell: int) -> np.ndarray:
    """Smoothstep-interpolated lattice noise in [0, 1]"""
    height, width = shape
    cell = max(1, cell)
    lattice = rng.random((height // cell + 2, width // cell + 2))

    ys = np.arange(height) / cell
    xs = np.arange(width) / cell
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    ty = ys - y0
    tx = xs - x0
    ty = ty * ty * (3.0 - 2.0 * ty)
    tx = tx * tx * (3.0 - 2.0 * tx)

    top = lattice[y0][:, x0] * (1 - tx) + lattice[y0][:, x0 + 1] * tx
    bottom = lattice[y0 + 1][:, x0] * (1 - tx) + lattice[y0 + 1][:, x0 + 1] * tx
    return top * (1 - ty)[:, None] + bottom * ty[:, None]


def _fractal_noise(seed: int, stream: int, shape: Tuple[int, int]) -> np.ndarray:
    """Sum of octaves of value noise, rescaled to [0, 1]"""
    rng = _generator(seed, stream)
    total = np.zeros(shape)
    amplitude_sum = 0.0
    for octave in range(OCTAVES):
        amplitude = 0.5**octave
        total += amplitude * _value_noise(rng, shape, BASE_CELL >> octave)
        amplitude_sum += amplitude
    return total / amplitude_sum


def terrain_classes(spec: WorldSpec) -> np.ndarray:
    """Class id per pixel (index into TERRAIN_CLASSES)

    The heightfield is ranked and cut at the cumulative terrain_mix fractions,
    so each class covers its share of pixels to within one pixel.
    """
    height, width = spec.size_px
    field = _fractal_noise(spec.seed, STREAM_HEIGHT, (height, width)).ravel()
    order = np.argsort(field, kind="stable")

    n = field.size
    bounds = np.round(np.cumsum(spec.mix_vector) * n).astype(int)
    bounds[-1] = n

    classes = np.empty(n, dtype=np.int64)
    start = 0
    for class_id, stop in enumerate(bounds):
        classes[order[start:stop]] = class_id
        start = stop
    return classes.reshape(height, width)


def luminance(pixels: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an HxWx3 array"""
    return pixels[..., 0] * 0.299 + pixels[..., 1] * 0.587 + pixels[..., 2] * 0.114


def thermal_response(
    satellite: np.ndarray, classes: np.ndarray, contrast: float
) -> np.ndarray:
    """Noise-free thermal intensity for satellite pixels of known class"""
    lum = luminance(np.asarray(satellite, dtype=np.float64))
    raw = THERMAL_OFFSET[classes] + THERMAL_GAIN[classes] * lum
    return 0.5 + contrast * (raw - 0.5)


def generate_world(spec: WorldSpec) -> Tuple[RasterMap, RasterMap]:
    """Build a (satellite, thermal) map pair that is deterministic in spec.seed"""
    spec.validate()
    height, width = spec.size_px

    classes = terrain_classes(spec)
    variation = _fractal_noise(spec.seed, STREAM_VARIATION, (height, width))
    satellite = CLASS_COLORS[classes] + COLOR_VARIATION * (variation[..., None] - 0.5)
    satellite = np.clip(satellite, 0.0, 1.0)

    thermal = thermal_response(satellite, classes, spec.thermal_contrast)
    if spec.thermal_noise_std > 0:
        noise = _generator(spec.seed, STREAM_THERMAL).standard_normal((height, width))
        thermal = thermal + spec.thermal_noise_std * noise
    thermal = np.clip(thermal, 0.0, 1.0)

    counts = np.bincount(classes.ravel(), minlength=len(TERRAIN_CLASSES))
    logging.info(
        f"Generated {height}x{width} world (seed {spec.seed}): "
        + ", ".join(
            f"{name} {count / classes.size:.1%}"
            for name, count in zip(TERRAIN_CLASSES, counts)
        )
    )

    satellite_map = RasterMap(
        pixels=satellite.astype(np.float32),
        meters_per_pixel=spec.meters_per_pixel,
        origin=spec.origin,
    )
    thermal_map = RasterMap(
        pixels=thermal.astype(np.float32),
        meters_per_pixel=spec.meters_per_pixel,
        origin=spec.origin,
    )
    return satellite_map, thermal_map
