"""
Linear contrast enhancement of thermal images around the per-image mean
"""

import logging
from dataclasses import replace
from typing import List

import numpy as np

from ..exceptions import InputError
from ..models.config import CEConfig
from ..models.tile import GeoTile, PairedCrop


def contrast_enhance(img: np.ndarray, factor: float) -> np.ndarray:
    """clip(mean + factor * (img - mean), 0, 1) with a scalar per-image mean"""
    if factor <= 0:
        raise InputError(f"Contrast factor must be > 0, got {factor}")
    array = np.asarray(img)
    if not np.all(np.isfinite(array)):
        raise InputError("Image contains non-finite pixels")
    if factor == 1:
        return array.copy()

    work = array.astype(np.float64)
    mean = work.mean()
    out = np.clip(mean + factor * (work - mean), 0.0, 1.0)
    return out.astype(array.dtype) if np.issubdtype(array.dtype, np.floating) else out


def apply_ce(img: np.ndarray, ce: CEConfig) -> np.ndarray:
    """contrast_enhance when ce is enabled, otherwise the image itself"""
    if not ce.enabled:
        return img
    return contrast_enhance(img, ce.factor)


def enhance_pairs(pairs: List[PairedCrop], ce: CEConfig) -> List[PairedCrop]:
    """Enhance the thermal side of every pair; satellite crops are left alone"""
    if not ce.enabled:
        return pairs

    enhanced = []
    for pair in pairs:
        thermal: GeoTile = replace(
            pair.thermal, image=contrast_enhance(pair.thermal.image, ce.factor)
        )
        enhanced.append(replace(pair, thermal=thermal))
    logging.debug(f"Contrast-enhanced {len(enhanced)} thermal crops (factor {ce.factor})")
    return enhanced
