"""
Raster loading and saving with key=value sidecar manifests
"""

import logging
from pathlib import Path
from typing import Optional, Union

import numpy as np
from dotenv import dotenv_values
from PIL import Image

from ..exceptions import InputError
from ..models.raster import RasterMap

MANIFEST_SUFFIX = ".manifest"


def manifest_path(raster_path: Union[str, Path]) -> Path:
    """Sidecar manifest next to a raster: <stem>.manifest"""
    path = Path(raster_path)
    return path.with_suffix(MANIFEST_SUFFIX)


def _image_to_unit(image: Image.Image) -> np.ndarray:
    """Decode a Pillow image into float32 intensities in [0, 1]"""
    mode = image.mode
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        array = np.asarray(image, dtype=np.float64)
        return np.clip(array / 65535.0, 0.0, 1.0).astype(np.float32)
    if mode in ("RGBA", "P", "CMYK", "YCbCr"):
        image = image.convert("RGB")
    elif mode == "LA":
        image = image.convert("L")
    elif mode not in ("L", "RGB"):
        raise InputError(f"Unsupported image mode '{mode}'")
    return np.asarray(image, dtype=np.float32) / 255.0


def read_image(path: Union[str, Path]) -> np.ndarray:
    """Read an 8-bit or 16-bit grayscale/RGB image normalized to [0, 1]"""
    path = Path(path)
    if not path.exists():
        raise InputError(f"Image {path} not found")
    with Image.open(path) as image:
        return _image_to_unit(image)


def load_raster(path: Union[str, Path]) -> RasterMap:
    """Load a raster and its sidecar manifest"""
    path = Path(path)
    pixels = read_image(path)

    meta_path = manifest_path(path)
    meta = dotenv_values(meta_path) if meta_path.exists() else {}
    if not meta:
        logging.warning(f"No manifest for {path}; assuming 1 m/px and origin (0, 0)")

    try:
        meters_per_pixel = float(meta.get("meters_per_pixel") or 1.0)
        origin = (float(meta.get("origin_x") or 0.0), float(meta.get("origin_y") or 0.0))
    except ValueError as e:
        raise InputError(f"Malformed manifest {meta_path}: {e}") from e

    mask: Optional[np.ndarray] = None
    mask_name = meta.get("mask")
    if mask_name:
        mask_file = meta_path.parent / mask_name
        mask = read_image(mask_file) > 0.5
        if mask.ndim == 3:
            mask = mask[..., 0]

    raster = RasterMap(
        pixels=pixels, meters_per_pixel=meters_per_pixel, origin=origin, validity_mask=mask
    )
    logging.debug(f"Loaded {raster!r} from {path}")
    return raster


def write_image(path: Union[str, Path], pixels: np.ndarray, sixteen_bit: bool) -> None:
    """Write [0, 1] intensities as 8-bit (gray/RGB) or 16-bit grayscale PNG"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.clip(np.asarray(pixels, dtype=np.float64), 0.0, 1.0)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[..., 0]
    if sixteen_bit:
        if array.ndim != 2:
            raise InputError("16-bit output is only supported for single-channel images")
        Image.fromarray(np.round(array * 65535.0).astype(np.uint16)).save(path)
    else:
        Image.fromarray(np.round(array * 255.0).astype(np.uint8)).save(path)


def save_raster(raster: RasterMap, path: Union[str, Path]) -> None:
    """Save a raster (8-bit RGB or 16-bit gray), its manifest and mask"""
    path = Path(path)
    write_image(path, raster.pixels, sixteen_bit=raster.channels == 1)

    lines = [
        f"meters_per_pixel={raster.meters_per_pixel!r}",
        f"origin_x={raster.origin[0]!r}",
        f"origin_y={raster.origin[1]!r}",
    ]
    if raster.validity_mask is not None:
        mask_file = path.with_name(f"{path.stem}_mask.png")
        write_image(mask_file, raster.validity_mask.astype(np.float64), sixteen_bit=False)
        lines.append(f"mask={mask_file.name}")
    manifest_path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logging.debug(f"Saved {raster!r} to {path}")
