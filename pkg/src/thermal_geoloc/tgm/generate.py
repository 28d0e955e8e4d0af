"""
Generated dataset: thermal crops synthesized from unpaired satellite tiles
"""

import io
import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import torch
from PIL import Image

from ..enhance import contrast_enhance
from ..exceptions import CheckpointError, InputError
from ..models.config import TgmConfig
from ..models.tile import GeoTile, PairedCrop, TileSource
from ..utils.checkpoint import atomic_write_bytes, load_checkpoint
from .networks import UnetGenerator
from .trainer import CHECKPOINT_KIND, from_unit_range, resize, to_unit_range


def load_generator(path: Union[str, Path]) -> Tuple[UnetGenerator, TgmConfig]:
    """Rebuild the trained generator from a TGM checkpoint"""
    payload = load_checkpoint(path, CHECKPOINT_KIND)
    try:
        config = TgmConfig(**payload["config"])
        generator = UnetGenerator(config.depth, config.base_width, config.norm)
        generator.load_state_dict(payload["generator"])
    except (KeyError, TypeError, RuntimeError) as e:
        raise CheckpointError(f"Checkpoint {path} does not hold a usable generator: {e}")
    generator.eval()
    logging.info(f"Loaded generator from {path} (epoch {payload.get('epoch')})")
    return generator, config


@torch.no_grad()
def generate_dataset(
    generator: UnetGenerator,
    unpaired_sats: Sequence[GeoTile],
    output_resolution: int,
    train_resolution: int = 0,
    use_ce: bool = False,
    ce_factor: float = 3.0,
    batch_size: int = 8,
) -> List[PairedCrop]:
    """One generated pair per satellite tile, positions inherited

    Satellite crops are upsampled to train_resolution, translated, and the output
    downsampled back to output_resolution.
    """
    if not unpaired_sats:
        return []
    train_resolution = train_resolution or output_resolution
    for tile in unpaired_sats:
        if tile.channels != 3:
            raise InputError(f"Tile {tile.tile_id} is not a 3-channel satellite crop")
        if tile.crop_size != output_resolution:
            raise InputError(
                f"Tile {tile.tile_id} is {tile.crop_size} px, expected {output_resolution}"
            )

    was_training = generator.training
    generator.eval()
    device = next(generator.parameters()).device

    pairs: List[PairedCrop] = []
    for start in range(0, len(unpaired_sats), batch_size):
        chunk = unpaired_sats[start : start + batch_size]
        satellite = to_unit_range(np.stack([t.image for t in chunk])).to(device)
        output = generator(resize(satellite, train_resolution))
        thermal = from_unit_range(resize(output, output_resolution))
        for tile, image in zip(chunk, thermal):
            if use_ce:
                image = contrast_enhance(image, ce_factor)
            generated = GeoTile(
                image=image,
                pixel_offset=tile.pixel_offset,
                position=tile.position,
                tile_id=tile.tile_id,
            )
            pairs.append(PairedCrop(tile, generated, source=TileSource.GENERATED))

    generator.train(was_training)
    logging.info(f"Generated {len(pairs)} thermal crops")
    return pairs


def save_generated_dataset(
    pairs: Sequence[PairedCrop], path: Union[str, Path], fingerprint: str = ""
) -> None:
    """Store generated thermal crops as 16-bit arrays keyed by tile id"""
    if pairs:
        thermal = np.stack([p.thermal.image[..., 0] for p in pairs])
    else:
        thermal = np.zeros((0, 0, 0))
    buffer = io.BytesIO()
    np.savez_compressed(
        buffer,
        thermal=np.round(np.clip(thermal, 0.0, 1.0) * 65535.0).astype(np.uint16),
        tile_ids=np.array([p.tile_id for p in pairs], dtype=np.int64),
        fingerprint=np.array(fingerprint),
    )
    atomic_write_bytes(path, buffer.getvalue())
    logging.info(f"Saved {len(pairs)} generated crops to {path}")


def generated_fingerprint(path: Union[str, Path]) -> str:
    """Fingerprint stored with a generated dataset; empty when missing or unreadable"""
    path = Path(path)
    if not path.exists():
        return ""
    try:
        with np.load(path) as data:
            return str(data["fingerprint"])
    except (OSError, KeyError, ValueError) as e:
        logging.warning(f"Cannot read {path}: {e}")
        return ""


def load_generated_dataset(
    path: Union[str, Path], satellite_tiles: Sequence[GeoTile]
) -> List[PairedCrop]:
    """Re-attach stored generated crops to their satellite tiles"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Generated dataset {path} not found; run generate first")
    with np.load(path) as data:
        thermal = data["thermal"].astype(np.float32) / 65535.0
        tile_ids = data["tile_ids"]

    by_id: Dict[int, GeoTile] = {t.tile_id: t for t in satellite_tiles}
    pairs = []
    for tile_id, image in zip(tile_ids, thermal):
        tile = by_id.get(int(tile_id))
        if tile is None:
            raise CheckpointError(
                f"Generated crop {int(tile_id)} has no satellite tile in the dataset"
            )
        generated = GeoTile(
            image=image[..., None],
            pixel_offset=tile.pixel_offset,
            position=tile.position,
            tile_id=tile.tile_id,
        )
        pairs.append(PairedCrop(tile, generated, source=TileSource.GENERATED))
    return pairs


def _to_rgb_uint8(image: np.ndarray) -> np.ndarray:
    array = np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0)
    if array.ndim == 2:
        array = array[..., None]
    if array.shape[2] == 1:
        array = np.repeat(array, 3, axis=2)
    return np.round(array * 255.0).astype(np.uint8)


def save_image_grid(
    satellite: Sequence[np.ndarray],
    real: Sequence[np.ndarray],
    generated: Sequence[np.ndarray],
    path: Union[str, Path],
) -> None:
    """One row per sample: satellite | real thermal | generated thermal"""
    if not (len(satellite) == len(real) == len(generated)) or not satellite:
        raise InputError("Image grid needs equally long, non-empty columns")
    rows = [
        np.concatenate([_to_rgb_uint8(s), _to_rgb_uint8(r), _to_rgb_uint8(g)], axis=1)
        for s, r, g in zip(satellite, real, generated)
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.concatenate(rows, axis=0)).save(path)
