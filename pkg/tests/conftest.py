"""
Shared fixtures: small synthetic maps, hand-built tiles and tiny networks
"""

from typing import Callable, Tuple

import numpy as np
import pytest
import torch

from thermal_geoloc.models import (
    GeoTile,
    PairedCrop,
    RasterMap,
    SgmConfig,
    TgmConfig,
    TileSource,
    WorldSpec,
)
from thermal_geoloc.sgm import build_sgm, init_clusters
from thermal_geoloc.synthmap import generate_world


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def small_world() -> WorldSpec:
    return WorldSpec(seed=7, size_px=(96, 128), meters_per_pixel=2.0, origin=(100.0, 50.0))


@pytest.fixture
def world_maps(small_world: WorldSpec) -> Tuple[RasterMap, RasterMap]:
    return generate_world(small_world)


@pytest.fixture
def make_tile() -> Callable[..., GeoTile]:
    """Factory for a tile filled with one value (or random pixels when seed is set)"""

    def factory(
        tile_id: int,
        position: Tuple[float, float] = (0.0, 0.0),
        size: int = 16,
        channels: int = 1,
        value: float = 0.5,
        seed: int = -1,
    ) -> GeoTile:
        if seed >= 0:
            image = np.random.default_rng(seed).random((size, size, channels))
        else:
            image = np.full((size, size, channels), value)
        return GeoTile(
            image=image.astype(np.float32),
            pixel_offset=(tile_id, 0),
            position=position,
            tile_id=tile_id,
        )

    return factory


@pytest.fixture
def make_pair(make_tile: Callable[..., GeoTile]) -> Callable[..., PairedCrop]:
    def factory(
        tile_id: int,
        position: Tuple[float, float] = (0.0, 0.0),
        size: int = 16,
        seed: int = -1,
        source: TileSource = TileSource.REAL,
    ) -> PairedCrop:
        satellite = make_tile(tile_id, position, size, channels=3, seed=seed)
        thermal = make_tile(
            tile_id, position, size, channels=1, seed=seed + 1000 if seed >= 0 else -1
        )
        return PairedCrop(satellite=satellite, thermal=thermal, source=source)

    return factory


@pytest.fixture
def tiny_tgm_config() -> TgmConfig:
    return TgmConfig(
        epochs=2,
        decay_start_epoch=1,
        batch_size=2,
        train_resolution=32,
        output_resolution=32,
        depth=3,
        base_width=4,
        disc_width=4,
        disc_layers=2,
    )


@pytest.fixture
def tiny_sgm_config() -> SgmConfig:
    return SgmConfig(
        c_target=8,
        num_clusters=4,
        c_final=32,
        cluster_init="random",
        epochs=1,
        queries_per_epoch=4,
        cache_size=50,
        batch_queries=2,
        negatives_per_query=2,
        domain_hidden=16,
        infer_batch_size=8,
    )


@pytest.fixture
def tiny_sgm(tiny_sgm_config: SgmConfig):
    torch.manual_seed(0)
    model = build_sgm(tiny_sgm_config)
    init_clusters(model, [], "random", seed=0)
    return model.eval()
