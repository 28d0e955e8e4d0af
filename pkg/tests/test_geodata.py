"""
Tests for map I/O, tiling, pairing, region splits and dataset manifests
"""

import json

import numpy as np
import pytest

from thermal_geoloc.exceptions import (
    ConfigError,
    InputError,
    PairingMismatchError,
    TilingError,
    UnassignedRegionError,
)
from thermal_geoloc.geodata import (
    build_dataset,
    filter_invalid,
    invalid_fraction,
    load_dataset,
    load_raster,
    load_split_spec,
    pair_crops,
    parse_split_spec,
    read_image,
    save_raster,
    select_in_regions,
    split_by_region,
    strip_split_spec,
    tile_map,
    tiles_per_axis,
    write_dataset_manifest,
    write_image,
)
from thermal_geoloc.geodata.io import manifest_path
from thermal_geoloc.models import RasterMap, WorldSpec
from thermal_geoloc.synthmap import generate_world

FAR = 1e9

# Tile centres of the 96x128 / 2 m / origin (100, 50) world with crop 32, stride 16:
# x in {132, 164, 196, 228, 260, 292, 324}, y in {82, 114, 146, 178, 210}
SPLITS = {
    "train": [(0.0, 0.0, 250.0, FAR)],
    "val": [(250.0, 0.0, 290.0, FAR)],
    "test": [(290.0, 0.0, FAR, FAR)],
}
GENERATED = [(0.0, 0.0, 250.0, 120.0)]


def blank_raster(height: int, width: int, channels: int = 1, **kwargs) -> RasterMap:
    return RasterMap(pixels=np.zeros((height, width, channels)), **kwargs)


@pytest.mark.unit
class TestTiling:
    def test_reference_case_yields_nine_tiles(self):
        tiles = tile_map(blank_raster(582, 582), crop_size=512, stride=35)
        assert len(tiles) == 9
        assert [t.pixel_offset for t in tiles[:3]] == [(0, 0), (0, 35), (0, 70)]

    def test_tile_count_matches_formula(self, rng):
        for _ in range(500):
            dim = int(rng.integers(1, 400))
            crop = int(rng.integers(1, 400))
            stride = int(rng.integers(1, 100))
            expected = (dim - crop) // stride + 1 if crop <= dim else 0
            assert tiles_per_axis(dim, crop, stride) == expected

    def test_tiles_on_random_maps(self, rng):
        for _ in range(20):
            height, width = (int(v) for v in rng.integers(8, 60, size=2))
            crop = int(rng.integers(1, min(height, width) + 1))
            stride = int(rng.integers(1, 20))
            tiles = tile_map(blank_raster(height, width), crop, stride)
            rows = (height - crop) // stride + 1
            cols = (width - crop) // stride + 1
            assert len(tiles) == rows * cols

    def test_positions_are_tile_centres(self):
        raster = blank_raster(64, 64, meters_per_pixel=0.5, origin=(10.0, 20.0))
        tiles = tile_map(raster, crop_size=32, stride=16)
        tile = tiles[1]
        assert tile.pixel_offset == (0, 16)
        assert tile.position == (10.0 + 0.5 * (16 + 16), 20.0 + 0.5 * 16)

    def test_row_major_ids(self):
        tiles = tile_map(blank_raster(48, 48), crop_size=16, stride=16, first_tile_id=5)
        assert [t.tile_id for t in tiles] == list(range(5, 14))
        assert tiles[3].pixel_offset == (16, 0)

    def test_crops_are_views(self):
        raster = blank_raster(32, 32)
        tiles = tile_map(raster, crop_size=16, stride=16)
        assert np.shares_memory(tiles[0].image, raster.pixels)

    def test_crop_larger_than_map(self):
        with pytest.raises(TilingError):
            tile_map(blank_raster(32, 64), crop_size=48, stride=8)

    def test_invalid_stride(self):
        with pytest.raises(TilingError):
            tile_map(blank_raster(32, 32), crop_size=16, stride=0)


@pytest.mark.unit
class TestPairing:
    def test_pairs_follow_thermal_order(self, world_maps):
        satellite, thermal = world_maps
        sat_tiles = tile_map(satellite, 32, 16)
        thermal_tiles = tile_map(thermal, 32, 16)
        pairs = pair_crops(list(reversed(sat_tiles)), thermal_tiles)
        assert [p.tile_id for p in pairs] == [t.tile_id for t in thermal_tiles]
        assert all(p.satellite.position == p.thermal.position for p in pairs)

    def test_size_mismatch(self, world_maps):
        satellite, _ = world_maps
        thermal = blank_raster(64, 128, meters_per_pixel=2.0, origin=(100.0, 50.0))
        with pytest.raises(PairingMismatchError) as excinfo:
            pair_crops(tile_map(satellite, 32, 16), tile_map(thermal, 32, 16))
        assert excinfo.value.offset is not None

    def test_misregistered_maps(self, world_maps):
        satellite, _ = world_maps
        thermal = blank_raster(96, 128, meters_per_pixel=2.0, origin=(0.0, 0.0))
        with pytest.raises(PairingMismatchError, match="co-registered"):
            pair_crops(tile_map(satellite, 32, 16), tile_map(thermal, 32, 16))

    def test_invalid_fraction_from_mask(self):
        mask = np.ones((32, 32), dtype=bool)
        mask[:8, :16] = False
        thermal = RasterMap(pixels=np.zeros((32, 32)), validity_mask=mask)
        satellite = blank_raster(32, 32, channels=3)
        pairs = pair_crops(tile_map(satellite, 16, 16), tile_map(thermal, 16, 16))
        assert invalid_fraction(pairs[0].thermal) == pytest.approx(0.5)
        assert pairs[0].invalid_fraction == pytest.approx(0.5)
        assert pairs[1].invalid_fraction == 0.0

        assert [p.tile_id for p in filter_invalid(pairs)] == [1, 2, 3]
        assert len(filter_invalid(pairs, 0.5)) == 4

    def test_filter_threshold_range(self, make_pair):
        with pytest.raises(InputError):
            filter_invalid([make_pair(0)], 1.5)


@pytest.mark.unit
class TestSplits:
    def test_half_open_boundaries(self, make_pair):
        spec = parse_split_spec(
            {"train": [[0, 0, 10, 10]], "val": [[10, 0, 20, 10]], "test": []}
        )
        split = split_by_region([make_pair(0, (10.0, 5.0)), make_pair(1, (9.99, 5.0))], spec)
        assert [p.tile_id for p in split.val] == [0]
        assert [p.tile_id for p in split.train] == [1]

    def test_first_split_wins(self, make_pair):
        spec = {"train": [(0.0, 0.0, 10.0, 10.0)], "test": [(0.0, 0.0, 10.0, 10.0)]}
        split = split_by_region([make_pair(0, (5.0, 5.0))], spec)
        assert split.counts == {"train": 1, "val": 0, "test": 0}

    def test_unassigned_pairs(self, make_pair):
        spec = {"train": [(0.0, 0.0, 10.0, 10.0)]}
        with pytest.raises(UnassignedRegionError) as excinfo:
            split_by_region([make_pair(3, (50.0, 5.0)), make_pair(1, (60.0, 5.0))], spec)
        assert excinfo.value.tile_ids == [1, 3]

    @pytest.mark.parametrize(
        "data",
        [
            {"holdout": [[0, 0, 1, 1]]},
            {"train": [[0, 0, 1]]},
            {"train": [[5, 0, 1, 1]]},
        ],
    )
    def test_bad_specs(self, data):
        with pytest.raises(ConfigError):
            parse_split_spec(data)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "splits.json"
        path.write_text(json.dumps({"train": [[0, 0, 5, 5]], "test": [[5, 0, 9, 5]]}))
        assert load_split_spec(path) == {
            "train": [(0.0, 0.0, 5.0, 5.0)],
            "test": [(5.0, 0.0, 9.0, 5.0)],
        }

    def test_load_broken_file(self, tmp_path):
        path = tmp_path / "splits.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_split_spec(path)

    def test_select_in_regions(self, make_tile):
        tiles = [make_tile(i, (float(10 * i), 0.0)) for i in range(5)]
        picked = select_in_regions(tiles, [(0.0, -1.0, 15.0, 1.0), (40.0, -1.0, 50.0, 1.0)])
        assert [t.tile_id for t in picked] == [0, 1, 4]

    def test_strips_follow_fractions(self, make_pair):
        pairs = [make_pair(i, (10.0 * i, 5.0)) for i in range(10)]
        spec = strip_split_spec([p.position for p in pairs], (0.5, 0.3, 0.2))
        split = split_by_region(pairs, spec)
        assert [p.tile_id for p in split.train] == [0, 1, 2, 3, 4]
        assert [p.tile_id for p in split.val] == [5, 6, 7]
        assert [p.tile_id for p in split.test] == [8, 9]

    def test_zero_fraction_strip_is_empty(self, make_pair):
        pairs = [make_pair(i, (10.0 * i, 5.0)) for i in range(4)]
        spec = strip_split_spec([p.position for p in pairs], (0.75, 0.25, 0.0))
        assert spec["test"] == []
        split = split_by_region(pairs, spec)
        assert split.counts == {"train": 3, "val": 1, "test": 0}

    def test_strips_need_tiles(self):
        with pytest.raises(ConfigError):
            strip_split_spec([], (0.7, 0.1, 0.2))


@pytest.mark.unit
class TestRasterIO:
    def test_thermal_round_trip_is_sixteen_bit(self, tmp_path, world_maps):
        _, thermal = world_maps
        path = tmp_path / "thermal.png"
        save_raster(thermal, path)
        loaded = load_raster(path)
        assert loaded.pixels.shape == thermal.pixels.shape
        assert np.abs(loaded.pixels - thermal.pixels).max() <= 0.5 / 65535 + 1e-7
        assert loaded.meters_per_pixel == 2.0
        assert loaded.origin == (100.0, 50.0)

    def test_satellite_round_trip_is_eight_bit(self, tmp_path, world_maps):
        satellite, _ = world_maps
        path = tmp_path / "satellite.png"
        save_raster(satellite, path)
        loaded = load_raster(path)
        assert loaded.channels == 3
        assert np.abs(loaded.pixels - satellite.pixels).max() <= 0.5 / 255 + 1e-6

    def test_mask_round_trip(self, tmp_path):
        mask = np.zeros((16, 24), dtype=bool)
        mask[4:, 6:] = True
        raster = RasterMap(pixels=np.full((16, 24), 0.25), validity_mask=mask)
        path = tmp_path / "masked.png"
        save_raster(raster, path)
        assert (tmp_path / "masked_mask.png").exists()
        assert "mask=masked_mask.png" in manifest_path(path).read_text()
        np.testing.assert_array_equal(load_raster(path).validity_mask, mask)

    def test_missing_manifest_uses_defaults(self, tmp_path):
        path = tmp_path / "bare.png"
        write_image(path, np.full((8, 8), 0.5), sixteen_bit=False)
        raster = load_raster(path)
        assert raster.meters_per_pixel == 1.0
        assert raster.origin == (0.0, 0.0)

    def test_malformed_manifest(self, tmp_path):
        path = tmp_path / "bad.png"
        write_image(path, np.full((8, 8), 0.5), sixteen_bit=False)
        manifest_path(path).write_text("meters_per_pixel=wide\n")
        with pytest.raises(InputError):
            load_raster(path)

    def test_missing_image(self, tmp_path):
        with pytest.raises(InputError):
            read_image(tmp_path / "nothing.png")


@pytest.mark.integration
class TestDataset:
    def test_generated_region_becomes_unpaired(self, world_maps):
        satellite, thermal = world_maps
        dataset = build_dataset(satellite, thermal, 32, 16, SPLITS, GENERATED)
        assert dataset.split.counts == {"train": 12, "val": 5, "test": 10}
        assert len(dataset.unpaired_satellite) == 8
        unpaired = {t.tile_id for t in dataset.unpaired_satellite}
        assert unpaired.isdisjoint(p.tile_id for p in dataset.pairs)
        assert all(t.channels == 3 for t in dataset.unpaired_satellite)

    def test_extra_unpaired_map_ids_follow_main_map(self, world_maps):
        satellite, thermal = world_maps
        extra = blank_raster(32, 64, channels=3)
        dataset = build_dataset(
            satellite, thermal, 32, 16, SPLITS, unpaired_satellite=extra
        )
        assert [t.tile_id for t in dataset.unpaired_satellite] == [35, 36, 37]

    def test_manifest_round_trip(self, tmp_path, world_maps):
        satellite, thermal = world_maps
        sat_path, thermal_path = tmp_path / "sat.png", tmp_path / "thermal.png"
        save_raster(satellite, sat_path)
        save_raster(thermal, thermal_path)
        dataset = build_dataset(
            load_raster(sat_path), load_raster(thermal_path), 32, 16, SPLITS, GENERATED
        )
        manifest = tmp_path / "dataset.json"
        write_dataset_manifest(dataset, manifest, str(sat_path), str(thermal_path))

        data = json.loads(manifest.read_text())
        assert data["counts"] == {"train": 12, "val": 5, "test": 10}

        reloaded = load_dataset(manifest)
        for name in ("train", "val", "test"):
            assert [p.tile_id for p in reloaded.split.get(name)] == [
                p.tile_id for p in dataset.split.get(name)
            ]
        assert len(reloaded.unpaired_satellite) == 8

    def test_empty_split_spec_uses_strips(self, tmp_path, world_maps):
        satellite, thermal = world_maps
        sat_path, thermal_path = tmp_path / "sat.png", tmp_path / "thermal.png"
        save_raster(satellite, sat_path)
        save_raster(thermal, thermal_path)
        dataset = build_dataset(
            load_raster(sat_path),
            load_raster(thermal_path),
            32,
            16,
            {},
            GENERATED,
            split_fractions=(0.6, 0.2, 0.2),
        )
        assert dataset.split.counts == {"train": 12, "val": 5, "test": 10}

        manifest = tmp_path / "dataset.json"
        write_dataset_manifest(
            dataset, manifest, str(sat_path), str(thermal_path), fingerprint="abc"
        )
        reloaded = load_dataset(manifest)
        assert reloaded.split.counts == dataset.split.counts
        assert reloaded.fingerprint == "abc"

    def test_changed_maps_are_detected(self, tmp_path, world_maps):
        satellite, thermal = world_maps
        sat_path, thermal_path = tmp_path / "sat.png", tmp_path / "thermal.png"
        save_raster(satellite, sat_path)
        save_raster(thermal, thermal_path)
        dataset = build_dataset(satellite, thermal, 32, 16, SPLITS, GENERATED)
        manifest = tmp_path / "dataset.json"
        write_dataset_manifest(dataset, manifest, str(sat_path), str(thermal_path))

        smaller = WorldSpec(
            seed=7, size_px=(64, 128), meters_per_pixel=2.0, origin=(100.0, 50.0)
        )
        new_sat, new_thermal = generate_world(smaller)
        save_raster(new_sat, sat_path)
        save_raster(new_thermal, thermal_path)
        with pytest.raises(ConfigError, match="Maps changed"):
            load_dataset(manifest)

    def test_manifest_version(self, tmp_path):
        manifest = tmp_path / "dataset.json"
        manifest.write_text(json.dumps({"version": 99}))
        with pytest.raises(ConfigError, match="version"):
            load_dataset(manifest)

    def test_missing_manifest(self, tmp_path):
        with pytest.raises(ConfigError, match="tile stage"):
            load_dataset(tmp_path / "dataset.json")
