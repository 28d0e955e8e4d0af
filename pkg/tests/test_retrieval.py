"""
Tests for exact descriptor search, index construction and the index file format
"""

import math
import struct

import numpy as np
import pytest

from thermal_geoloc.evalkit import l2_error_prior, recall_at_n, recall_prior, search_all
from thermal_geoloc.exceptions import (
    ChecksumError,
    EmptyDatasetError,
    IndexFormatError,
    InputError,
    TruncatedIndexError,
    UnsupportedVersionError,
)
from thermal_geoloc.models import DescriptorIndex
from thermal_geoloc.models.descriptor import QuerySet
from thermal_geoloc.retrieval import (
    build_index,
    decode_index,
    descriptor_distances,
    encode_index,
    knn,
    knn_batch,
    knn_within,
    load_index,
    save_index,
)
from thermal_geoloc.retrieval.storage import HEADER
from thermal_geoloc.sgm import model_fingerprint

PRIOR = 512.0
SUCCESS = 50.0


def unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    return (rows / np.linalg.norm(rows, axis=1, keepdims=True)).astype(np.float32)


def random_index(rng: np.random.Generator, n: int, dim: int) -> DescriptorIndex:
    descriptors = unit_rows(rng, n, dim)
    # repeated rows force exact distance ties
    if n > 2:
        descriptors[rng.integers(0, n, n // 10)] = descriptors[1]
    return DescriptorIndex(
        descriptors=descriptors,
        positions=rng.uniform(0.0, 3000.0, (n, 2)),
        tile_ids=rng.permutation(4 * n)[:n],
        model_fingerprint="f" * 64,
    )


def oracle_topk(index, query, k, center=None, radius=None):
    """Brute force: (distance, tile_id, row) ordered by distance, then tile_id"""
    diffs = index.descriptors.astype(np.float64) - np.asarray(query, np.float64)
    distances = np.sqrt(np.einsum("ij,ij->i", diffs, diffs))
    candidates = range(index.size)
    if center is not None:
        geo = np.hypot(index.positions[:, 0] - center[0], index.positions[:, 1] - center[1])
        candidates = [i for i in candidates if geo[i] <= radius]
    rows = [(float(distances[i]), int(index.tile_ids[i]), i) for i in candidates]
    rows.sort(key=lambda r: (r[0], r[1]))
    return rows[:k]


def oracle_recall(index, queries, truths, n, prior=None):
    hits = 0
    for query, truth in zip(queries, truths):
        top = oracle_topk(index, query, n, truth if prior else None, prior)
        if any(
            math.hypot(*(index.positions[i] - np.asarray(truth))) <= SUCCESS
            for _, _, i in top
        ):
            hits += 1
    return 100.0 * hits / len(truths)


@pytest.mark.unit
class TestSearchOracle:
    def test_matches_brute_force(self):
        rng = np.random.default_rng(2024)
        for instance in range(100):
            dim = (8, 64, 4096)[instance % 3]
            n = int(rng.integers(1, 501 if dim < 4096 else 120))
            m = int(rng.integers(1, 101 if dim < 4096 else 20))
            index = random_index(rng, n, dim)
            # half the queries sit next to a database row, the rest are random
            picks = rng.integers(0, n, m)
            queries = unit_rows(rng, m, dim)
            near = rng.random(m) < 0.5
            queries[near] = index.descriptors[picks[near]]
            truths = [
                tuple(index.positions[p] + rng.normal(0.0, 30.0, 2)) for p in picks
            ]

            for query, truth in zip(queries[:5], truths[:5]):
                result = knn(index, query, 5)
                expected = oracle_topk(index, query, 5)
                assert result.tile_ids.tolist() == [t for _, t, _ in expected]
                np.testing.assert_allclose(
                    result.distances, [d for d, _, _ in expected], rtol=1e-9, atol=1e-12
                )
                prior = knn_within(index, query, 5, truth, PRIOR)
                expected = oracle_topk(index, query, 5, truth, PRIOR)
                assert prior.tile_ids.tolist() == [t for _, t, _ in expected]
                assert prior.failed == (not expected)

            query_set = QuerySet(descriptors=queries, positions=np.array(truths))
            for k in (1, 5):
                free = recall_at_n(search_all(index, query_set, k), truths, k)
                assert free == oracle_recall(index, queries, truths, k)
                assert recall_prior(index, query_set, k, PRIOR) == oracle_recall(
                    index, queries, truths, k, PRIOR
                )

            mean, errors = l2_error_prior(index, query_set, PRIOR)
            expected_errors = []
            for query, truth in zip(queries, truths):
                top = oracle_topk(index, query, 1, truth, PRIOR)
                if top:
                    expected_errors.append(
                        math.hypot(*(index.positions[top[0][2]] - np.asarray(truth)))
                    )
            np.testing.assert_allclose(errors, expected_errors, rtol=1e-9)
            if expected_errors:
                assert mean == pytest.approx(np.mean(expected_errors), rel=1e-9)
            else:
                assert math.isnan(mean)


@pytest.mark.unit
class TestSearch:
    @pytest.fixture
    def line_index(self):
        """Five tiles 100 m apart; descriptors rotate around the unit circle"""
        angles = np.linspace(0.0, 1.0, 5)
        return DescriptorIndex(
            descriptors=np.stack([np.cos(angles), np.sin(angles)], axis=1),
            positions=[(100.0 * i, 0.0) for i in range(5)],
            tile_ids=[10, 11, 12, 13, 14],
        )

    def test_nearest_first(self, line_index):
        result = knn(line_index, np.array([np.cos(0.45), np.sin(0.45)]), 3)
        assert result.tile_ids.tolist() == [12, 11, 13]
        assert np.all(np.diff(result.distances) >= 0)

    def test_k_larger_than_index(self, line_index, caplog):
        assert len(knn(line_index, np.array([1.0, 0.0]), 50)) == 5
        assert "exceeds index size" in caplog.text

    def test_batch_matches_single_queries(self, line_index, caplog):
        angles = np.array([0.1, 0.45, 0.9])
        queries = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        results = knn_batch(line_index, queries, 50)
        for query, result in zip(queries, results):
            assert result.tile_ids.tolist() == knn(line_index, query, 5).tile_ids.tolist()
        caplog.clear()
        knn_batch(line_index, queries, 50)
        assert caplog.text.count("exceeds index size") == 1

    def test_invalid_k(self, line_index):
        with pytest.raises(InputError):
            knn(line_index, np.array([1.0, 0.0]), 0)

    def test_empty_index(self):
        empty = DescriptorIndex(np.zeros((0, 2)), np.zeros((0, 2)), np.zeros(0))
        with pytest.raises(EmptyDatasetError):
            knn(empty, np.array([1.0, 0.0]), 1)

    def test_query_dimension(self, line_index):
        with pytest.raises(InputError):
            descriptor_distances(line_index.descriptors, np.ones(3))

    def test_prior_radius_is_inclusive(self, line_index):
        result = knn_within(line_index, np.array([1.0, 0.0]), 5, (100.0, 0.0), 100.0)
        assert sorted(result.tile_ids.tolist()) == [10, 11, 12]

    def test_prior_without_candidates(self, line_index):
        result = knn_within(line_index, np.array([1.0, 0.0]), 5, (0.0, 5000.0), 100.0)
        assert result.failed
        assert len(result) == 0

    @pytest.mark.parametrize("radius", [0.0, -5.0])
    def test_prior_radius_positive(self, line_index, radius):
        with pytest.raises(InputError):
            knn_within(line_index, np.array([1.0, 0.0]), 1, (0.0, 0.0), radius)

    def test_index_rejects_non_unit_rows(self):
        with pytest.raises(InputError):
            DescriptorIndex(np.ones((2, 2)), np.zeros((2, 2)), [0, 1])


@pytest.mark.unit
class TestBuildIndex:
    def test_rows_follow_tile_id(self, tiny_sgm, make_tile):
        tiles = [make_tile(i, (float(i), 0.0), size=32, channels=3, seed=i) for i in (4, 1, 3)]
        index = build_index(tiny_sgm, tiles, batch_size=2)
        assert index.tile_ids.tolist() == [1, 3, 4]
        assert index.positions[:, 0].tolist() == [1.0, 3.0, 4.0]
        assert index.model_fingerprint == model_fingerprint(tiny_sgm)

    def test_empty_database(self, tiny_sgm):
        with pytest.raises(EmptyDatasetError):
            build_index(tiny_sgm, [])

    def test_degenerate_descriptor_aborts(self, mocker, tiny_sgm, make_tile):
        vectors = np.zeros((2, tiny_sgm.c_final), dtype=np.float32)
        vectors[0, 0] = 1.0
        mocker.patch(
            "thermal_geoloc.retrieval.search.embed_images",
            return_value=(vectors, np.array([False, True])),
        )
        with pytest.raises(InputError, match="Tile 1 produced a degenerate"):
            build_index(tiny_sgm, [make_tile(0), make_tile(1)])


@pytest.mark.unit
class TestIndexFile:
    @pytest.fixture
    def index(self):
        return random_index(np.random.default_rng(5), 20, 16)

    def test_round_trip_is_bit_exact(self, tmp_path, index):
        path = tmp_path / "database.stgl"
        save_index(index, path)
        loaded = load_index(path)
        assert loaded.descriptors.tobytes() == index.descriptors.tobytes()
        assert loaded.positions.tobytes() == index.positions.tobytes()
        np.testing.assert_array_equal(loaded.tile_ids, index.tile_ids)
        assert loaded.model_fingerprint == index.model_fingerprint
        assert encode_index(loaded) == path.read_bytes()

    def test_corrupted_payload(self, index):
        data = bytearray(encode_index(index))
        data[HEADER.size + 3] ^= 0x40
        with pytest.raises(ChecksumError):
            decode_index(bytes(data))

    def test_bad_magic(self, index):
        data = b"XXXX" + encode_index(index)[4:]
        with pytest.raises(IndexFormatError, match="magic"):
            decode_index(data)

    def test_unknown_version(self, index):
        data = bytearray(encode_index(index))
        struct.pack_into("<I", data, 4, 2)
        with pytest.raises(UnsupportedVersionError):
            decode_index(bytes(data))

    def test_truncated(self, index):
        data = encode_index(index)
        with pytest.raises(TruncatedIndexError):
            decode_index(data[:-10])
        with pytest.raises(TruncatedIndexError):
            decode_index(data[:8])

    def test_trailing_bytes(self, index):
        with pytest.raises(IndexFormatError, match="trailing"):
            decode_index(encode_index(index) + b"\0")

    def test_fingerprint_too_long(self):
        index = DescriptorIndex(
            np.eye(2), np.zeros((2, 2)), [0, 1], model_fingerprint="a" * 65
        )
        with pytest.raises(IndexFormatError):
            encode_index(index)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IndexFormatError, match="build-index"):
            load_index(tmp_path / "database.stgl")
