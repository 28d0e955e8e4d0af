"""
Tests for the thermal generative module: objectives, networks, training, generation
"""

import numpy as np
import pytest
import torch
from torch.autograd import gradcheck

from thermal_geoloc.exceptions import (
    CheckpointError,
    ConfigError,
    EmptyDatasetError,
    InputError,
)
from thermal_geoloc.geodata import pair_crops, tile_map
from thermal_geoloc.models import TgmConfig, TileSource, WorldSpec
from thermal_geoloc.synthmap import generate_world
from thermal_geoloc.tgm import (
    CHECKPOINT_NAME,
    NLayerDiscriminator,
    UnetGenerator,
    build_networks,
    generate_dataset,
    generated_fingerprint,
    l1_loss,
    load_generated_dataset,
    load_generator,
    lsgan_d_loss,
    lsgan_g_loss,
    save_generated_dataset,
    save_image_grid,
    tgm_generator_objective,
    tgm_total_loss,
    train_tgm,
)
from thermal_geoloc.tgm.trainer import linear_decay

GRADCHECK = {"eps": 1e-3, "atol": 1e-6, "rtol": 1e-4}


def away_from_kink(shape, generator: torch.Generator):
    """generated/target pairs whose differences stay clear of the L1 kink"""
    generated = torch.randn(shape, generator=generator, dtype=torch.double)
    sign = torch.randint(0, 2, shape, generator=generator).double() * 2 - 1
    gap = 0.05 + torch.rand(shape, generator=generator, dtype=torch.double)
    return generated.requires_grad_(), (generated + sign * gap).detach()


@pytest.mark.unit
class TestObjectives:
    def test_discriminator_loss_value(self):
        real = torch.tensor([1.0, 0.0])
        fake = torch.tensor([0.0, 1.0])
        assert lsgan_d_loss(real, fake).item() == pytest.approx(0.5 * 0.5 + 0.5 * 0.5)

    def test_perfect_discriminator(self):
        assert lsgan_d_loss(torch.ones(4), torch.zeros(4)).item() == 0.0

    @pytest.mark.parametrize(
        "a, b, expected",
        [(0.0, 1.0, [0.75, 1 / 3, 0.0]), (-1.0, 1.0, [0.5, -1 / 3, -1.0])],
    )
    def test_discriminator_reaches_optimum(self, a, b, expected):
        # three-point sample space: real mass (3/4, 1/4, 0), fake mass (1/4, 1/2, 1/4)
        scores = torch.zeros(3, dtype=torch.double, requires_grad=True)
        real = torch.tensor([0, 0, 0, 1])
        fake = torch.tensor([0, 1, 1, 2])
        optimizer = torch.optim.SGD([scores], lr=1.0)
        for _ in range(300):
            optimizer.zero_grad()
            lsgan_d_loss(scores[real], scores[fake], a=a, b=b).backward()
            optimizer.step()
        # D*(x) = (b p_data + a p_g) / (p_data + p_g)
        assert scores.detach().tolist() == pytest.approx(expected, abs=1e-6)

    def test_generator_loss_has_no_half(self):
        assert lsgan_g_loss(torch.zeros(3)).item() == pytest.approx(1.0)
        assert lsgan_g_loss(torch.full((3,), 2.0), c=1.0).item() == pytest.approx(1.0)

    def test_score_grids_may_differ(self):
        loss = lsgan_d_loss(torch.ones(2, 1, 6, 6), torch.zeros(2, 1, 5, 5))
        assert loss.item() == 0.0

    def test_non_finite_scores(self):
        with pytest.raises(InputError):
            lsgan_g_loss(torch.tensor([1.0, float("nan")]))

    def test_l1_shape_mismatch(self):
        with pytest.raises(InputError):
            l1_loss(torch.zeros(1, 1, 4, 4), torch.zeros(1, 1, 4, 5))

    def test_objective_decomposition(self):
        scores = torch.tensor([0.5, 0.25])
        generated = torch.zeros(1, 1, 2, 2)
        target = torch.full((1, 1, 2, 2), 0.1)
        objective = tgm_generator_objective(scores, generated, target, lambda1=10.0)
        expected = lsgan_g_loss(scores) + 10.0 * l1_loss(generated, target)
        assert objective.item() == pytest.approx(expected.item(), abs=1e-7)

    def test_zero_lambda_is_pure_adversarial(self):
        scores = torch.tensor([0.5])
        objective = tgm_generator_objective(
            scores, torch.zeros(1, 1, 2, 2), torch.ones(1, 1, 2, 2), lambda1=0.0
        )
        assert objective.item() == pytest.approx(0.25)

    def test_negative_lambda(self):
        with pytest.raises(InputError):
            tgm_generator_objective(torch.zeros(1), torch.zeros(1), torch.zeros(1), lambda1=-1)

    def test_total_loss(self):
        real, fake = torch.tensor([0.8]), torch.tensor([0.3])
        generated, target = torch.zeros(1, 1, 2, 2), torch.full((1, 1, 2, 2), 0.5)
        total = tgm_total_loss(real, fake, generated, target, lambda1=2.0)
        expected = 0.5 * 0.04 + 0.5 * 0.09 + 0.49 + 2.0 * 0.5
        assert total.item() == pytest.approx(expected, rel=1e-6)


@pytest.mark.unit
class TestObjectiveGradients:
    def test_discriminator_loss(self):
        g = torch.Generator().manual_seed(0)
        real = torch.randn(2, 1, 3, 3, generator=g, dtype=torch.double, requires_grad=True)
        fake = torch.randn(2, 1, 3, 3, generator=g, dtype=torch.double, requires_grad=True)
        assert gradcheck(lambda r, f: lsgan_d_loss(r, f), (real, fake), **GRADCHECK)

    def test_generator_loss(self):
        g = torch.Generator().manual_seed(1)
        fake = torch.randn(2, 1, 3, 3, generator=g, dtype=torch.double, requires_grad=True)
        assert gradcheck(lambda f: lsgan_g_loss(f, c=0.9), (fake,), **GRADCHECK)

    def test_generator_objective(self):
        g = torch.Generator().manual_seed(2)
        scores = torch.randn(2, 1, 3, 3, generator=g, dtype=torch.double, requires_grad=True)
        generated, target = away_from_kink((2, 1, 4, 4), g)
        assert gradcheck(
            lambda s, x: tgm_generator_objective(s, x, target, lambda1=100.0),
            (scores, generated),
            **GRADCHECK,
        )

    def test_total_through_tiny_discriminator(self):
        g = torch.Generator().manual_seed(3)
        weight = torch.randn(1, 4, 3, 3, generator=g, dtype=torch.double) * 0.1
        satellite = torch.randn(1, 3, 4, 4, generator=g, dtype=torch.double)
        real = torch.randn(1, 1, 4, 4, generator=g, dtype=torch.double)
        sign = torch.randint(0, 2, (1, 1, 4, 4), generator=g).double() * 2 - 1
        fake = (real + 0.3 * sign).requires_grad_()

        def score(weight, thermal):
            return torch.nn.functional.conv2d(torch.cat([thermal, satellite], 1), weight)

        def total(weight, fake):
            return tgm_total_loss(
                score(weight, real), score(weight, fake), fake, real, lambda1=100.0
            )

        assert gradcheck(total, (weight.requires_grad_(), fake), **GRADCHECK)


@pytest.mark.unit
class TestNetworks:
    def test_generator_shapes(self):
        generator = UnetGenerator(depth=3, base_width=4)
        out = generator(torch.zeros(2, 3, 32, 32))
        assert out.shape == (2, 1, 32, 32)
        assert out.abs().max() <= 1.0

    def test_discriminator_is_patch_grid(self):
        discriminator = NLayerDiscriminator(base_width=4, num_layers=2)
        scores = discriminator(torch.zeros(2, 1, 32, 32), torch.zeros(2, 3, 32, 32))
        assert scores.shape[:2] == (2, 1)
        assert scores.shape[-1] > 1

    def test_shallow_generator_rejected(self):
        with pytest.raises(ConfigError):
            UnetGenerator(depth=1)

    def test_unknown_norm(self):
        with pytest.raises(ConfigError):
            NLayerDiscriminator(norm="group")

    def test_build_from_config(self, tiny_tgm_config):
        generator, discriminator = build_networks(tiny_tgm_config)
        assert generator.depth == tiny_tgm_config.depth
        assert isinstance(discriminator, NLayerDiscriminator)

    def test_learning_rate_decay(self):
        rule = linear_decay(epochs=4, decay_start_epoch=2)
        assert [rule(e) for e in range(4)] == pytest.approx([1.0, 1.0, 0.5, 0.0])

    @pytest.mark.parametrize("epochs, start", [(200, 100), (5, 0), (3, 2), (1, 0)])
    def test_learning_rate_reaches_zero(self, epochs, start):
        rule = linear_decay(epochs=epochs, decay_start_epoch=start)
        factors = [rule(e) for e in range(epochs)]
        assert factors[:start] == [1.0] * start
        assert factors[-1] == 0.0
        assert all(a >= b for a, b in zip(factors, factors[1:]))


def world_pairs(size: int, count: int):
    spec = WorldSpec(
        seed=11,
        size_px=(128, 128),
        terrain_mix={"desert": 0.25, "farm": 0.25, "road": 0.25, "building": 0.25},
        thermal_noise_std=0.0,
    )
    satellite, thermal = generate_world(spec)
    pairs = pair_crops(tile_map(satellite, size, 16), tile_map(thermal, size, 16))
    return pairs[:count]


@pytest.mark.integration
class TestTraining:
    def test_history_and_checkpoint(self, tmp_path, tiny_tgm_config):
        pairs = world_pairs(32, 4)
        result = train_tgm(tiny_tgm_config, pairs, checkpoint_dir=tmp_path)
        assert result.steps == 4
        expected = {"step", "epoch", "loss_d", "loss_g", "loss_adv", "l1"}
        assert set(result.history[0]) == expected
        assert result.checkpoint_path == tmp_path / CHECKPOINT_NAME

        generator, config = load_generator(result.checkpoint_path)
        assert config == tiny_tgm_config
        assert not generator.training

    def test_max_steps(self, tiny_tgm_config):
        tiny_tgm_config.max_steps = 3
        assert train_tgm(tiny_tgm_config, world_pairs(32, 4)).steps == 3

    def test_same_seed_same_losses(self, tiny_tgm_config):
        pairs = world_pairs(32, 4)
        first = train_tgm(tiny_tgm_config, pairs).history
        second = train_tgm(tiny_tgm_config, pairs).history
        assert [h["loss_g"] for h in first] == [h["loss_g"] for h in second]

    def test_empty_pairs(self, tiny_tgm_config):
        with pytest.raises(EmptyDatasetError):
            train_tgm(tiny_tgm_config, [])

    def test_wrong_crop_size(self, tiny_tgm_config):
        with pytest.raises(InputError):
            train_tgm(tiny_tgm_config, world_pairs(64, 2))

    def test_invalid_config(self, tiny_tgm_config):
        tiny_tgm_config.lambda1 = 0.0
        with pytest.raises(ConfigError):
            train_tgm(tiny_tgm_config, world_pairs(32, 2))

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_generator(tmp_path / CHECKPOINT_NAME)

    @pytest.mark.slow
    def test_l1_falls_on_sixteen_crops(self):
        config = TgmConfig(
            lambda1=100.0,
            epochs=250,
            decay_start_epoch=250,
            batch_size=8,
            train_resolution=64,
            output_resolution=64,
            depth=4,
            base_width=16,
            disc_width=16,
            disc_layers=3,
            max_steps=500,
        )
        result = train_tgm(config, world_pairs(64, 16))
        assert result.steps == 500
        l1 = [h["l1"] for h in result.history]
        assert np.mean(l1[-50:]) <= 0.2 * l1[0]


@pytest.mark.integration
class TestGeneration:
    @pytest.fixture
    def generator(self, tiny_tgm_config):
        generator, _ = build_networks(tiny_tgm_config)
        return generator

    def test_one_generated_pair_per_tile(self, generator):
        tiles = [p.satellite for p in world_pairs(32, 5)]
        generator.train()
        pairs = generate_dataset(generator, tiles, output_resolution=32, batch_size=2)
        assert generator.training
        assert [p.tile_id for p in pairs] == [t.tile_id for t in tiles]
        assert all(p.source is TileSource.GENERATED for p in pairs)
        assert all(p.thermal.position == p.satellite.position for p in pairs)
        assert pairs[0].thermal.image.shape == (32, 32, 1)

    def test_upsampled_generation(self, generator):
        tiles = [p.satellite for p in world_pairs(32, 2)]
        pairs = generate_dataset(generator, tiles, output_resolution=32, train_resolution=64)
        assert pairs[0].thermal.image.shape == (32, 32, 1)

    def test_rejects_thermal_tiles(self, generator):
        tiles = [p.thermal for p in world_pairs(32, 1)]
        with pytest.raises(InputError):
            generate_dataset(generator, tiles, output_resolution=32)

    def test_nothing_to_generate(self, generator):
        assert generate_dataset(generator, [], output_resolution=32) == []

    def test_save_and_reload(self, tmp_path, generator):
        tiles = [p.satellite for p in world_pairs(32, 3)]
        pairs = generate_dataset(generator.eval(), tiles, output_resolution=32)
        path = tmp_path / "generated.npz"
        save_generated_dataset(pairs, path, fingerprint="abc")
        reloaded = load_generated_dataset(path, tiles)
        assert [p.tile_id for p in reloaded] == [p.tile_id for p in pairs]
        for before, after in zip(pairs, reloaded):
            assert np.abs(before.thermal.image - after.thermal.image).max() <= 1e-4

    def test_generation_is_deterministic(self, tmp_path, tiny_tgm_config):
        tiles = [p.satellite for p in world_pairs(32, 4)]
        runs = []
        for name in ("first", "second"):
            torch.manual_seed(0)
            generator, _ = build_networks(tiny_tgm_config)
            pairs = generate_dataset(generator, tiles, output_resolution=32, batch_size=3)
            path = tmp_path / f"{name}.npz"
            save_generated_dataset(pairs, path, fingerprint="abc")
            runs.append((pairs, path))

        (first, first_path), (second, second_path) = runs
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.thermal.image, b.thermal.image)
        with np.load(first_path) as a, np.load(second_path) as b:
            assert sorted(a.files) == sorted(b.files)
            for key in a.files:
                np.testing.assert_array_equal(a[key], b[key])
        assert generated_fingerprint(second_path) == "abc"
        assert generated_fingerprint(tmp_path / "missing.npz") == ""

    def test_reload_needs_satellite_tiles(self, tmp_path, generator):
        tiles = [p.satellite for p in world_pairs(32, 2)]
        path = tmp_path / "generated.npz"
        save_generated_dataset(generate_dataset(generator, tiles, 32), path)
        with pytest.raises(CheckpointError):
            load_generated_dataset(path, tiles[:1])

    def test_image_grid(self, tmp_path):
        sat = [np.zeros((8, 8, 3))] * 2
        thermal = [np.ones((8, 8, 1))] * 2
        path = tmp_path / "grid" / "samples.png"
        save_image_grid(sat, thermal, thermal, path)
        assert path.exists()
        with pytest.raises(InputError):
            save_image_grid(sat, thermal[:1], thermal, path)
