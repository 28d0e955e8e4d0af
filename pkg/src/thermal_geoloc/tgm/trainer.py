"""
Adversarial training loop of the thermal generative module
"""

import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F
from torch.optim import Adam, Optimizer, lr_scheduler

from ..enhance import contrast_enhance
from ..exceptions import EmptyDatasetError, InputError, TrainingDivergedError
from ..models.config import TgmConfig
from ..models.tile import PairedCrop
from ..utils.checkpoint import data_fingerprint, save_checkpoint
from .losses import l1_loss, lsgan_d_loss, lsgan_g_loss
from .networks import NLayerDiscriminator, UnetGenerator, build_networks

CHECKPOINT_NAME = "tgm.pt"
CHECKPOINT_KIND = "tgm"


@dataclass
class TgmTrainResult:
    """Trained networks plus the per-step loss curve"""

    generator: UnetGenerator
    discriminator: NLayerDiscriminator
    history: List[Dict[str, float]] = field(default_factory=list)
    checkpoint_path: Optional[Path] = None

    @property
    def steps(self) -> int:
        return len(self.history)


def to_unit_range(images: np.ndarray) -> torch.Tensor:
    """NHWC arrays in [0, 1] -> NCHW float tensor in [-1, 1]"""
    tensor = torch.from_numpy(np.ascontiguousarray(images, dtype=np.float32))
    if tensor.ndim == 3:
        tensor = tensor.unsqueeze(-1)
    return tensor.permute(0, 3, 1, 2) * 2.0 - 1.0


def from_unit_range(tensor: torch.Tensor) -> np.ndarray:
    """NCHW tensor in [-1, 1] -> NHWC float32 array in [0, 1]"""
    images = ((tensor.detach().cpu() + 1.0) / 2.0).clamp(0.0, 1.0)
    return images.permute(0, 2, 3, 1).numpy().astype(np.float32)


def resize(batch: torch.Tensor, resolution: int) -> torch.Tensor:
    """Bilinear resize to resolution x resolution; identity when already there"""
    if batch.shape[-1] == resolution and batch.shape[-2] == resolution:
        return batch
    return F.interpolate(
        batch, size=(resolution, resolution), mode="bilinear", align_corners=False
    )


def linear_decay(epochs: int, decay_start_epoch: int):  # type: ignore[no-untyped-def]
    """Learning-rate factor: 1 before decay_start_epoch, 0 in the last epoch"""
    span = max(1, epochs - decay_start_epoch)

    def rule(epoch: int) -> float:
        return max(0.0, 1.0 - max(0, epoch - decay_start_epoch + 1) / span)

    return rule


def get_scheduler(optimizer: Optimizer, config: TgmConfig) -> lr_scheduler.LambdaLR:
    return lr_scheduler.LambdaLR(
        optimizer, lr_lambda=linear_decay(config.epochs, config.decay_start_epoch)
    )


def _stack_pairs(
    pairs: Sequence[PairedCrop], config: TgmConfig, ce_factor: float
) -> Tuple[torch.Tensor, torch.Tensor]:
    for pair in pairs:
        if pair.satellite.crop_size != config.output_resolution:
            raise InputError(
                f"Pair {pair.tile_id} is {pair.satellite.crop_size} px, expected"
                f" {config.output_resolution}"
            )
    satellite = to_unit_range(np.stack([p.satellite.image for p in pairs]))
    thermal_images = [p.thermal.image for p in pairs]
    if config.use_ce_inputs:
        thermal_images = [contrast_enhance(img, ce_factor) for img in thermal_images]
    thermal = to_unit_range(np.stack(thermal_images))
    return satellite, thermal


def _checked(step: int, name: str, loss: torch.Tensor) -> torch.Tensor:
    value = float(loss.detach())
    if not np.isfinite(value):
        raise TrainingDivergedError(step, name, value)
    return loss


def train_tgm(
    config: TgmConfig,
    pairs: Sequence[PairedCrop],
    checkpoint_dir: Optional[Union[str, Path]] = None,
    ce_factor: float = 3.0,
    metadata: Optional[Dict[str, Any]] = None,
) -> TgmTrainResult:
    """Alternate discriminator and generator updates over the paired crops

    D minimizes lsgan_d_loss; G minimizes lsgan_g_loss + lambda1 * l1_loss. Crops are
    bilinearly upsampled to train_resolution before entering the networks.
    """
    config.validate()
    if not pairs:
        raise EmptyDatasetError("No pairs to train the thermal generative module on")

    torch.manual_seed(config.seed)
    shuffle = torch.Generator().manual_seed(config.seed)
    device = torch.device(config.device)

    satellite_all, thermal_all = _stack_pairs(pairs, config, ce_factor)
    generator, discriminator = build_networks(config)
    generator.to(device).train()
    discriminator.to(device).train()

    betas = (config.beta1, 0.999)
    optimizer_g = Adam(generator.parameters(), lr=config.learning_rate, betas=betas)
    optimizer_d = Adam(discriminator.parameters(), lr=config.learning_rate, betas=betas)
    schedulers = [get_scheduler(optimizer_g, config), get_scheduler(optimizer_d, config)]

    fingerprint = data_fingerprint((p.tile_id for p in pairs), extra=CHECKPOINT_KIND)
    checkpoint_path = Path(checkpoint_dir) / CHECKPOINT_NAME if checkpoint_dir else None
    result = TgmTrainResult(generator, discriminator, checkpoint_path=checkpoint_path)

    logging.info(
        f"Training TGM on {len(pairs)} pairs: {config.epochs} epochs, batch"
        f" {config.batch_size}, lambda1={config.lambda1:g},"
        f" resolution {config.output_resolution}->{config.train_resolution}"
    )

    step = 0
    for epoch in range(config.epochs):
        order = torch.randperm(len(pairs), generator=shuffle)
        for start in range(0, len(pairs), config.batch_size):
            idx = order[start : start + config.batch_size]
            satellite = resize(satellite_all[idx], config.train_resolution).to(device)
            thermal = resize(thermal_all[idx], config.train_resolution).to(device)

            generated = generator(satellite)

            optimizer_d.zero_grad()
            try:
                loss_d = lsgan_d_loss(
                    discriminator(thermal, satellite),
                    discriminator(generated.detach(), satellite),
                    config.label_fake,
                    config.label_real,
                )
            except InputError:
                raise TrainingDivergedError(step, "discriminator scores", float("nan"))
            _checked(step, "discriminator loss", loss_d).backward()
            optimizer_d.step()

            optimizer_g.zero_grad()
            try:
                loss_adv = lsgan_g_loss(
                    discriminator(generated, satellite), config.label_target
                )
            except InputError:
                raise TrainingDivergedError(step, "generator scores", float("nan"))
            loss_l1 = l1_loss(generated, thermal)
            loss_g = _checked(step, "generator loss", loss_adv + config.lambda1 * loss_l1)
            loss_g.backward()
            optimizer_g.step()

            result.history.append(
                {
                    "step": float(step),
                    "epoch": float(epoch),
                    "loss_d": float(loss_d.detach()),
                    "loss_g": float(loss_g.detach()),
                    "loss_adv": float(loss_adv.detach()),
                    "l1": float(loss_l1.detach()),
                }
            )
            step += 1
            if config.max_steps is not None and step >= config.max_steps:
                break

        for scheduler in schedulers:
            scheduler.step()
        last = result.history[-1]
        logging.info(
            f"TGM epoch {epoch + 1}/{config.epochs}: D {last['loss_d']:.4f}"
            f" G {last['loss_g']:.4f} L1 {last['l1']:.4f}"
            f" lr {schedulers[0].get_last_lr()[0]:.2e}"
        )

        if checkpoint_path is not None:
            save_checkpoint(
                checkpoint_path,
                {
                    "kind": CHECKPOINT_KIND,
                    "epoch": epoch + 1,
                    "config": asdict(config),
                    "generator": generator.state_dict(),
                    "discriminator": discriminator.state_dict(),
                    "data_fingerprint": fingerprint,
                    "history": result.history,
                    **(metadata or {}),
                },
            )
            logging.debug(f"Checkpoint written to {checkpoint_path}")

        if config.max_steps is not None and step >= config.max_steps:
            logging.info(f"Reached max_steps={config.max_steps}, stopping")
            break

    return result
