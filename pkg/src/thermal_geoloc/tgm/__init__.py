"""
Thermal generative module: satellite-to-thermal translation
"""

from .generate import (
    generate_dataset,
    generated_fingerprint,
    load_generated_dataset,
    load_generator,
    save_generated_dataset,
    save_image_grid,
)
from .losses import (
    l1_loss,
    lsgan_d_loss,
    lsgan_g_loss,
    tgm_generator_objective,
    tgm_total_loss,
)
from .networks import NLayerDiscriminator, UnetGenerator, build_networks
from .trainer import CHECKPOINT_NAME, TgmTrainResult, train_tgm

__all__ = [
    "CHECKPOINT_NAME",
    "NLayerDiscriminator",
    "TgmTrainResult",
    "UnetGenerator",
    "build_networks",
    "generate_dataset",
    "generated_fingerprint",
    "l1_loss",
    "load_generated_dataset",
    "load_generator",
    "lsgan_d_loss",
    "lsgan_g_loss",
    "save_generated_dataset",
    "save_image_grid",
    "tgm_generator_objective",
    "tgm_total_loss",
    "train_tgm",
]
