"""
U-Net generator and patch discriminator for satellite-to-thermal translation
"""

import functools
from typing import Callable, Optional, Tuple

import torch
from torch import nn

from ..exceptions import ConfigError
from ..models.config import TgmConfig

SATELLITE_CHANNELS = 3
THERMAL_CHANNELS = 1


def get_norm_layer(norm: str = "batch") -> Callable[[int], nn.Module]:
    """Normalization layer factory: batch | instance | none"""
    if norm == "batch":
        return functools.partial(nn.BatchNorm2d, affine=True, track_running_stats=True)
    if norm == "instance":
        return functools.partial(nn.InstanceNorm2d, affine=False, track_running_stats=False)
    if norm == "none":
        return lambda channels: nn.Identity()
    raise ConfigError(f"Unknown normalization layer '{norm}'")


def _uses_bias(norm_layer: Callable[[int], nn.Module]) -> bool:
    # BatchNorm carries its own affine shift
    if isinstance(norm_layer, functools.partial):
        return norm_layer.func is nn.InstanceNorm2d
    return True


class UnetSkipConnectionBlock(nn.Module):
    """One U-Net level: downsample, inner submodule, upsample, concatenated skip"""

    def __init__(
        self,
        outer_channels: int,
        inner_channels: int,
        input_channels: int = 0,
        submodule: Optional["UnetSkipConnectionBlock"] = None,
        outermost: bool = False,
        innermost: bool = False,
        norm_layer: Callable[[int], nn.Module] = nn.BatchNorm2d,
    ):
        super().__init__()
        self.outermost = outermost
        use_bias = _uses_bias(norm_layer)
        input_channels = input_channels or outer_channels

        down_conv = nn.Conv2d(
            input_channels,
            inner_channels,
            kernel_size=4,
            stride=2,
            padding=1,
            bias=use_bias,
        )
        down_relu = nn.LeakyReLU(0.2, True)
        up_relu = nn.ReLU(True)

        if outermost:
            assert submodule is not None
            up_conv = nn.ConvTranspose2d(
                inner_channels * 2, outer_channels, kernel_size=4, stride=2, padding=1
            )
            layers = [down_conv, submodule, up_relu, up_conv, nn.Tanh()]
        elif innermost:
            up_conv = nn.ConvTranspose2d(
                inner_channels,
                outer_channels,
                kernel_size=4,
                stride=2,
                padding=1,
                bias=use_bias,
            )
            layers = [down_relu, down_conv, up_relu, up_conv, norm_layer(outer_channels)]
        else:
            assert submodule is not None
            up_conv = nn.ConvTranspose2d(
                inner_channels * 2,
                outer_channels,
                kernel_size=4,
                stride=2,
                padding=1,
                bias=use_bias,
            )
            layers = [
                down_relu,
                down_conv,
                norm_layer(inner_channels),
                submodule,
                up_relu,
                up_conv,
                norm_layer(outer_channels),
            ]
        # No dropout: the generator is deterministic at train and inference time
        self.model = nn.Sequential(*layers)

    def forward(self, value: torch.Tensor) -> torch.Tensor:
        if self.outermost:
            return self.model(value)
        return torch.cat([value, self.model(value)], 1)


class UnetGenerator(nn.Module):
    """3-channel satellite crop -> 1-channel thermal crop in [-1, 1]

    ``depth`` downsamplings; level i has base_width * min(2**i, 8) filters.
    Input sides must be divisible by 2**depth.
    """

    def __init__(
        self,
        depth: int = 4,
        base_width: int = 16,
        norm: str = "batch",
        input_channels: int = SATELLITE_CHANNELS,
        output_channels: int = THERMAL_CHANNELS,
    ):
        super().__init__()
        if depth < 2:
            raise ConfigError(f"U-Net depth must be >= 2, got {depth}")
        self.depth = depth
        norm_layer = get_norm_layer(norm)
        widths = [base_width * min(2**i, 8) for i in range(depth)]

        block = UnetSkipConnectionBlock(
            widths[-2], widths[-1], innermost=True, norm_layer=norm_layer
        )
        for level in range(depth - 2, 0, -1):
            block = UnetSkipConnectionBlock(
                widths[level - 1], widths[level], submodule=block, norm_layer=norm_layer
            )
        self.model = UnetSkipConnectionBlock(
            output_channels,
            widths[0],
            input_channels=input_channels,
            submodule=block,
            outermost=True,
            norm_layer=norm_layer,
        )

    def forward(self, satellite: torch.Tensor) -> torch.Tensor:
        return self.model(satellite)


class NLayerDiscriminator(nn.Module):
    """Conditional PatchGAN on (thermal, satellite) channel-concatenated input

    Scores are unbounded reals; there is no sigmoid.
    """

    def __init__(
        self,
        base_width: int = 16,
        num_layers: int = 3,
        norm: str = "batch",
        input_channels: int = THERMAL_CHANNELS + SATELLITE_CHANNELS,
    ):
        super().__init__()
        norm_layer = get_norm_layer(norm)
        use_bias = _uses_bias(norm_layer)

        sequence = [
            nn.Conv2d(input_channels, base_width, kernel_size=4, stride=2, padding=1),
            nn.LeakyReLU(0.2, True),
        ]
        mult = 1
        for n in range(1, num_layers):
            prev, mult = mult, min(2**n, 8)
            sequence += [
                nn.Conv2d(
                    base_width * prev,
                    base_width * mult,
                    kernel_size=4,
                    stride=2,
                    padding=1,
                    bias=use_bias,
                ),
                norm_layer(base_width * mult),
                nn.LeakyReLU(0.2, True),
            ]
        prev, mult = mult, min(2**num_layers, 8)
        sequence += [
            nn.Conv2d(
                base_width * prev,
                base_width * mult,
                kernel_size=4,
                stride=1,
                padding=1,
                bias=use_bias,
            ),
            norm_layer(base_width * mult),
            nn.LeakyReLU(0.2, True),
            nn.Conv2d(base_width * mult, 1, kernel_size=4, stride=1, padding=1),
        ]
        self.model = nn.Sequential(*sequence)

    def forward(self, thermal: torch.Tensor, satellite: torch.Tensor) -> torch.Tensor:
        return self.model(torch.cat([thermal, satellite], 1))


def init_weights(net: nn.Module, gain: float = 0.02) -> None:
    """pix2pix normal init: conv weights N(0, gain), norm weights N(1, gain)"""

    def init_func(module: nn.Module) -> None:
        name = module.__class__.__name__
        if hasattr(module, "weight") and ("Conv" in name or "Linear" in name):
            nn.init.normal_(module.weight.data, 0.0, gain)
            if getattr(module, "bias", None) is not None:
                nn.init.constant_(module.bias.data, 0.0)
        elif "BatchNorm2d" in name:
            nn.init.normal_(module.weight.data, 1.0, gain)
            nn.init.constant_(module.bias.data, 0.0)

    net.apply(init_func)


def build_networks(config: TgmConfig) -> Tuple[UnetGenerator, NLayerDiscriminator]:
    """Generator and discriminator sized by config, initialized"""
    generator = UnetGenerator(config.depth, config.base_width, config.norm)
    discriminator = NLayerDiscriminator(config.disc_width, config.disc_layers, config.norm)
    init_weights(generator)
    init_weights(discriminator)
    return generator, discriminator
