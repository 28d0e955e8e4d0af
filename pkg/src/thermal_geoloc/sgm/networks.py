"""
Embedding network: backbone, 1x1 compression, NetVLAD, and the domain classifier
"""

import logging
from typing import Any, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from ..exceptions import ConfigError, InputError
from ..models.config import SgmConfig

DOWNSAMPLING = 16
THERMAL_DOMAIN = 0
SATELLITE_DOMAIN = 1

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


class GradientReversalFunction(torch.autograd.Function):
    """Identity forward; upstream gradient multiplied by -scale backward"""

    @staticmethod
    def forward(  # type: ignore[override]
        ctx: Any, x: torch.Tensor, scale: float
    ) -> torch.Tensor:
        ctx.scale = scale
        return x.view_as(x)

    @staticmethod
    def backward(  # type: ignore[override]
        ctx: Any, grad_output: torch.Tensor
    ) -> Tuple[torch.Tensor, None]:
        return grad_output.neg() * ctx.scale, None


def gradient_reversal(x: torch.Tensor, scale: float = 1.0) -> torch.Tensor:
    return GradientReversalFunction.apply(x, scale)


def tiny_backbone() -> Tuple[nn.Module, int]:
    """Four stride-2 conv blocks: overall stride 16, 128 output channels"""
    layers = []
    in_channels = 3
    for out_channels in (16, 32, 64, 128):
        layers += [
            nn.Conv2d(in_channels, out_channels, kernel_size=3, stride=2, padding=1),
            nn.BatchNorm2d(out_channels),
            nn.ReLU(inplace=True),
        ]
        in_channels = out_channels
    return nn.Sequential(*layers), in_channels


def resnet18_backbone(pretrained: bool = False) -> Tuple[nn.Module, int]:
    """ResNet-18 truncated after layer3 (conv4): stride 16, 256 channels"""
    import torchvision

    weights = torchvision.models.ResNet18_Weights.IMAGENET1K_V1 if pretrained else None
    resnet = torchvision.models.resnet18(weights=weights)
    layers = list(resnet.children())[:-3]
    return nn.Sequential(*layers), 256


def get_backbone(name: str, pretrained: bool = False) -> Tuple[nn.Module, int]:
    if name == "tiny":
        if pretrained:
            logging.warning("The tiny backbone has no pretrained weights; ignoring")
        return tiny_backbone()
    if name == "resnet18":
        return resnet18_backbone(pretrained)
    raise ConfigError(f"Unknown backbone '{name}'")


class NetVLAD(nn.Module):
    """Soft-assignment residual aggregation with intra- and global L2 normalization"""

    def __init__(self, clusters_num: int = 64, dim: int = 64, normalize_input: bool = True):
        super().__init__()
        self.clusters_num = clusters_num
        self.dim = dim
        self.normalize_input = normalize_input
        self.alpha = 0.0
        self.conv = nn.Conv2d(dim, clusters_num, kernel_size=(1, 1))
        self.centroids = nn.Parameter(torch.rand(clusters_num, dim))

    def set_centroids(self, centroids: np.ndarray, alpha: float = 1.0) -> None:
        """Centroids plus assignment weights alpha * centroid direction"""
        centroids = np.asarray(centroids, dtype=np.float32)
        if centroids.shape != (self.clusters_num, self.dim):
            raise InputError(
                f"Expected centroids of shape {(self.clusters_num, self.dim)},"
                f" got {centroids.shape}"
            )
        centroids_assign = centroids / np.linalg.norm(centroids, axis=1, keepdims=True)
        self.alpha = float(alpha)
        with torch.no_grad():
            self.centroids.copy_(torch.from_numpy(centroids))
            self.conv.weight.copy_(
                torch.from_numpy(self.alpha * centroids_assign)[:, :, None, None]
            )
            self.conv.bias.zero_()

    def init_params(self, centroids: np.ndarray, descriptors: np.ndarray) -> None:
        """Warm start from k-means centroids of local features"""
        centroids = np.asarray(centroids, dtype=np.float32)
        alpha = 1.0
        if self.clusters_num > 1:
            centroids_assign = centroids / np.linalg.norm(centroids, axis=1, keepdims=True)
            dots = np.dot(centroids_assign, np.asarray(descriptors, dtype=np.float32).T)
            dots.sort(0)
            dots = dots[::-1, :]
            gap = float(np.mean(dots[0, :] - dots[1, :]))
            if gap > 0:
                alpha = float(-np.log(0.01) / gap)
        self.set_centroids(centroids, alpha)

    def aggregate(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        """(N, D, H, W) local features -> (descriptors, degenerate flags)

        A sample whose residual sum is exactly zero comes back as the zero vector
        and is flagged degenerate.
        """
        n, d = x.shape[:2]
        if self.normalize_input:
            x = F.normalize(x, p=2.0, dim=1)
        x_flatten = x.view(n, d, -1)
        soft_assign = F.softmax(self.conv(x).view(n, self.clusters_num, -1), dim=1)

        residual = x_flatten.unsqueeze(1) - self.centroids.unsqueeze(0).unsqueeze(-1)
        residual = residual * soft_assign.unsqueeze(2)
        vlad = residual.sum(dim=-1)

        degenerate = vlad.flatten(1).abs().amax(dim=1) == 0
        vlad = F.normalize(vlad, p=2.0, dim=2)
        vlad = F.normalize(vlad.view(n, -1), p=2.0, dim=1)
        return vlad, degenerate

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.aggregate(x)[0]


class DomainClassifier(nn.Module):
    """Two-layer perceptron over descriptors; logits for (thermal, satellite)"""

    def __init__(self, c_final: int, hidden: int = 256):
        super().__init__()
        self.model = nn.Sequential(
            nn.Linear(c_final, hidden), nn.ReLU(inplace=True), nn.Linear(hidden, 2)
        )

    def forward(self, descriptors: torch.Tensor) -> torch.Tensor:
        return self.model(descriptors)

    def probabilities(self, descriptors: torch.Tensor) -> torch.Tensor:
        return F.softmax(self.forward(descriptors), dim=1)


class SgmModel(nn.Module):
    """Shared embedding network for thermal queries and satellite database tiles"""

    def __init__(
        self,
        backbone: nn.Module,
        backbone_channels: int,
        c_target: int,
        num_clusters: int,
        domain_hidden: int = 256,
    ):
        super().__init__()
        self.backbone = backbone
        self.compression = nn.Sequential(
            nn.Conv2d(backbone_channels, c_target, kernel_size=1),
            nn.BatchNorm2d(c_target),
        )
        self.aggregation = NetVLAD(num_clusters, c_target)
        self.domain_classifier = DomainClassifier(num_clusters * c_target, domain_hidden)
        self.register_buffer("pixel_mean", torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1))
        self.register_buffer("pixel_std", torch.tensor(IMAGENET_STD).view(1, 3, 1, 1))

    @property
    def c_final(self) -> int:
        return self.aggregation.clusters_num * self.aggregation.dim

    def prepare(self, images: torch.Tensor) -> torch.Tensor:
        """[0, 1] NCHW images, 1 or 3 channels -> normalized 3-channel input"""
        if images.ndim != 4:
            raise InputError(f"Expected NCHW images, got shape {tuple(images.shape)}")
        height, width = images.shape[-2:]
        if height % DOWNSAMPLING or width % DOWNSAMPLING:
            raise InputError(
                f"Image sides must be divisible by {DOWNSAMPLING}, got {height}x{width}"
            )
        if images.shape[1] == 1:
            images = images.expand(-1, 3, -1, -1)
        elif images.shape[1] != 3:
            raise InputError(f"Expected 1 or 3 channels, got {images.shape[1]}")
        return (images - self.pixel_mean) / self.pixel_std

    def local_features(self, images: torch.Tensor) -> torch.Tensor:
        """Compressed feature map (N, c_target, H/16, W/16)"""
        return self.compression(self.backbone(self.prepare(images)))

    def embed(self, images: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        return self.aggregation.aggregate(self.local_features(images))

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        return self.embed(images)[0]


def build_sgm(config: SgmConfig, pretrained: bool = False) -> SgmModel:
    """Embedding network sized by config

    ``pretrained`` loads ImageNet weights for the resnet18 preset; checkpoint
    loading passes False and restores weights afterwards.
    """
    backbone, channels = get_backbone(config.backbone, pretrained)
    return SgmModel(
        backbone, channels, config.c_target, config.num_clusters, config.domain_hidden
    )
