"""
Least-squares GAN and L1 objectives of the thermal generative module
"""

import torch

from ..exceptions import InputError


def _check_finite(name: str, tensor: torch.Tensor) -> None:
    if not torch.isfinite(tensor).all():
        raise InputError(f"{name} contains non-finite values")


def lsgan_d_loss(
    scores_real: torch.Tensor, scores_fake: torch.Tensor, a: float = 0.0, b: float = 1.0
) -> torch.Tensor:
    """1/2 E[(D(real) - b)^2] + 1/2 E[(D(fake) - a)^2]

    The grids may differ in shape; each term is its own mean.
    """
    _check_finite("scores_real", scores_real)
    _check_finite("scores_fake", scores_fake)
    return 0.5 * ((scores_real - b) ** 2).mean() + 0.5 * ((scores_fake - a) ** 2).mean()


def lsgan_g_loss(scores_fake: torch.Tensor, c: float = 1.0) -> torch.Tensor:
    """E[(D(G(x)) - c)^2], without a 1/2 factor"""
    _check_finite("scores_fake", scores_fake)
    return ((scores_fake - c) ** 2).mean()


def l1_loss(generated: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all pixels"""
    if generated.shape != target.shape:
        raise InputError(
            f"L1 shape mismatch: {tuple(generated.shape)} vs {tuple(target.shape)}"
        )
    return (generated - target).abs().mean()


def tgm_generator_objective(
    scores_fake: torch.Tensor,
    generated: torch.Tensor,
    target: torch.Tensor,
    c: float = 1.0,
    lambda1: float = 100.0,
) -> torch.Tensor:
    """What the generator minimizes: adversarial term plus lambda1-weighted L1"""
    if lambda1 < 0:
        raise InputError(f"lambda1 must be >= 0, got {lambda1}")
    adversarial = lsgan_g_loss(scores_fake, c)
    if lambda1 == 0:
        return adversarial
    return adversarial + lambda1 * l1_loss(generated, target)


def tgm_total_loss(
    scores_real: torch.Tensor,
    scores_fake: torch.Tensor,
    generated: torch.Tensor,
    target: torch.Tensor,
    a: float = 0.0,
    b: float = 1.0,
    c: float = 1.0,
    lambda1: float = 100.0,
) -> torch.Tensor:
    """Sum of both adversarial terms and the weighted L1, for reporting"""
    return lsgan_d_loss(scores_real, scores_fake, a, b) + tgm_generator_objective(
        scores_fake, generated, target, c, lambda1
    )
