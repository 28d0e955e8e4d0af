"""
Triplet margin, domain-adversarial and combined geo-localization losses
"""

import logging
import math
from typing import Callable, Optional

import torch
import torch.nn.functional as F

from ..exceptions import InputError
from ..models.config import DannMode
from .networks import SATELLITE_DOMAIN, THERMAL_DOMAIN, gradient_reversal

PROBABILITY_FLOOR = 1e-12
LOG_PROBABILITY_FLOOR = math.log(PROBABILITY_FLOOR)


def triplet_margin_loss(
    q: torch.Tensor, p: torch.Tensor, n: torch.Tensor, margin: float = 0.1
) -> torch.Tensor:
    """Per-triplet max(0, |q - p| - |q - n| + margin) over the last dimension"""
    if q.shape[-1] != p.shape[-1] or q.shape[-1] != n.shape[-1]:
        raise InputError(
            f"Descriptor dimensions differ: {q.shape[-1]}, {p.shape[-1]}, {n.shape[-1]}"
        )
    d_pos = torch.linalg.vector_norm(q - p, dim=-1)
    d_neg = torch.linalg.vector_norm(q - n, dim=-1)
    return F.relu(d_pos - d_neg + margin)


def _domain_nll(
    classifier: Callable[[torch.Tensor], torch.Tensor],
    descriptors: torch.Tensor,
    domain: int,
    reverse_gradient: bool,
) -> torch.Tensor:
    if not torch.isfinite(descriptors).all():
        raise InputError("Descriptors contain non-finite values")
    if reverse_gradient:
        descriptors = gradient_reversal(descriptors)
    log_probs = F.log_softmax(classifier(descriptors), dim=-1)[..., domain]
    if (log_probs < LOG_PROBABILITY_FLOOR).any():
        logging.warning(
            f"Domain probability below {PROBABILITY_FLOOR:g}; clamping the cross-entropy"
        )
        log_probs = log_probs.clamp(min=LOG_PROBABILITY_FLOOR)
    return -log_probs


def dann_loss(
    classifier: Callable[[torch.Tensor], torch.Tensor],
    q: torch.Tensor,
    p: torch.Tensor,
    n: Optional[torch.Tensor] = None,
    reverse_gradient: bool = True,
) -> torch.Tensor:
    """Domain cross-entropy per triplet: q is thermal, p and n are satellite

    ``classifier`` returns (thermal, satellite) logits. Passing n=None drops the
    negative term (only-positive mode).
    """
    loss = _domain_nll(classifier, q, THERMAL_DOMAIN, reverse_gradient)
    loss = loss + _domain_nll(classifier, p, SATELLITE_DOMAIN, reverse_gradient)
    if n is not None:
        loss = loss + _domain_nll(classifier, n, SATELLITE_DOMAIN, reverse_gradient)
    return loss


def sgm_total_loss(
    triplet_losses: torch.Tensor,
    dann_losses: Optional[torch.Tensor],
    lambda2: float = 0.1,
    dann_mode: DannMode = DannMode.FULL,
) -> torch.Tensor:
    """mean(triplet) + lambda2 * mean(dann); the dann term is 0 when mode is off"""
    total = triplet_losses.mean()
    if dann_mode == DannMode.OFF or dann_losses is None:
        return total
    return total + lambda2 * dann_losses.mean()
