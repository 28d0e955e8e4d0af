"""
Descriptor extraction, model fingerprints, NetVLAD warm start and checkpoints
"""

import logging
from dataclasses import asdict
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import torch
import torch.nn.functional as F

from ..exceptions import CheckpointError, ConfigError, InputError
from ..models.config import DannMode, SgmConfig
from ..models.descriptor import Descriptor
from ..models.tile import GeoTile
from ..utils.checkpoint import load_checkpoint, state_dict_fingerprint
from .networks import SgmModel, build_sgm

CHECKPOINT_KIND = "sgm"
BEST_CHECKPOINT = "best.pt"
LAST_CHECKPOINT = "last.pt"

ImageLike = Union[np.ndarray, GeoTile]


def images_to_tensor(images: Sequence[ImageLike]) -> torch.Tensor:
    """HxW or HxWxC [0, 1] arrays (or tiles) -> NCHW float tensor"""
    arrays = []
    for image in images:
        array = image.image if isinstance(image, GeoTile) else image
        array = np.asarray(array, dtype=np.float32)
        if array.ndim == 2:
            array = array[..., None]
        arrays.append(array)
    return torch.from_numpy(np.ascontiguousarray(np.stack(arrays))).permute(0, 3, 1, 2)


@torch.no_grad()
def embed_images(
    model: SgmModel, images: Sequence[ImageLike], batch_size: int = 32
) -> Tuple[np.ndarray, np.ndarray]:
    """Eval-mode descriptors (N, c_final) float32 plus degenerate flags"""
    if not images:
        return np.zeros((0, model.c_final), dtype=np.float32), np.zeros(0, dtype=bool)
    was_training = model.training
    model.eval()
    device = next(model.parameters()).device
    dtype = next(model.parameters()).dtype

    vectors: List[np.ndarray] = []
    flags: List[np.ndarray] = []
    for start in range(0, len(images), batch_size):
        batch = images_to_tensor(images[start : start + batch_size]).to(device, dtype)
        descriptors, degenerate = model.embed(batch)
        vectors.append(descriptors.cpu().numpy().astype(np.float32))
        flags.append(degenerate.cpu().numpy())
    model.train(was_training)
    return np.concatenate(vectors), np.concatenate(flags)


def embed(model: SgmModel, image: ImageLike) -> Descriptor:
    """Single-image descriptor; degenerate aggregation yields a flagged zero vector"""
    vectors, flags = embed_images(model, [image], batch_size=1)
    if flags[0]:
        logging.debug("Degenerate descriptor (all residuals zero)")
    return Descriptor(vector=vectors[0], degenerate=bool(flags[0]))


def embed_tiles(model: SgmModel, tiles: Sequence[GeoTile], batch_size: int = 32) -> np.ndarray:
    descriptors, degenerate = embed_images(model, tiles, batch_size)
    if degenerate.any():
        logging.warning(f"{int(degenerate.sum())} tiles produced degenerate descriptors")
    return descriptors


def model_fingerprint(model: SgmModel) -> str:
    """64-character SHA-256 hex digest of the weights"""
    return state_dict_fingerprint(model.state_dict())


@torch.no_grad()
def init_clusters(
    model: SgmModel,
    tiles: Sequence[GeoTile],
    method: str = "kmeans",
    seed: int = 0,
    descriptors_num: int = 50000,
    per_image: int = 40,
    batch_size: int = 32,
) -> None:
    """Initialize NetVLAD centroids from local features of sampled tiles

    ``random`` draws unit vectors; ``kmeans`` clusters sampled local features
    with faiss.
    """
    netvlad = model.aggregation
    rng = np.random.default_rng(seed)
    if method == "random":
        centroids = rng.standard_normal((netvlad.clusters_num, netvlad.dim))
        centroids /= np.linalg.norm(centroids, axis=1, keepdims=True)
        netvlad.set_centroids(centroids, alpha=1.0)
        logging.debug(f"Random init of {netvlad.clusters_num} NetVLAD clusters")
        return
    if method != "kmeans":
        raise ConfigError(f"Unknown cluster init '{method}'")
    if not tiles:
        raise InputError("No tiles to initialize NetVLAD clusters from")

    try:
        import faiss
    except ImportError as e:
        raise ConfigError(
            "faiss is required for k-means cluster init; set SGM_CLUSTER_INIT=random"
        ) from e

    was_training = model.training
    model.eval()
    device = next(model.parameters()).device
    images_num = min(len(tiles), max(1, -(-descriptors_num // per_image)))
    chosen = np.sort(rng.choice(len(tiles), images_num, replace=False))

    samples: List[np.ndarray] = []
    for start in range(0, images_num, batch_size):
        batch = images_to_tensor([tiles[i] for i in chosen[start : start + batch_size]])
        features = F.normalize(model.local_features(batch.to(device)), p=2, dim=1)
        local = features.flatten(2).permute(0, 2, 1).cpu().numpy()
        for image_features in local:
            take = min(per_image, image_features.shape[0])
            pick = rng.choice(image_features.shape[0], take, replace=False)
            samples.append(image_features[pick])
    model.train(was_training)

    descriptors = np.ascontiguousarray(np.concatenate(samples), dtype=np.float32)
    if descriptors.shape[0] < netvlad.clusters_num:
        raise InputError(
            f"{descriptors.shape[0]} local features cannot seed"
            f" {netvlad.clusters_num} clusters"
        )
    kmeans = faiss.Kmeans(
        netvlad.dim, netvlad.clusters_num, niter=100, seed=seed, verbose=False
    )
    kmeans.train(descriptors)
    netvlad.init_params(kmeans.centroids, descriptors)
    logging.info(
        f"k-means init of {netvlad.clusters_num} NetVLAD clusters from"
        f" {descriptors.shape[0]} local features (alpha {netvlad.alpha:.2f})"
    )


def sgm_checkpoint_payload(
    model: SgmModel, config: SgmConfig, **extra: Any
) -> Dict[str, Any]:
    config_dict = asdict(config)
    config_dict["dann_mode"] = config.dann_mode.value
    payload = {
        "kind": CHECKPOINT_KIND,
        "config": config_dict,
        "model": model.state_dict(),
        "model_fingerprint": model_fingerprint(model),
    }
    payload.update(extra)
    return payload


def load_sgm(path: Union[str, Path]) -> Tuple[SgmModel, SgmConfig]:
    """Rebuild an embedding network from a checkpoint, in eval mode"""
    payload = load_checkpoint(path, CHECKPOINT_KIND)
    try:
        config_dict = dict(payload["config"])
        config_dict["dann_mode"] = DannMode.parse(config_dict["dann_mode"])
        config = SgmConfig(**config_dict)
        model = build_sgm(config, pretrained=False)
        model.load_state_dict(payload["model"])
        # alpha is not a parameter; the conv weights already carry it
        model.aggregation.alpha = float(payload.get("netvlad_alpha", 0.0))
    except (KeyError, TypeError, RuntimeError) as e:
        raise CheckpointError(f"Checkpoint {path} does not hold a usable model: {e}") from e
    model.eval()
    logging.info(f"Loaded SGM from {path} (epoch {payload.get('epoch')})")
    return model, config
