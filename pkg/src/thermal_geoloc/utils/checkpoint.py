"""
Atomic artifact writing and fingerprints
"""

import hashlib
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, Union

import torch

from ..exceptions import CheckpointError


def atomic_write_bytes(path: Union[str, Path], data: bytes) -> None:
    """Write bytes through a temp file in the same directory, then rename"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_checkpoint(path: Union[str, Path], payload: Dict[str, Any]) -> None:
    """torch.save to a temp file and rename into place"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        torch.save(payload, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path: Union[str, Path], kind: str) -> Dict[str, Any]:
    """Load a checkpoint written by save_checkpoint and check its kind"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint {path} not found")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e
    if not isinstance(payload, dict) or payload.get("kind") != kind:
        raise CheckpointError(f"{path} is not a {kind} checkpoint")
    return payload


def state_dict_fingerprint(state_dict: Dict[str, torch.Tensor]) -> str:
    """SHA-256 hex digest over parameter names and raw tensor bytes"""
    digest = hashlib.sha256()
    for name in sorted(state_dict):
        tensor = state_dict[name].detach().cpu().contiguous()
        digest.update(name.encode("utf-8"))
        digest.update(str(tuple(tensor.shape)).encode("utf-8"))
        digest.update(tensor.numpy().tobytes() if tensor.numel() else b"")
    return digest.hexdigest()


def data_fingerprint(tile_ids: Iterable[int], extra: str = "") -> str:
    """SHA-256 over the tile ids a model was trained on"""
    digest = hashlib.sha256(extra.encode("utf-8"))
    for tile_id in tile_ids:
        digest.update(int(tile_id).to_bytes(8, "little", signed=True))
    return digest.hexdigest()
