"""
Configuration data models for training, evaluation and the pipeline
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ..exceptions import ConfigError
from .tile import Rect
from .world import WorldSpec


class DannMode(str, Enum):
    """Which triplet members feed the domain classifier"""

    OFF = "off"
    FULL = "full"
    ONLY_POSITIVE = "only_positive"

    @classmethod
    def parse(cls, value: str) -> "DannMode":
        normalized = value.strip().lower().replace("-", "_")
        for mode in cls:
            if mode.value == normalized:
                return mode
        raise ConfigError(
            f"Unknown DANN mode '{value}' (expected off, full or only-positive)"
        )


@dataclass
class CEConfig:
    """Contrast enhancement switch"""

    factor: float = 3.0
    enabled: bool = False

    def validate(self) -> None:
        if not self.factor > 0:
            raise ConfigError(f"CE factor must be positive, got {self.factor}")


@dataclass
class TgmConfig:
    """Thermal generative module hyperparameters"""

    lambda1: float = 100.0
    label_fake: float = 0.0
    label_real: float = 1.0
    label_target: float = 1.0
    epochs: int = 40
    batch_size: int = 8
    learning_rate: float = 2e-4
    beta1: float = 0.5
    decay_start_epoch: int = 20
    train_resolution: int = 1024
    output_resolution: int = 512
    use_ce_inputs: bool = False
    seed: int = 0
    depth: int = 4
    base_width: int = 16
    disc_width: int = 16
    disc_layers: int = 3
    norm: str = "batch"
    max_steps: Optional[int] = None
    device: str = "cpu"

    def validate(self) -> None:
        if not self.lambda1 > 0:
            raise ConfigError(f"TGM lambda1 must be positive, got {self.lambda1}")
        if self.epochs < self.decay_start_epoch:
            raise ConfigError(
                f"TGM epochs ({self.epochs}) must be >= decay_start_epoch"
                f" ({self.decay_start_epoch})"
            )
        if self.train_resolution < self.output_resolution:
            raise ConfigError("TGM train_resolution must be >= output_resolution")
        if self.train_resolution % (2**self.depth):
            raise ConfigError(
                f"TGM train_resolution {self.train_resolution} is not divisible by"
                f" 2**depth ({2**self.depth})"
            )
        if self.batch_size < 1 or self.epochs < 1:
            raise ConfigError("TGM batch_size and epochs must be >= 1")
        if self.norm not in ("batch", "instance", "none"):
            raise ConfigError(f"Unknown TGM norm '{self.norm}'")

    @classmethod
    def full_scale(cls, **overrides: Any) -> "TgmConfig":
        """pix2pix-sized preset at 1024 px training, 512 px output"""
        return replace(
            cls(depth=8, base_width=64, disc_width=64, norm="batch"), **overrides
        )

    @classmethod
    def desk(cls, **overrides: Any) -> "TgmConfig":
        """Small preset for CPU runs on 64 px synthetic crops"""
        return replace(
            cls(
                epochs=20,
                decay_start_epoch=10,
                batch_size=4,
                train_resolution=64,
                output_resolution=64,
            ),
            **overrides,
        )


@dataclass
class SgmConfig:
    """Geo-localization module hyperparameters"""

    margin: float = 0.1
    lambda2: float = 0.1
    dann_mode: DannMode = DannMode.OFF
    c_target: int = 64
    num_clusters: int = 64
    c_final: int = 4096
    epochs: int = 100
    queries_per_epoch: int = 5000
    cache_size: int = 5000
    batch_queries: int = 4
    negatives_per_query: int = 10
    learning_rate: float = 1e-4
    pos_radius_m: float = 35.0
    neg_radius_m: float = 50.0
    use_ce: bool = False
    use_generated: bool = False
    generated_mix_ratio: float = 0.5
    seed: int = 0
    backbone: str = "tiny"
    pretrained: bool = False
    cluster_init: str = "kmeans"
    domain_hidden: int = 256
    infer_batch_size: int = 32
    val_prior_radius_m: float = 512.0
    device: str = "cpu"

    def validate(self) -> None:
        if self.num_clusters * self.c_target != self.c_final:
            raise ConfigError(
                f"num_clusters * c_target = {self.num_clusters * self.c_target}"
                f" does not equal c_final = {self.c_final}"
            )
        if not self.margin > 0:
            raise ConfigError("SGM margin must be positive")
        if not self.pos_radius_m < self.neg_radius_m:
            raise ConfigError("pos_radius_m must be smaller than neg_radius_m")
        if not 0.0 <= self.generated_mix_ratio <= 1.0:
            raise ConfigError("generated_mix_ratio must lie in [0, 1]")
        if self.lambda2 < 0:
            raise ConfigError("lambda2 must be >= 0")
        if self.backbone not in ("tiny", "resnet18"):
            raise ConfigError(f"Unknown backbone '{self.backbone}'")
        if self.cluster_init not in ("kmeans", "random"):
            raise ConfigError(f"Unknown cluster_init '{self.cluster_init}'")
        if min(self.batch_queries, self.negatives_per_query, self.cache_size) < 1:
            raise ConfigError(
                "batch_queries, negatives_per_query and cache_size must be >= 1"
            )

    @classmethod
    def full_scale(cls, **overrides: Any) -> "SgmConfig":
        return replace(cls(backbone="resnet18", pretrained=True), **overrides)

    @classmethod
    def desk(cls, **overrides: Any) -> "SgmConfig":
        return replace(
            cls(
                c_target=16,
                num_clusters=8,
                c_final=128,
                epochs=20,
                queries_per_epoch=64,
                cache_size=500,
                learning_rate=1e-3,
                cluster_init="random",
            ),
            **overrides,
        )


@dataclass
class PathsConfig:
    """Input maps and the working directory holding every artifact"""

    satellite_map: str = ""
    thermal_map: str = ""
    unpaired_satellite_map: str = ""
    work_dir: str = "runs/default"

    @property
    def root(self) -> Path:
        return Path(self.work_dir)

    @property
    def dataset_manifest(self) -> Path:
        return self.root / "dataset.json"

    def tgm_dir(self, variant: str) -> Path:
        return self.root / "tgm" / variant

    def generated_dataset(self, variant: str) -> Path:
        return self.tgm_dir(variant) / "generated.npz"

    def sgm_dir(self, cell: str) -> Path:
        return self.root / "sgm" / cell

    def index_file(self, cell: str) -> Path:
        return self.sgm_dir(cell) / "database.stgl"

    @property
    def report_dir(self) -> Path:
        return self.root / "reports"


TRAINING_FIELDS = (
    "paths",
    "tgm",
    "sgm",
    "ce",
    "world",
    "split_regions",
    "split_fractions",
    "generated_regions",
    "crop_size",
    "stride",
    "max_invalid_fraction",
    "seed",
)


TILING_FIELDS = (
    "paths",
    "world",
    "split_regions",
    "split_fractions",
    "generated_regions",
    "crop_size",
    "stride",
)

# The generator never sees the SGM settings
TGM_FIELDS = tuple(name for name in TRAINING_FIELDS if name != "sgm")

DEFAULT_SPLIT_FRACTIONS = (0.7, 0.1, 0.2)


@dataclass
class ExperimentConfig:
    """Everything needed to reproduce one ablation cell"""

    paths: PathsConfig = field(default_factory=PathsConfig)
    tgm: TgmConfig = field(default_factory=TgmConfig)
    sgm: SgmConfig = field(default_factory=SgmConfig)
    ce: CEConfig = field(default_factory=CEConfig)
    world: WorldSpec = field(default_factory=WorldSpec)
    split_regions: Dict[str, List[Rect]] = field(default_factory=dict)
    split_fractions: Tuple[float, ...] = DEFAULT_SPLIT_FRACTIONS
    generated_regions: List[Rect] = field(default_factory=list)
    crop_size: int = 512
    stride: int = 35
    max_invalid_fraction: float = 0.0
    eval_split: str = "test"
    recall_ns: Tuple[int, ...] = (1, 5)
    prior_radius_m: float = 512.0
    success_radius_m: float = 50.0
    histogram_edges: Tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 100.0)
    seed: int = 0
    log_level: str = "INFO"

    def validate(self) -> None:
        self.tgm.validate()
        self.sgm.validate()
        self.ce.validate()
        if self.crop_size < 16 or self.crop_size % 16:
            raise ConfigError("crop_size must be a positive multiple of 16")
        if self.stride < 1:
            raise ConfigError("stride must be >= 1")
        if not 0.0 <= self.max_invalid_fraction <= 1.0:
            raise ConfigError("max_invalid_fraction must lie in [0, 1]")
        if self.eval_split not in ("train", "val", "test"):
            raise ConfigError(f"Unknown eval split '{self.eval_split}'")
        if set(self.split_regions) - {"train", "val", "test"}:
            raise ConfigError(
                f"Unknown split names: {sorted(set(self.split_regions))}"
            )
        if len(self.split_fractions) != 3 or min(self.split_fractions) < 0:
            raise ConfigError(
                "split_fractions needs three non-negative train/val/test values"
            )
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ConfigError(
                f"split_fractions must sum to 1, got {sum(self.split_fractions)}"
            )
        if not self.split_regions:
            share = dict(zip(("train", "val", "test"), self.split_fractions))
            if not share["train"] > 0 or not share[self.eval_split] > 0:
                raise ConfigError(
                    f"split_fractions leave the train or {self.eval_split} split empty"
                )
        if self.tgm.output_resolution != self.crop_size:
            raise ConfigError(
                f"TGM output_resolution ({self.tgm.output_resolution}) must equal"
                f" crop_size ({self.crop_size})"
            )
        if self.use_generated and not self.generated_regions:
            raise ConfigError("Generated dataset requested but GENERATED_REGIONS is empty")
        if not self.recall_ns or min(self.recall_ns) < 1:
            raise ConfigError("recall_ns must list at least one N >= 1")
        if list(self.histogram_edges) != sorted(set(self.histogram_edges)):
            raise ConfigError("histogram_edges must be strictly increasing")

    # Ablation switches

    @property
    def use_ce(self) -> bool:
        return self.ce.enabled

    @property
    def dann_mode(self) -> DannMode:
        return self.sgm.dann_mode

    @property
    def use_generated(self) -> bool:
        return self.sgm.use_generated

    @property
    def lambda1(self) -> float:
        return self.tgm.lambda1

    def apply_ablation(
        self,
        ce: Optional[bool] = None,
        dann_mode: Optional[DannMode] = None,
        use_generated: Optional[bool] = None,
        lambda1: Optional[float] = None,
    ) -> "ExperimentConfig":
        """Set ablation switches consistently across the sub-configs"""
        if ce is not None:
            self.ce.enabled = ce
            self.sgm.use_ce = ce
            self.tgm.use_ce_inputs = ce
        if dann_mode is not None:
            self.sgm.dann_mode = dann_mode
        if use_generated is not None:
            self.sgm.use_generated = use_generated
        if lambda1 is not None:
            self.tgm.lambda1 = lambda1
        return self

    @property
    def cell_name(self) -> str:
        """Short label of the ablation cell, also its artifact directory name"""
        parts = ["ce"] if self.use_ce else []
        if self.dann_mode == DannMode.FULL:
            parts.append("dann")
        elif self.dann_mode == DannMode.ONLY_POSITIVE:
            parts.append("dann-only-positive")
        if self.use_generated:
            parts.append(f"generated-lambda1={self.lambda1:g}")
        return "+".join(parts) or "baseline"

    @property
    def tgm_variant(self) -> str:
        """Artifact directory name of the generator this cell would use"""
        domain = "ce" if self.tgm.use_ce_inputs else "raw"
        return f"{domain}-lambda1={self.lambda1:g}"

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["sgm"]["dann_mode"] = self.sgm.dann_mode.value
        return data

    @property
    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form"""
        payload = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _fingerprint_of(self, fields: Tuple[str, ...]) -> str:
        data = self.to_dict()
        subset = {k: data[k] for k in fields}
        subset["paths"] = {k: v for k, v in subset["paths"].items() if k != "work_dir"}
        payload = json.dumps(subset, sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    @property
    def training_fingerprint(self) -> str:
        """SHA-256 over the fields that change trained SGM weights"""
        return self._fingerprint_of(TRAINING_FIELDS)

    @property
    def tiling_fingerprint(self) -> str:
        """SHA-256 over the fields that decide tiles, pairs and splits"""
        return self._fingerprint_of(TILING_FIELDS)

    @property
    def tgm_fingerprint(self) -> str:
        """SHA-256 over the fields that change the generator and its output"""
        return self._fingerprint_of(TGM_FIELDS)
