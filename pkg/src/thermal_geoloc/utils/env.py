"""
Environment configuration utilities
"""

import json
import os
from collections import ChainMap
from pathlib import Path
from typing import Any, Callable, List, Mapping, Optional, Tuple, Union

from dotenv import dotenv_values

from ..exceptions import ConfigError
from ..models.config import (
    CEConfig,
    DannMode,
    ExperimentConfig,
    PathsConfig,
    SgmConfig,
    TgmConfig,
)
from ..models.world import WorldSpec

Source = Mapping[str, Optional[str]]


def get_env_value(key: str, default: str = "", source: Optional[Source] = None) -> str:
    """Get configuration value, removing comments"""
    source = os.environ if source is None else source
    value = source.get(key)
    if value is None:
        value = default
    # Remove comments from values
    if "#" in value:
        value = value.split("#")[0].strip()
    return value.strip()


def get_env_int(key: str, default: int, source: Optional[Source] = None) -> int:
    """Get configuration value as integer"""
    value = get_env_value(key, str(default), source)
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"{key} must be an integer, got '{value}'") from e


def get_env_optional_int(
    key: str, default: Optional[int], source: Optional[Source] = None
) -> Optional[int]:
    """Get configuration value as integer; empty or 'none' means None"""
    value = get_env_value(key, "" if default is None else str(default), source)
    if value == "" or value.lower() == "none":
        return None
    try:
        return int(value)
    except ValueError as e:
        raise ConfigError(f"{key} must be an integer, got '{value}'") from e


def get_env_float(key: str, default: float, source: Optional[Source] = None) -> float:
    """Get configuration value as float"""
    value = get_env_value(key, str(default), source)
    try:
        return float(value)
    except ValueError as e:
        raise ConfigError(f"{key} must be a number, got '{value}'") from e


def get_env_list(
    key: str, default: str = "", source: Optional[Source] = None
) -> List[str]:
    """Get configuration value as list, filtering empty values"""
    value = get_env_value(key, default, source)
    if not value:
        return []
    # Split by comma and filter out empty strings
    return [item.strip() for item in value.split(",") if item.strip()]


def get_env_number_list(
    key: str, default: str, cast: Callable[[str], Any], source: Optional[Source] = None
) -> Tuple[Any, ...]:
    """Comma-separated numbers; a malformed item is a ConfigError"""
    items = get_env_list(key, default, source)
    try:
        return tuple(cast(item) for item in items)
    except ValueError as e:
        raise ConfigError(f"{key} must be a comma-separated list of numbers") from e


def get_env_bool(key: str, default: bool = False, source: Optional[Source] = None) -> bool:
    """Get configuration value as boolean"""
    value = get_env_value(key, str(default).lower(), source)
    return value.lower() in ("true", "1", "yes", "on")


def get_env_json(key: str, default: Any, source: Optional[Source] = None) -> Any:
    """Get configuration value parsed as JSON"""
    source = os.environ if source is None else source
    raw = source.get(key)
    if raw is None or not raw.strip():
        return default
    try:
        return json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{key} is not valid JSON: {e}") from e


def read_config_source(config_path: Union[str, Path, None]) -> Source:
    """Process environment layered over the .env file (environment wins)"""
    file_values: Mapping[str, Optional[str]] = {}
    if config_path is not None:
        path = Path(config_path)
        if not path.exists():
            raise ConfigError(f"Configuration file {path} not found")
        file_values = dotenv_values(path)
    return ChainMap(dict(os.environ), dict(file_values))


def _parse_rects(value: Any, key: str) -> List[Tuple[float, float, float, float]]:
    message = f"{key} must be a list of [x_min, y_min, x_max, y_max]"
    try:
        rects = [tuple(float(v) for v in rect) for rect in value]
    except (TypeError, ValueError) as e:
        raise ConfigError(message) from e
    if any(len(rect) != 4 for rect in rects):
        raise ConfigError(message)
    return rects  # type: ignore[return-value]


def load_experiment_config(config_path: Union[str, Path, None] = None) -> ExperimentConfig:
    """Build an ExperimentConfig from a .env file and the process environment"""
    src = read_config_source(config_path)
    defaults = ExperimentConfig()
    t, s, w = TgmConfig(), SgmConfig(), WorldSpec()

    seed = get_env_int("SEED", defaults.seed, src)
    device = get_env_value("DEVICE", "cpu", src)

    paths = PathsConfig(
        satellite_map=get_env_value("SATELLITE_MAP", "", src),
        thermal_map=get_env_value("THERMAL_MAP", "", src),
        unpaired_satellite_map=get_env_value("UNPAIRED_SATELLITE_MAP", "", src),
        work_dir=get_env_value("WORK_DIR", defaults.paths.work_dir, src),
    )

    tgm = TgmConfig(
        lambda1=get_env_float("TGM_LAMBDA1", t.lambda1, src),
        label_fake=get_env_float("TGM_LABEL_FAKE", t.label_fake, src),
        label_real=get_env_float("TGM_LABEL_REAL", t.label_real, src),
        label_target=get_env_float("TGM_LABEL_TARGET", t.label_target, src),
        epochs=get_env_int("TGM_EPOCHS", t.epochs, src),
        batch_size=get_env_int("TGM_BATCH_SIZE", t.batch_size, src),
        learning_rate=get_env_float("TGM_LEARNING_RATE", t.learning_rate, src),
        beta1=get_env_float("TGM_BETA1", t.beta1, src),
        decay_start_epoch=get_env_int("TGM_DECAY_START_EPOCH", t.decay_start_epoch, src),
        train_resolution=get_env_int("TGM_TRAIN_RESOLUTION", t.train_resolution, src),
        output_resolution=get_env_int("TGM_OUTPUT_RESOLUTION", t.output_resolution, src),
        depth=get_env_int("TGM_DEPTH", t.depth, src),
        base_width=get_env_int("TGM_BASE_WIDTH", t.base_width, src),
        disc_width=get_env_int("TGM_DISC_WIDTH", t.disc_width, src),
        disc_layers=get_env_int("TGM_DISC_LAYERS", t.disc_layers, src),
        norm=get_env_value("TGM_NORM", t.norm, src),
        max_steps=get_env_optional_int("TGM_MAX_STEPS", t.max_steps, src),
        seed=seed,
        device=device,
    )

    sgm = SgmConfig(
        margin=get_env_float("SGM_MARGIN", s.margin, src),
        lambda2=get_env_float("SGM_LAMBDA2", s.lambda2, src),
        dann_mode=DannMode.parse(get_env_value("SGM_DANN_MODE", s.dann_mode.value, src)),
        c_target=get_env_int("SGM_C_TARGET", s.c_target, src),
        num_clusters=get_env_int("SGM_NUM_CLUSTERS", s.num_clusters, src),
        c_final=get_env_int("SGM_C_FINAL", s.c_final, src),
        epochs=get_env_int("SGM_EPOCHS", s.epochs, src),
        queries_per_epoch=get_env_int("SGM_QUERIES_PER_EPOCH", s.queries_per_epoch, src),
        cache_size=get_env_int("SGM_CACHE_SIZE", s.cache_size, src),
        batch_queries=get_env_int("SGM_BATCH_QUERIES", s.batch_queries, src),
        negatives_per_query=get_env_int(
            "SGM_NEGATIVES_PER_QUERY", s.negatives_per_query, src
        ),
        learning_rate=get_env_float("SGM_LEARNING_RATE", s.learning_rate, src),
        pos_radius_m=get_env_float("SGM_POS_RADIUS_M", s.pos_radius_m, src),
        neg_radius_m=get_env_float("SGM_NEG_RADIUS_M", s.neg_radius_m, src),
        use_generated=get_env_bool("SGM_USE_GENERATED", s.use_generated, src),
        generated_mix_ratio=get_env_float(
            "SGM_GENERATED_MIX_RATIO", s.generated_mix_ratio, src
        ),
        backbone=get_env_value("SGM_BACKBONE", s.backbone, src),
        pretrained=get_env_bool("SGM_PRETRAINED", s.pretrained, src),
        cluster_init=get_env_value("SGM_CLUSTER_INIT", s.cluster_init, src),
        domain_hidden=get_env_int("SGM_DOMAIN_HIDDEN", s.domain_hidden, src),
        infer_batch_size=get_env_int("SGM_INFER_BATCH_SIZE", s.infer_batch_size, src),
        val_prior_radius_m=get_env_float(
            "SGM_VAL_PRIOR_RADIUS_M", s.val_prior_radius_m, src
        ),
        seed=seed,
        device=device,
    )

    ce = CEConfig(
        factor=get_env_float("CE_FACTOR", 3.0, src),
        enabled=get_env_bool("CE_ENABLED", False, src),
    )

    world = WorldSpec(
        seed=get_env_int("SYNTH_SEED", w.seed, src),
        size_px=(
            get_env_int("SYNTH_HEIGHT", w.size_px[0], src),
            get_env_int("SYNTH_WIDTH", w.size_px[1], src),
        ),
        meters_per_pixel=get_env_float("SYNTH_METERS_PER_PIXEL", w.meters_per_pixel, src),
        terrain_mix={
            str(k): float(v)
            for k, v in get_env_json("SYNTH_TERRAIN_MIX", w.terrain_mix, src).items()
        },
        thermal_noise_std=get_env_float("SYNTH_NOISE_STD", w.thermal_noise_std, src),
        thermal_contrast=get_env_float("SYNTH_CONTRAST", w.thermal_contrast, src),
    )

    split_json = get_env_json("SPLIT_REGIONS", None, src)
    split_regions = defaults.split_regions
    if split_json is not None:
        if not isinstance(split_json, dict):
            raise ConfigError("SPLIT_REGIONS must be a JSON object of split -> rects")
        split_regions = {
            name: _parse_rects(rects, "SPLIT_REGIONS") for name, rects in split_json.items()
        }

    config = ExperimentConfig(
        paths=paths,
        tgm=tgm,
        sgm=sgm,
        ce=ce,
        world=world,
        split_regions=split_regions,
        split_fractions=get_env_number_list(
            "SPLIT_FRACTIONS",
            ",".join(f"{f:g}" for f in defaults.split_fractions),
            float,
            src,
        ),
        generated_regions=_parse_rects(
            get_env_json("GENERATED_REGIONS", [], src), "GENERATED_REGIONS"
        ),
        crop_size=get_env_int("CROP_SIZE", defaults.crop_size, src),
        stride=get_env_int("STRIDE", defaults.stride, src),
        max_invalid_fraction=get_env_float(
            "MAX_INVALID_FRACTION", defaults.max_invalid_fraction, src
        ),
        eval_split=get_env_value("EVAL_SPLIT", defaults.eval_split, src),
        recall_ns=get_env_number_list("EVAL_RECALL_NS", "1,5", int, src),
        prior_radius_m=get_env_float("EVAL_PRIOR_RADIUS_M", defaults.prior_radius_m, src),
        success_radius_m=get_env_float(
            "EVAL_SUCCESS_RADIUS_M", defaults.success_radius_m, src
        ),
        histogram_edges=get_env_number_list(
            "HISTOGRAM_EDGES",
            ",".join(f"{e:g}" for e in defaults.histogram_edges),
            float,
            src,
        ),
        seed=seed,
        log_level=get_env_value("LOG_LEVEL", defaults.log_level, src),
    )
    # CE is one global switch shared by TGM targets, SGM queries and evaluation
    config.apply_ablation(ce=ce.enabled)
    return config
