"""
Region-based dataset splits
"""

import json
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple, Union

from ..exceptions import ConfigError, UnassignedRegionError
from ..models.tile import DatasetSplit, GeoTile, PairedCrop, Rect

SPLIT_ORDER = ("train", "val", "test")

SplitSpec = Dict[str, List[Rect]]


def point_in_rect(x: float, y: float, rect: Rect) -> bool:
    """Half-open containment: x_min <= x < x_max and y_min <= y < y_max"""
    x_min, y_min, x_max, y_max = rect
    return x_min <= x < x_max and y_min <= y < y_max


def point_in_regions(position: Tuple[float, float], rects: Iterable[Rect]) -> bool:
    return any(point_in_rect(position[0], position[1], r) for r in rects)


def parse_split_spec(data: Mapping[str, Sequence[Sequence[float]]]) -> SplitSpec:
    """Validate a mapping of split name to [x_min, y_min, x_max, y_max] rectangles"""
    spec: SplitSpec = {}
    for name, rects in data.items():
        if name not in SPLIT_ORDER:
            raise ConfigError(f"Unknown split '{name}' (expected train, val or test)")
        parsed = []
        for rect in rects:
            if len(rect) != 4:
                raise ConfigError(f"Split '{name}' rectangle {rect} needs 4 numbers")
            x_min, y_min, x_max, y_max = (float(v) for v in rect)
            if not (x_min < x_max and y_min < y_max):
                raise ConfigError(f"Split '{name}' rectangle {rect} is empty")
            parsed.append((x_min, y_min, x_max, y_max))
        spec[name] = parsed
    return spec


def load_split_spec(path: Union[str, Path]) -> SplitSpec:
    """Read a JSON split spec file"""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read split spec {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Split spec {path} must be a JSON object")
    return parse_split_spec(data)


def strip_split_spec(
    positions: Sequence[Tuple[float, float]], fractions: Sequence[float]
) -> SplitSpec:
    """Cut the x range of tile centres into train, val and test strips

    Strip widths follow ``fractions`` and the outer strips extend to infinity.
    A zero fraction yields no rectangle.
    """
    if not positions:
        raise ConfigError("No tiles to split")
    xs = [p[0] for p in positions]
    low, span = min(xs), max(xs) - min(xs)
    inf = float("inf")

    cuts = [-inf]
    total = 0.0
    for fraction in fractions[:-1]:
        total += fraction
        cuts.append(low + total * span if total < 1.0 - 1e-9 else inf)
    cuts.append(inf)

    spec: SplitSpec = {}
    for name, start, stop in zip(SPLIT_ORDER, cuts[:-1], cuts[1:]):
        spec[name] = [(start, -inf, stop, inf)] if start < stop else []
    logging.info(
        "Split strips along x: "
        + ", ".join(f"{name} from {cut:g} m" for name, cut in zip(SPLIT_ORDER, cuts))
    )
    return spec


def split_by_region(pairs: List[PairedCrop], split_spec: SplitSpec) -> DatasetSplit:
    """Assign each pair to the first split whose region contains its centre"""
    assigned: Dict[str, List[PairedCrop]] = {name: [] for name in SPLIT_ORDER}
    unassigned = []
    for pair in pairs:
        for name in SPLIT_ORDER:
            if point_in_regions(pair.position, split_spec.get(name, [])):
                assigned[name].append(pair)
                break
        else:
            unassigned.append(pair.tile_id)

    if unassigned:
        raise UnassignedRegionError(unassigned)

    split = DatasetSplit(
        train=assigned["train"],
        val=assigned["val"],
        test=assigned["test"],
        split_spec={k: list(v) for k, v in split_spec.items()},
    )
    counts = split.counts
    logging.info(
        f"Split {len(pairs)} pairs into train/val/test ="
        f" {counts['train']}/{counts['val']}/{counts['test']}"
    )
    return split


def select_in_regions(tiles: List[GeoTile], rects: Iterable[Rect]) -> List[GeoTile]:
    """Tiles whose centres fall inside any of the rectangles"""
    rects = list(rects)
    return [t for t in tiles if point_in_regions(t.position, rects)]
