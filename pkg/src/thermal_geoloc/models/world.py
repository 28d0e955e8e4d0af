"""
Synthetic world specification
"""

from dataclasses import dataclass, field
from typing import Dict, Tuple

from ..exceptions import ConfigError

TERRAIN_CLASSES = ("desert", "farm", "road", "building")


def _default_mix() -> Dict[str, float]:
    return {"desert": 0.7, "farm": 0.15, "road": 0.05, "building": 0.1}


@dataclass
class WorldSpec:
    """Parameters of a procedurally generated satellite/thermal map pair"""

    seed: int = 0
    size_px: Tuple[int, int] = (1024, 1024)
    meters_per_pixel: float = 1.0
    terrain_mix: Dict[str, float] = field(default_factory=_default_mix)
    thermal_noise_std: float = 0.01
    thermal_contrast: float = 1.0
    origin: Tuple[float, float] = (0.0, 0.0)

    def validate(self, min_size: int = 1) -> None:
        """Raise ConfigError when the spec cannot produce a usable world"""
        unknown = set(self.terrain_mix) - set(TERRAIN_CLASSES)
        if unknown:
            raise ConfigError(f"Unknown terrain classes: {sorted(unknown)}")
        if any(v < 0 for v in self.terrain_mix.values()):
            raise ConfigError("terrain_mix fractions must be non-negative")
        total = sum(self.terrain_mix.values())
        if abs(total - 1.0) > 1e-9:
            raise ConfigError(f"terrain_mix must sum to 1, got {total}")
        if min(self.size_px) < min_size:
            raise ConfigError(
                f"World size {self.size_px} is smaller than crop size {min_size}"
            )
        if self.meters_per_pixel <= 0:
            raise ConfigError("meters_per_pixel must be positive")
        if self.thermal_noise_std < 0:
            raise ConfigError("thermal_noise_std must be >= 0")
        if not 0.0 < self.thermal_contrast <= 1.0:
            raise ConfigError("thermal_contrast must lie in (0, 1]")

    @property
    def mix_vector(self) -> Tuple[float, ...]:
        """Fractions in TERRAIN_CLASSES order"""
        return tuple(float(self.terrain_mix.get(name, 0.0)) for name in TERRAIN_CLASSES)
