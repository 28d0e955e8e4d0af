"""
Exception hierarchy for thermal geo-localization
"""

from typing import Iterable, Optional, Tuple


class GeoLocError(Exception):
    """Base class for all errors raised by thermal_geoloc"""


class ConfigError(GeoLocError):
    """Invalid or inconsistent configuration value"""


class InputError(GeoLocError, ValueError):
    """Invalid input data (shapes, ranges, non-finite values)"""


class TilingError(GeoLocError):
    """Map cannot be tiled with the requested crop size"""


class PairingMismatchError(GeoLocError):
    """Satellite and thermal tile sets do not line up"""

    def __init__(self, message: str, offset: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.offset = offset


class UnassignedRegionError(GeoLocError):
    """Some pairs fall outside every split region"""

    def __init__(self, tile_ids: Iterable[int]):
        self.tile_ids = sorted(tile_ids)
        preview = ", ".join(str(i) for i in self.tile_ids[:20])
        more = f" (+{len(self.tile_ids) - 20} more)" if len(self.tile_ids) > 20 else ""
        super().__init__(f"Pairs outside every split region: {preview}{more}")


class EmptyDatasetError(GeoLocError):
    """An operation received no data to work on"""


class TrainingDivergedError(GeoLocError):
    """A training loss became non-finite"""

    def __init__(self, step: int, loss_name: str, value: float):
        super().__init__(f"Non-finite {loss_name} ({value}) at step {step}")
        self.step = step
        self.loss_name = loss_name


class CheckpointError(GeoLocError):
    """Checkpoint missing, unreadable or of the wrong kind"""


class IndexFormatError(GeoLocError):
    """Descriptor index file is malformed"""


class UnsupportedVersionError(IndexFormatError):
    """Descriptor index file has an unknown format version"""


class TruncatedIndexError(IndexFormatError):
    """Descriptor index file is shorter than its header announces"""


class ChecksumError(IndexFormatError):
    """Descriptor index payload does not match its CRC32"""


class FingerprintMismatchError(GeoLocError):
    """Artifact was produced by a different model or config"""


class StageError(GeoLocError):
    """A pipeline stage failed"""

    def __init__(self, stage: str, exit_code: int, message: str):
        super().__init__(f"Stage '{stage}' failed: {message}")
        self.stage = stage
        self.exit_code = exit_code
