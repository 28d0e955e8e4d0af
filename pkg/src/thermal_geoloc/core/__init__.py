"""
Pipeline orchestration
"""

from .pipeline import STAGE_EXIT_CODES, GeoLocalizationPipeline

__all__ = ["GeoLocalizationPipeline", "STAGE_EXIT_CODES"]
