"""
Synthetic satellite/thermal map generation
"""

from .world import generate_world, luminance, terrain_classes, thermal_response

__all__ = ["generate_world", "luminance", "terrain_classes", "thermal_response"]
