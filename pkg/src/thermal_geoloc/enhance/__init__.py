"""
Thermal contrast enhancement
"""

from .contrast import apply_ce, contrast_enhance, enhance_pairs

__all__ = ["apply_ce", "contrast_enhance", "enhance_pairs"]
