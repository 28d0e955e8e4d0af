"""
Geo-localization module: shared embedding network and its losses

The training loop lives in ``thermal_geoloc.sgm.trainer``; it depends on mining,
retrieval and evalkit, which in turn use this package's embedding helpers.
"""

from .embedding import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    embed,
    embed_images,
    embed_tiles,
    init_clusters,
    load_sgm,
    model_fingerprint,
)
from .losses import dann_loss, sgm_total_loss, triplet_margin_loss
from .networks import (
    DomainClassifier,
    NetVLAD,
    SgmModel,
    build_sgm,
    gradient_reversal,
)

__all__ = [
    "BEST_CHECKPOINT",
    "DomainClassifier",
    "LAST_CHECKPOINT",
    "NetVLAD",
    "SgmModel",
    "build_sgm",
    "dann_loss",
    "embed",
    "embed_images",
    "embed_tiles",
    "gradient_reversal",
    "init_clusters",
    "load_sgm",
    "model_fingerprint",
    "sgm_total_loss",
    "triplet_margin_loss",
]
