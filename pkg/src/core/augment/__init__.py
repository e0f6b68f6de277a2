from src.core.augment.composite import mosaic
from src.core.augment.config import AugmentConfig
from src.core.augment.dynamic import apply_dynamic
from src.core.augment.sample import AugmentedSample, Provenance
from src.core.augment.static import static_expand
from src.core.augment.stream import build_training_stream

__all__ = [
    "AugmentConfig",
    "AugmentedSample",
    "Provenance",
    "apply_dynamic",
    "build_training_stream",
    "mosaic",
    "static_expand",
]
