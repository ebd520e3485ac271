"""Morph-based multi-stage indexing for biometric identification galleries.

The package builds a cascade of fused (morphed) samples over an enrolment
gallery and answers identification queries by successive shortlist
filtering, trading a small hit-rate risk for a large cut in the number of
template comparisons per transaction.
"""

from .core import (
    EuclideanComparator,
    Gallery,
    MeanFuser,
    SyntheticModelParams,
    WeightedMeanFuser,
    generate_gallery,
)
from .errors import (
    ConfigError,
    DegenerateFusionError,
    DimensionMismatchError,
    GalleryFormatError,
    IndexFormatError,
    InfeasibleAssignmentError,
    MorphIdxError,
)
from .index import build_index, load_index, save_index, validate_index
from .io import load_samples, save_samples
from .pairing import RandomPairing, SimilarityPairing, SoftBiometricPairing, pair_subjects
from .retrieval import (
    SearchConfig,
    search_exhaustive,
    search_multi_stage,
    search_two_stage,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DegenerateFusionError",
    "DimensionMismatchError",
    "EuclideanComparator",
    "Gallery",
    "GalleryFormatError",
    "IndexFormatError",
    "InfeasibleAssignmentError",
    "MeanFuser",
    "MorphIdxError",
    "RandomPairing",
    "SearchConfig",
    "SimilarityPairing",
    "SoftBiometricPairing",
    "SyntheticModelParams",
    "WeightedMeanFuser",
    "build_index",
    "generate_gallery",
    "load_index",
    "load_samples",
    "pair_subjects",
    "save_index",
    "save_samples",
    "search_exhaustive",
    "search_multi_stage",
    "search_two_stage",
    "validate_index",
    "__version__",
]
