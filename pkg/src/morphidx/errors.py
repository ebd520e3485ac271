"""Exception types shared across the package."""


class MorphIdxError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatchError(MorphIdxError, ValueError):
    """Two sample vectors (or a vector and a gallery) disagree on dimension."""


class DegenerateFusionError(MorphIdxError, ValueError):
    """Fusion parents cancel out; the fused vector has no direction."""


class InfeasibleAssignmentError(MorphIdxError, RuntimeError):
    """No finite-cost derangement exists for the given cost matrix."""


class GalleryFormatError(MorphIdxError, ValueError):
    """A sample file is malformed or inconsistent with its header."""


class IndexFormatError(MorphIdxError, ValueError):
    """An index file is malformed, or stale with respect to its gallery."""


class ConfigError(MorphIdxError, ValueError):
    """An experiment configuration is missing keys or holds invalid values."""


class UndefinedMetricError(MorphIdxError, ValueError):
    """A metric is undefined on the given scores (e.g. zero pooled variance)."""


class InsufficientDataError(MorphIdxError, ValueError):
    """A protocol cannot run because required samples are missing."""
