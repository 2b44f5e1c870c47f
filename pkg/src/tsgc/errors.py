class TsgcError(Exception):
    """Base class for all package errors."""


class FormatError(TsgcError, ValueError):
    """Malformed, truncated or unsupported file content."""


class SegmentationError(TsgcError, ValueError):
    """Invalid segmentation request (empty ROI, empty mask, bad dimensions)."""


class MetricError(TsgcError, ValueError):
    """Evaluation metric is undefined for the given regions."""


class PhantomError(TsgcError, ValueError):
    """Phantom configuration cannot be realised (shapes overlap or do not fit)."""
