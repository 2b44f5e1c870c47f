"""Overlap metrics between a segmented region S and ground truth T."""

from __future__ import annotations

import numpy as np

from .errors import MetricError
from .volume_io import Label


def _counts(segmented, truth) -> tuple[int, int, int]:
    s = np.asarray(segmented, dtype=bool)
    t = np.asarray(truth, dtype=bool)
    if s.shape != t.shape:
        raise MetricError(f"segmented {s.shape} and truth {t.shape} differ in shape")
    return int(s.sum()), int(t.sum()), int((s & t).sum())


def voe(segmented, truth) -> float:
    """Volumetric overlap error in percent, ``(1 - |S&T| / |S|T|) * 100``."""
    s, t, both = _counts(segmented, truth)
    union = s + t - both
    if union == 0:
        raise MetricError("VOE undefined: both regions are empty")
    return (1.0 - both / union) * 100.0


def rvd(segmented, truth) -> float:
    """Relative volume difference in percent; positive means over-segmentation."""
    s, t, _ = _counts(segmented, truth)
    if t == 0:
        raise MetricError("RVD undefined: ground-truth region is empty")
    return (s / t - 1.0) * 100.0


def dsc(segmented, truth) -> float:
    s, t, both = _counts(segmented, truth)
    if s + t == 0:
        raise MetricError("DSC undefined: both regions are empty")
    return 2.0 * both / (s + t)


def tumor_region(labels: np.ndarray, include_vessel: bool = False) -> np.ndarray:
    labels = np.asarray(labels)
    region = labels == Label.TUMOR
    if include_vessel:
        region |= labels == Label.VESSEL
    return region


def evaluate(segmented, truth) -> dict:
    """All three metrics; raises :class:`MetricError` if any is undefined."""
    return {"voe": voe(segmented, truth), "rvd": rvd(segmented, truth), "dsc": dsc(segmented, truth)}
