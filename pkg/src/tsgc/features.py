"""Per-pixel feature vectors.

A feature field is a float64 array of shape ``(H, W, D)``.  Three modes are
provided: the full intensity time series of each pixel (``D = T``), a
multiscale box-average descriptor of the last frame (``D = max_scale``) and a
3x3 median-filtered last frame (``D = 1``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .volume_io import TimeSeriesVolume


@dataclass(frozen=True)
class TimeSeries:
    name = "timeseries"


@dataclass(frozen=True)
class Multiscale:
    max_scale: int = 10
    name = "multiscale"

    def __post_init__(self):
        if self.max_scale < 1:
            raise ValueError("max_scale must be >= 1")


@dataclass(frozen=True)
class MedianScalar:
    name = "median"


FeatureMode = Union[TimeSeries, Multiscale, MedianScalar]

MODES = {"timeseries": TimeSeries(), "multiscale": Multiscale(), "median": MedianScalar()}


def parse_mode(name: str) -> FeatureMode:
    try:
        return MODES[name]
    except KeyError:
        raise ValueError(f"unknown feature mode {name!r}; choose from {sorted(MODES)}") from None


def time_series_features(vol: TimeSeriesVolume) -> np.ndarray:
    """Stack each pixel's intensities over time into its feature vector."""
    return np.ascontiguousarray(np.moveaxis(vol.data, 0, -1), dtype=np.float64)


def _window_sums(img: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Sum and in-bounds count over the k x k window anchored at offset (k-1)//2."""
    h, w = img.shape
    sat = np.zeros((h + 1, w + 1))
    sat[1:, 1:] = img.cumsum(0).cumsum(1)
    off = (k - 1) // 2
    r0 = np.clip(np.arange(h) - off, 0, h)
    r1 = np.clip(np.arange(h) - off + k, 0, h)
    c0 = np.clip(np.arange(w) - off, 0, w)
    c1 = np.clip(np.arange(w) - off + k, 0, w)
    total = sat[r1][:, c1] - sat[r0][:, c1] - sat[r1][:, c0] + sat[r0][:, c0]
    count = np.outer(r1 - r0, c1 - c0)
    return total, count


def multiscale_features(vol: TimeSeriesVolume, max_scale: int = 10) -> np.ndarray:
    """Box means of the last frame at window sizes 1..max_scale.

    Windows of even size extend one pixel further right/down than left/up.
    Only in-bounds pixels contribute to a mean.
    """
    if max_scale < 1:
        raise ValueError("max_scale must be >= 1")
    img = vol.last_frame.astype(np.float64)
    out = np.empty(img.shape + (max_scale,))
    for k in range(1, max_scale + 1):
        total, count = _window_sums(img, k)
        out[:, :, k - 1] = total / count
    # keep the bounds property exact despite cumulative-sum rounding
    np.clip(out, img.min(), img.max(), out=out)
    out[:, :, 0] = img
    return out


def _replicate_windows(img: np.ndarray, k: int) -> np.ndarray:
    r = k // 2
    return sliding_window_view(np.pad(img, r, mode="edge"), (k, k))


def median_scalar_features(vol: TimeSeriesVolume) -> np.ndarray:
    img = vol.last_frame.astype(np.float64)
    med = np.median(_replicate_windows(img, 3), axis=(-2, -1))
    return med[:, :, None]


def smooth_volume(vol: TimeSeriesVolume, kernel_size: int) -> TimeSeriesVolume:
    """Box-filter every frame with a ``kernel_size`` square kernel (edge padding)."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ValueError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    if kernel_size == 1:
        return vol
    frames = [
        _replicate_windows(frame.astype(np.float64), kernel_size).mean(axis=(-2, -1))
        for frame in vol.data
    ]
    return TimeSeriesVolume(np.stack(frames).astype(np.float32), vol.pixel_spacing_mm)


def compute_features(vol: TimeSeriesVolume, mode: FeatureMode) -> np.ndarray:
    if isinstance(mode, TimeSeries):
        return time_series_features(vol)
    if isinstance(mode, Multiscale):
        return multiscale_features(vol, mode.max_scale)
    if isinstance(mode, MedianScalar):
        return median_scalar_features(vol)
    raise TypeError(f"not a feature mode: {mode!r}")
