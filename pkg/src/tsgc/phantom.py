"""Synthetic contrast-enhanced liver slices with known ground truth.

Each tissue follows a piecewise-linear time-intensity curve.  The default
curves make healthy liver and tumor coincide in the final frame (both end at
110 HU) while differing strongly during wash-in, so single-frame features
cannot separate them but the full series can.  Vessel enhances early and
sits closer to tumor than to healthy liver over the series.

Noise is drawn from SplitMix64 through the Box-Muller transform so fixtures
are reproducible from the seed alone.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import PhantomError
from .volume_io import (
    Label,
    TimeSeriesVolume,
    load_labels,
    load_mask,
    load_volume,
    render_labels,
    save_labels,
    save_mask,
    save_volume,
)

# (fraction of the series, HU) control points
DEFAULT_KEYPOINTS = {
    "healthy": ((0.0, 60.0), (1.0, 110.0)),
    "tumor": ((0.0, 70.0), (0.25, 140.0), (1.0, 110.0)),
    "vessel": ((0.0, 80.0), (0.2, 200.0), (1.0, 120.0)),
    "background": ((0.0, 0.0), (1.0, 0.0)),
}

TISSUES = ("healthy", "tumor", "vessel", "background")

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def splitmix64(seed: int, n: int) -> np.ndarray:
    """First ``n`` outputs of SplitMix64 seeded with ``seed`` (mod 2**64)."""
    state = np.uint64(seed % (1 << 64))
    with np.errstate(over="ignore"):
        z = state + np.arange(1, n + 1, dtype=np.uint64) * _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def standard_normal(seed: int, n: int) -> np.ndarray:
    """``n`` N(0, 1) deviates; pairs of uniforms in (0, 1] feed Box-Muller."""
    pairs = (n + 1) // 2
    u = ((splitmix64(seed, 2 * pairs) >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    theta = 2.0 * math.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(theta)
    out[1::2] = radius * np.sin(theta)
    return out[:n]


def curve_from_keypoints(keypoints, timepoints: int) -> np.ndarray:
    xs, ys = zip(*keypoints)
    return np.interp(np.linspace(0.0, 1.0, timepoints), xs, ys)


@dataclass(frozen=True)
class Geometry:
    """Shape layout as fractions of the image size.

    Row fractions scale with height, column fractions with width and radii
    with ``min(height, width)``.
    """

    liver_center: tuple[float, float] = (0.5, 0.5)
    liver_axes: tuple[float, float] = (0.40, 0.44)
    tumors: tuple[tuple[float, float, float], ...] = ((0.40, 0.58, 0.14),)
    vessel_row: float = 0.70
    vessel_width: float = 0.05
    healthy_roi: tuple[float, float, float] = (0.5, 0.25, 0.06)
    tumor_roi_scale: float = 0.4


@dataclass(frozen=True)
class PhantomConfig:
    height: int = 64
    width: int = 64
    timepoints: int = 59
    seed: int = 0
    noise_sigma: float = 0.0
    curves: dict | None = None
    geometry: Geometry = field(default_factory=Geometry)

    def tissue_curves(self) -> dict[str, np.ndarray]:
        if self.curves is None:
            return {k: curve_from_keypoints(v, self.timepoints) for k, v in DEFAULT_KEYPOINTS.items()}
        curves = {}
        for tissue in TISSUES:
            c = np.asarray(self.curves[tissue], dtype=np.float64)
            if c.shape != (self.timepoints,):
                raise PhantomError(f"{tissue} curve has {c.size} values, expected {self.timepoints}")
            curves[tissue] = c
        return curves


@dataclass(frozen=True, eq=False)
class PhantomCase:
    volume: TimeSeriesVolume
    truth: np.ndarray
    liver_mask: np.ndarray
    roi_healthy: np.ndarray
    roi_tumor: np.ndarray
    roi_vessel: np.ndarray

    def save(self, directory, config: PhantomConfig | None = None) -> None:
        os.makedirs(directory, exist_ok=True)
        j = lambda name: os.path.join(directory, name)  # noqa: E731
        save_volume(self.volume, j("volume.tsv"))
        save_mask(self.liver_mask, j("liver_mask.pgm"))
        save_mask(self.roi_healthy, j("roi_healthy.pgm"))
        save_mask(self.roi_tumor, j("roi_tumor.pgm"))
        save_mask(self.roi_vessel, j("roi_vessel.pgm"))
        save_mask(self.truth == Label.TUMOR, j("tumor_truth.pgm"))
        save_labels(self.truth, j("truth.pgm"))
        render_labels(self.truth, j("truth.ppm"))
        if config is not None:
            with open(j("phantom.json"), "w") as fh:
                json.dump(asdict(config), fh, indent=2, sort_keys=True)
                fh.write("\n")

    @classmethod
    def load(cls, directory) -> "PhantomCase":
        j = lambda name: os.path.join(directory, name)  # noqa: E731
        return cls(
            volume=load_volume(j("volume.tsv")),
            truth=load_labels(j("truth.pgm")),
            liver_mask=load_mask(j("liver_mask.pgm")),
            roi_healthy=load_mask(j("roi_healthy.pgm")),
            roi_tumor=load_mask(j("roi_tumor.pgm")),
            roi_vessel=load_mask(j("roi_vessel.pgm")),
        )


def _disc(shape, center, radius):
    rr, cc = np.indices(shape)
    return (rr - center[0]) ** 2 + (cc - center[1]) ** 2 <= radius ** 2


def _layout(cfg: PhantomConfig):
    h, w = cfg.height, cfg.width
    g = cfg.geometry
    side = min(h, w)
    rr, cc = np.indices((h, w))

    cr, ccol = g.liver_center[0] * (h - 1), g.liver_center[1] * (w - 1)
    ar, ac = g.liver_axes[0] * h, g.liver_axes[1] * w
    if ar <= 0 or ac <= 0:
        raise PhantomError("liver axes must be positive")
    if cr - ar < -0.5 or cr + ar > h - 0.5 or ccol - ac < -0.5 or ccol + ac > w - 0.5:
        raise PhantomError("liver ellipse does not fit inside the image")
    liver = ((rr - cr) / ar) ** 2 + ((cc - ccol) / ac) ** 2 <= 1.0

    tumor = np.zeros((h, w), dtype=bool)
    tumor_rois = np.zeros((h, w), dtype=bool)
    for fr, fc, frad in g.tumors:
        center = (fr * (h - 1), fc * (w - 1))
        disc = _disc((h, w), center, frad * side)
        if not disc.any():
            raise PhantomError("tumor disc is empty")
        if (disc & ~liver).any():
            raise PhantomError("tumor disc extends outside the liver")
        if (disc & tumor).any():
            raise PhantomError("tumor discs overlap")
        tumor |= disc
        tumor_rois |= _disc((h, w), center, g.tumor_roi_scale * frad * side)

    width = max(1, round(g.vessel_width * h))
    top = round(g.vessel_row * (h - 1)) - width // 2
    band = np.zeros((h, w), dtype=bool)
    band[max(top, 0):max(top + width, 0)] = True
    vessel = band & liver
    if not vessel.any():
        raise PhantomError("vessel strip misses the liver")
    if (vessel & tumor).any():
        raise PhantomError("vessel strip overlaps a tumor")
    vessel_roi = _disc((h, w), (top + (width - 1) / 2, round(ccol)), (width - 1) / 2) & vessel

    fr, fc, frad = g.healthy_roi
    healthy = liver & ~tumor & ~vessel
    healthy_roi = _disc((h, w), (fr * (h - 1), fc * (w - 1)), frad * side)

    for name, roi, region in (
        ("healthy", healthy_roi, healthy),
        ("tumor", tumor_rois, tumor),
        ("vessel", vessel_roi, vessel),
    ):
        if not roi.any():
            raise PhantomError(f"{name} ROI is empty")
        if (roi & ~region).any():
            raise PhantomError(f"{name} ROI leaves its tissue region")
        if np.array_equal(roi, region):
            raise PhantomError(f"{name} ROI covers its whole region")

    truth = np.full((h, w), Label.BACKGROUND, dtype=np.uint8)
    truth[healthy] = Label.HEALTHY
    truth[tumor] = Label.TUMOR
    truth[vessel] = Label.VESSEL
    return truth, liver, healthy_roi, tumor_rois, vessel_roi


def generate(cfg: PhantomConfig) -> PhantomCase:
    if min(cfg.height, cfg.width, cfg.timepoints) < 1:
        raise PhantomError("image size and timepoints must be >= 1")
    if not cfg.noise_sigma >= 0:
        raise PhantomError("noise_sigma must be non-negative")
    truth, liver, roi_h, roi_t, roi_v = _layout(cfg)
    curves = cfg.tissue_curves()
    table = np.stack([curves["background"], curves["healthy"], curves["tumor"], curves["vessel"]])
    data = table[truth].transpose(2, 0, 1)
    if cfg.noise_sigma > 0:
        data = data + cfg.noise_sigma * standard_normal(cfg.seed, data.size).reshape(data.shape)
    return PhantomCase(
        volume=TimeSeriesVolume(data.astype(np.float32)),
        truth=truth,
        liver_mask=liver,
        roi_healthy=roi_h,
        roi_tumor=roi_t,
        roi_vessel=roi_v,
    )
