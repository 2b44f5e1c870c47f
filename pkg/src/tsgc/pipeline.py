"""Two-stage three-label segmentation.

Stage 1 cuts healthy against tumor over the liver mask.  Stage 2 rebuilds the
graph on the stage-1 tumor pixels only and cuts vessel against tumor.  Each
stage is an exact minimiser of the two-label energy on its node set.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import SegmentationError
from .features import FeatureMode, TimeSeries, compute_features, smooth_volume
from .graphbuild import (
    FORWARD_OFFSETS,
    BoundaryTerm,
    Proposed,
    boundary_weights,
    build_graph,
    region_mean,
)
from .maxflow import FlowNetwork, max_flow
from .volume_io import Label, TimeSeriesVolume


@dataclass(frozen=True, eq=False)
class SegmentationRequest:
    volume: TimeSeriesVolume
    liver_mask: np.ndarray
    roi_healthy: np.ndarray
    roi_tumor: np.ndarray
    roi_vessel: np.ndarray
    mode: FeatureMode = TimeSeries()
    boundary: BoundaryTerm = Proposed()
    full_image: bool = False
    smoothing: int | None = None
    lam: float = 1.0
    normalized: bool = True

    def validate(self) -> None:
        shape = self.volume.shape
        masks = {
            "liver mask": self.liver_mask,
            "healthy ROI": self.roi_healthy,
            "tumor ROI": self.roi_tumor,
            "vessel ROI": self.roi_vessel,
        }
        for name, mask in masks.items():
            if np.shape(mask) != shape:
                raise SegmentationError(f"{name} has shape {np.shape(mask)}, volume is {shape}")
        liver = np.asarray(self.liver_mask, dtype=bool)
        if not liver.any():
            raise SegmentationError("liver mask is empty")
        for name, mask in list(masks.items())[1:]:
            mask = np.asarray(mask, dtype=bool)
            if not mask.any():
                raise SegmentationError(f"{name} is empty")
            if (mask & ~liver).any():
                raise SegmentationError(f"{name} extends outside the liver mask")


@dataclass(frozen=True)
class EnergyReport:
    data_term: float
    perimeter_term: float
    lam: float

    @property
    def total(self) -> float:
        return self.data_term + self.lam * self.perimeter_term

    def as_dict(self) -> dict:
        return {
            "data_term": self.data_term,
            "perimeter_term": self.perimeter_term,
            "lambda": self.lam,
            "total": self.total,
        }


@dataclass(frozen=True, eq=False)
class StageOutcome:
    """One binary cut: ``region`` are its nodes, ``source_side`` marks label 1."""

    region: np.ndarray
    source_side: np.ndarray
    flow_value: float
    energy: EnergyReport
    elapsed_seconds: float

    @property
    def labels(self) -> np.ndarray:
        """``(H, W)`` int8 map: 1 / 2 on the region, 0 elsewhere."""
        out = np.zeros(self.region.shape, dtype=np.int8)
        out[self.region] = np.where(self.source_side, 1, 2)
        return out


@dataclass(frozen=True, eq=False)
class SegmentationResult:
    labels: np.ndarray
    stage1: StageOutcome
    stage2: StageOutcome | None
    timings: dict = field(default_factory=dict)

    @property
    def energy_stage1(self) -> EnergyReport:
        return self.stage1.energy

    @property
    def energy_stage2(self) -> EnergyReport | None:
        return self.stage2.energy if self.stage2 is not None else None


def energy(
    labels: np.ndarray,
    features: np.ndarray,
    mu1,
    mu2,
    region: np.ndarray | None = None,
    boundary: BoundaryTerm = Proposed(),
    lam: float = 1.0,
    normalized: bool = True,
) -> EnergyReport:
    """Evaluate the two-label energy of ``labels`` (values 1/2) on ``region``.

    ``region`` defaults to the pixels where ``labels`` is nonzero.  With
    ``normalized`` the data distances are divided by the largest distance of
    any region pixel to either mean and boundary weights by the largest
    weight over all region neighbour pairs, matching the solver's graph.
    """
    labels = np.asarray(labels)
    if labels.shape != features.shape[:2]:
        raise SegmentationError(f"labels shape {labels.shape} does not match features {features.shape[:2]}")
    region = labels != 0 if region is None else np.asarray(region, dtype=bool)
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    if mu1.shape != (features.shape[2],) or mu2.shape != mu1.shape:
        raise SegmentationError("mean vectors must match the feature dimension")
    if not np.isin(labels[region], (1, 2)).all():
        raise SegmentationError("labels on the region must be 1 or 2")

    feats = features[region]
    lab = labels[region]
    d1 = np.linalg.norm(feats - mu1, axis=1)
    d2 = np.linalg.norm(feats - mu2, axis=1)
    data = np.where(lab == 1, d1, d2).sum()
    if normalized:
        scale = max(d1.max(initial=0.0), d2.max(initial=0.0))
        if scale > 0:
            data /= scale

    h, w = region.shape
    cut_sum = 0.0
    wmax = 0.0
    for dr, dc in FORWARD_OFFSETS:
        rows = slice(0, h - dr)
        cols = slice(max(0, -dc), min(w, w - dc))
        rows2 = slice(dr, h)
        cols2 = slice(max(0, -dc) + dc, min(w, w - dc) + dc)
        both = region[rows, cols] & region[rows2, cols2]
        if not both.any():
            continue
        fa = features[rows, cols][both]
        fb = features[rows2, cols2][both]
        wts = boundary_weights(
            np.linalg.norm(fa - fb, axis=1), np.full(len(fa), math.hypot(dr, dc)), boundary
        )
        wmax = max(wmax, wts.max())
        differ = labels[rows, cols][both] != labels[rows2, cols2][both]
        cut_sum += wts[differ].sum()
    if normalized and wmax > 0:
        cut_sum /= wmax
    return EnergyReport(float(data), float(cut_sum), lam)


def _cut(features, mu1, mu2, region, req: SegmentationRequest) -> StageOutcome:
    t0 = time.perf_counter()
    graph = build_graph(features, mu1, mu2, region, req.boundary, req.lam, req.normalized)
    cut = max_flow(FlowNetwork.from_graph(graph))
    elapsed = time.perf_counter() - t0
    labels = np.zeros(region.shape, dtype=np.int8)
    labels[region] = np.where(cut.side, 1, 2)
    report = energy(labels, features, mu1, mu2, region, req.boundary, req.lam, req.normalized)
    return StageOutcome(region, cut.side.copy(), cut.flow_value, report, elapsed)


def segment(req: SegmentationRequest) -> SegmentationResult:
    req.validate()
    liver = np.asarray(req.liver_mask, dtype=bool)
    timings = {}

    t0 = time.perf_counter()
    vol = req.volume
    if req.smoothing is not None:
        vol = smooth_volume(vol, req.smoothing)
    features = compute_features(vol, req.mode)
    mu_healthy = region_mean(features, req.roi_healthy)
    mu_tumor = region_mean(features, req.roi_tumor)
    mu_vessel = region_mean(features, req.roi_vessel)
    timings["features"] = time.perf_counter() - t0

    stage1_region = np.ones_like(liver) if req.full_image else liver
    stage1 = _cut(features, mu_healthy, mu_tumor, stage1_region, req)
    timings["stage1"] = stage1.elapsed_seconds
    tumor1 = stage1.labels == 2

    stage2 = None
    vessel = np.zeros_like(liver)
    if tumor1.any():
        stage2 = _cut(features, mu_vessel, mu_tumor, tumor1, req)
        timings["stage2"] = stage2.elapsed_seconds
        vessel = stage2.labels == 1

    labels = np.full(liver.shape, Label.BACKGROUND, dtype=np.uint8)
    labels[stage1.labels == 1] = Label.HEALTHY
    labels[tumor1] = Label.TUMOR
    labels[vessel] = Label.VESSEL
    labels[~liver] = Label.BACKGROUND
    timings["total"] = sum(timings.values())
    return SegmentationResult(labels, stage1, stage2, timings)
