"""Graph-cut segmentation of contrast-enhanced liver CT using per-pixel time series."""

__version__ = "0.1.0"

from .errors import FormatError, MetricError, PhantomError, SegmentationError, TsgcError
from .features import MedianScalar, Multiscale, TimeSeries, compute_features
from .graphbuild import Gaussian, PixelGraph, Proposed, build_graph, region_mean
from .maxflow import CutResult, FlowNetwork, max_flow
from .metrics import dsc, rvd, voe
from .phantom import PhantomConfig, generate
from .pipeline import EnergyReport, SegmentationRequest, SegmentationResult, energy, segment
from .volume_io import Label, TimeSeriesVolume, load_mask, load_volume, save_mask, save_volume

__all__ = [
    "CutResult", "EnergyReport", "FlowNetwork", "FormatError", "Gaussian", "Label", "MedianScalar",
    "MetricError", "Multiscale", "PhantomConfig", "PhantomError", "PixelGraph", "Proposed",
    "SegmentationError", "SegmentationRequest", "SegmentationResult", "TimeSeries",
    "TimeSeriesVolume", "TsgcError", "build_graph", "compute_features", "dsc", "energy", "generate",
    "load_mask", "load_volume", "max_flow", "region_mean", "rvd", "save_mask", "save_volume",
    "segment", "voe",
]
