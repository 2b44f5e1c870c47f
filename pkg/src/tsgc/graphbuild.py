"""Pixel graph construction for the two-label energy

    F(L) = sum_i ||I_i - mu_{L_i}|| + lam * sum_{i~j, L_i != L_j} B(I_i, I_j)

over 8-connected pixels of a region.  Terminal (t-link) weights carry the
data term, n-link weights carry the boundary term, and both are normalised
by their maxima so that ``lam = 1`` balances them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Union

import numpy as np

from . import _accel
from ._accel import jit, prange
from .errors import SegmentationError

# forward half of the 8-neighbourhood; each undirected pair is visited once
FORWARD_OFFSETS = ((0, 1), (1, -1), (1, 0), (1, 1))


@dataclass(frozen=True)
class Proposed:
    """``min(1 / ||I_i - I_j||, 1)``; identical neighbours get the cap, 1."""

    def __str__(self):
        return "proposed"


@dataclass(frozen=True)
class Gaussian:
    """``exp(-||I_i - I_j||^2 / (2 sigma^2)) / dist(i, j)``."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Gaussian sigma must be positive")

    def __str__(self):
        return f"gaussian:{self.sigma:g}"


BoundaryTerm = Union[Proposed, Gaussian]


def parse_boundary(text: str) -> BoundaryTerm:
    if text == "proposed":
        return Proposed()
    if text.startswith("gaussian:"):
        try:
            sigma = float(text.split(":", 1)[1])
        except ValueError:
            raise ValueError(f"bad gaussian sigma in {text!r}") from None
        return Gaussian(sigma)
    raise ValueError(f"unknown boundary term {text!r}; use 'proposed' or 'gaussian:SIGMA'")


@dataclass(frozen=True, eq=False)
class PixelGraph:
    """Region-restricted pixel graph.

    ``nodes`` are flat (row-major) pixel indices in ascending order.
    ``terminal[:, 0]`` is the capacity to the source (label 1 side),
    ``terminal[:, 1]`` the capacity to the sink.  ``edges`` holds
    ``(u, v)`` node positions with ``u < v``; ``weights`` the matching
    undirected capacities.
    """

    shape: tuple[int, int]
    nodes: np.ndarray
    terminal: np.ndarray
    edges: np.ndarray
    weights: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def region(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask.flat[self.nodes] = True
        return mask


def region_mean(features: np.ndarray, roi: np.ndarray) -> np.ndarray:
    roi = np.asarray(roi, dtype=bool)
    if roi.shape != features.shape[:2]:
        raise SegmentationError(f"ROI shape {roi.shape} does not match features {features.shape[:2]}")
    if not roi.any():
        raise SegmentationError("ROI is empty; its mean is undefined")
    return features[roi].mean(axis=0)


@jit(parallel=True)
def _distances_to_kernel(feats, mu):
    n, d = feats.shape
    out = np.empty(n)
    for i in prange(n):
        acc = 0.0
        for k in range(d):
            diff = feats[i, k] - mu[k]
            acc += diff * diff
        out[i] = math.sqrt(acc)
    return out


@jit(parallel=True)
def _pair_distances_kernel(feats, u, v):
    m = u.shape[0]
    d = feats.shape[1]
    out = np.empty(m)
    for e in prange(m):
        a = u[e]
        b = v[e]
        acc = 0.0
        for k in range(d):
            diff = feats[a, k] - feats[b, k]
            acc += diff * diff
        out[e] = math.sqrt(acc)
    return out


_CHUNK = 1 << 16


def _pair_distances_numpy(feats, u, v):
    out = np.empty(len(u))
    for s in range(0, len(u), _CHUNK):
        diff = feats[u[s:s + _CHUNK]] - feats[v[s:s + _CHUNK]]
        out[s:s + _CHUNK] = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return out


def _distances_to_numpy(feats, mu):
    diff = feats - mu
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def distances_to(feats: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Euclidean distance of every row of ``feats`` (N x D) to ``mu``."""
    feats = np.ascontiguousarray(feats, dtype=np.float64)
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    if _accel.HAS_NUMBA:
        return _distances_to_kernel(feats, mu)
    return _distances_to_numpy(feats, mu)


def pair_distances(feats: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    feats = np.ascontiguousarray(feats, dtype=np.float64)
    u = np.ascontiguousarray(u, dtype=np.int64)
    v = np.ascontiguousarray(v, dtype=np.int64)
    if _accel.HAS_NUMBA:
        return _pair_distances_kernel(feats, u, v)
    return _pair_distances_numpy(feats, u, v)


def _node_features(features: np.ndarray, nodes: np.ndarray) -> np.ndarray:
    return features.reshape(-1, features.shape[2])[nodes]


def _check_means(features, *mus):
    for mu in mus:
        if np.shape(mu) != (features.shape[2],):
            raise SegmentationError(
                f"mean vector has shape {np.shape(mu)}, features have dimension {features.shape[2]}"
            )


def terminal_weights(features: np.ndarray, mu1, mu2, nodes: np.ndarray) -> np.ndarray:
    """``(N, 2)`` capacities ``[to_source, to_sink] = [||I - mu2||, ||I - mu1||]``.

    A node left on the source side (label 1) severs its sink link and so pays
    its distance to ``mu1``; the cut cost is the data term of the labelling.
    """
    _check_means(features, mu1, mu2)
    feats = _node_features(features, nodes)
    return np.column_stack([distances_to(feats, mu2), distances_to(feats, mu1)])


def neighbour_pairs(region: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """8-adjacent in-region pairs as node positions ``(u, v)`` with ``u < v``.

    Also returns each pair's pixel distance (1 or sqrt 2). Pairs are sorted
    by ``(u, v)``.
    """
    h, w = region.shape
    pos = np.full(region.shape, -1, dtype=np.int64)
    pos[region] = np.arange(np.count_nonzero(region))
    us, vs, ds = [], [], []
    for dr, dc in FORWARD_OFFSETS:
        r0, r1 = 0, h - dr
        c0, c1 = max(0, -dc), min(w, w - dc)
        a = pos[r0:r1, c0:c1]
        b = pos[r0 + dr:r1 + dr, c0 + dc:c1 + dc]
        keep = (a >= 0) & (b >= 0)
        us.append(a[keep])
        vs.append(b[keep])
        ds.append(np.full(np.count_nonzero(keep), math.hypot(dr, dc)))
    u = np.concatenate(us)
    v = np.concatenate(vs)
    d = np.concatenate(ds)
    order = np.lexsort((v, u))
    return u[order], v[order], d[order]


def boundary_weights(distances: np.ndarray, pixel_dist: np.ndarray, term: BoundaryTerm) -> np.ndarray:
    if isinstance(term, Proposed):
        out = np.ones_like(distances)
        far = distances > 1.0
        out[far] = 1.0 / distances[far]
        return out
    if isinstance(term, Gaussian):
        return np.exp(-(distances ** 2) / (2.0 * term.sigma ** 2)) / pixel_dist
    raise TypeError(f"not a boundary term: {term!r}")


def edge_weights(features: np.ndarray, region: np.ndarray, term: BoundaryTerm = Proposed()):
    """Undirected n-links of ``region`` as ``(edges, weights)``."""
    region = np.asarray(region, dtype=bool)
    nodes = np.flatnonzero(region)
    u, v, pix = neighbour_pairs(region)
    dist = pair_distances(_node_features(features, nodes), u, v)
    return np.column_stack([u, v]), boundary_weights(dist, pix, term)


def normalize(graph: PixelGraph) -> PixelGraph:
    """Divide terminal weights by their global max and edge weights by theirs."""
    terminal = graph.terminal
    tmax = terminal.max(initial=0.0)
    if tmax > 0:
        terminal = terminal / tmax
    weights = graph.weights
    wmax = weights.max(initial=0.0)
    if wmax > 0:
        weights = weights / wmax
    return replace(graph, terminal=terminal, weights=weights)


def build_graph(
    features: np.ndarray,
    mu1,
    mu2,
    region: np.ndarray,
    term: BoundaryTerm = Proposed(),
    lam: float = 1.0,
    normalized: bool = True,
) -> PixelGraph:
    """Graph over ``region`` whose minimum cut minimises the two-label energy.

    With ``normalized`` the data and boundary weights are each scaled to a
    maximum of 1 before edge weights are multiplied by ``lam``.
    """
    region = np.asarray(region, dtype=bool)
    if region.shape != features.shape[:2]:
        raise SegmentationError(f"region shape {region.shape} does not match features {features.shape[:2]}")
    if not region.any():
        raise SegmentationError("graph region is empty")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    nodes = np.flatnonzero(region)
    edges, weights = edge_weights(features, region, term)
    graph = PixelGraph(
        shape=region.shape,
        nodes=nodes,
        terminal=terminal_weights(features, mu1, mu2, nodes),
        edges=edges,
        weights=weights,
    )
    if normalized:
        graph = normalize(graph)
    if lam != 1.0:
        graph = replace(graph, weights=graph.weights * lam)
    return graph


def write_dimacs(graph: PixelGraph, path) -> None:
    """Dump as a DIMACS max-flow problem: source ``n+1``, sink ``n+2``."""
    n = graph.node_count
    s, t = n + 1, n + 2
    lines = []
    for i, (cs, ct) in enumerate(graph.terminal.tolist(), start=1):
        if cs > 0:
            lines.append(f"a {s} {i} {cs!r}")
        if ct > 0:
            lines.append(f"a {i} {t} {ct!r}")
    for (u, v), wt in zip(graph.edges.tolist(), graph.weights.tolist()):
        lines.append(f"a {u + 1} {v + 1} {wt!r}")
        lines.append(f"a {v + 1} {u + 1} {wt!r}")
    with open(path, "w") as fh:
        fh.write(f"c pixel graph {graph.shape[0]}x{graph.shape[1]}, {n} nodes\n")
        fh.write(f"p max {n + 2} {len(lines)}\n")
        fh.write(f"n {s} s\nn {t} t\n")
        fh.write("\n".join(lines))
        fh.write("\n")
