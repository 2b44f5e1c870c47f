"""Maximum flow / minimum s-t cut.

:func:`max_flow` is a Boykov-Kolmogorov solver: two search trees grow from
the source and the sink, each meeting of the trees yields an augmenting path,
and nodes cut off by saturation are re-adopted or freed.  Active nodes and
orphans are both processed first-in first-out.

Terminal links are folded into a single residual per node
(``source_cap - sink_cap``) with the common part pushed straight through up
front, as in Kolmogorov's reference code.

:func:`augmenting_path_max_flow` is a plain Edmonds-Karp solver kept as an
independent reference for differential testing.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from ._accel import jit
from .errors import FormatError

EPS = 1e-12

_FREE, _S, _T = 0, 1, 2
_NONE, _TERMINAL, _ORPHAN = -1, -2, -3


@dataclass(frozen=True, eq=False)
class FlowNetwork:
    """Capacitated network over ``n`` inner nodes plus a source and a sink.

    Arc ``k`` runs ``tails[k] -> heads[k]`` with capacity ``caps[k]``; its
    paired reverse arc has capacity ``rev_caps[k]`` (equal to ``caps[k]`` for
    an undirected n-link, 0 for a one-way arc).  ``constant`` is capacity on
    direct source-sink arcs, which every cut severs.
    """

    source_caps: np.ndarray
    sink_caps: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    caps: np.ndarray
    rev_caps: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        conv = {
            "source_caps": np.float64,
            "sink_caps": np.float64,
            "tails": np.int64,
            "heads": np.int64,
            "caps": np.float64,
            "rev_caps": np.float64,
        }
        for name, dtype in conv.items():
            arr = np.ascontiguousarray(getattr(self, name), dtype=dtype).reshape(-1)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        n = len(self.source_caps)
        m = len(self.tails)
        if len(self.sink_caps) != n:
            raise ValueError("source_caps and sink_caps differ in length")
        if not len(self.heads) == len(self.caps) == len(self.rev_caps) == m:
            raise ValueError("arc arrays differ in length")
        for name in ("source_caps", "sink_caps", "caps", "rev_caps"):
            arr = getattr(self, name)
            if not np.isfinite(arr).all() or (arr < 0).any():
                raise ValueError(f"{name} must be finite and non-negative")
        if not (np.isfinite(self.constant) and self.constant >= 0):
            raise ValueError("constant must be finite and non-negative")
        if m and (min(self.tails.min(), self.heads.min()) < 0 or max(self.tails.max(), self.heads.max()) >= n):
            raise ValueError("arc endpoint out of range")
        if (self.tails == self.heads).any():
            raise ValueError("self-loops are not allowed")

    @property
    def node_count(self) -> int:
        return len(self.source_caps)

    @property
    def arc_count(self) -> int:
        return len(self.tails)

    @classmethod
    def from_graph(cls, graph) -> "FlowNetwork":
        """Network of a :class:`~tsgc.graphbuild.PixelGraph`; n-links become arc pairs."""
        edges = graph.edges.reshape(-1, 2)
        return cls(
            source_caps=graph.terminal[:, 0],
            sink_caps=graph.terminal[:, 1],
            tails=edges[:, 0],
            heads=edges[:, 1],
            caps=graph.weights,
            rev_caps=graph.weights,
        )

    @classmethod
    def from_arcs(cls, n: int, source: int, sink: int, arcs) -> "FlowNetwork":
        """Build from directed ``(u, v, cap)`` arcs over nodes ``0..n-1``.

        Inner nodes are the non-terminal ids in increasing order.  Arcs into
        the source, out of the sink, and self-loops cannot carry flow and are
        dropped.
        """
        if source == sink or not (0 <= source < n and 0 <= sink < n):
            raise ValueError("source and sink must be distinct nodes in range")
        index = {}
        for node in range(n):
            if node not in (source, sink):
                index[node] = len(index)
        src = np.zeros(len(index))
        snk = np.zeros(len(index))
        tails, heads, caps = [], [], []
        constant = 0.0
        for u, v, cap in arcs:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"arc ({u}, {v}) out of range")
            if cap < 0:
                raise ValueError(f"negative capacity on arc ({u}, {v})")
            if u == v or v == source or u == sink:
                continue
            if u == source and v == sink:
                constant += cap
            elif u == source:
                src[index[v]] += cap
            elif v == sink:
                snk[index[u]] += cap
            else:
                tails.append(index[u])
                heads.append(index[v])
                caps.append(cap)
        return cls(src, snk, tails, heads, caps, np.zeros(len(caps)), constant)


@dataclass(frozen=True, eq=False)
class CutResult:
    """Maximum flow value and the source-minimal minimum cut.

    ``side[i]`` is True when inner node ``i`` is reachable from the source in
    the final residual network.  ``arc_flow[k]`` is the net flow along arc
    ``k`` in its forward direction (negative means it runs backwards).
    """

    flow_value: float
    side: np.ndarray
    arc_flow: np.ndarray
    source_flow: np.ndarray
    sink_flow: np.ndarray


def _csr(n, arc_tail):
    order = np.argsort(arc_tail, kind="stable")
    first = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(arc_tail, minlength=n), out=first[1:])
    return first, order.astype(np.int64)


@jit
def _bk_kernel(tr, head, rcap, first, adj):
    n = tr.shape[0]
    tree = np.zeros(n, np.int8)
    parent = np.full(n, _NONE, np.int64)
    ts = np.zeros(n, np.int64)
    dist = np.zeros(n, np.int64)
    active = np.zeros(n, np.bool_)
    qcap = n + 1
    queue = np.empty(qcap, np.int64)
    orphans = np.empty(qcap, np.int64)
    qh = 0
    qt = 0
    oh = 0
    ot = 0
    flow = 0.0

    for i in range(n):
        if tr[i] > EPS:
            tree[i] = _S
        elif tr[i] < -EPS:
            tree[i] = _T
        else:
            continue
        parent[i] = _TERMINAL
        dist[i] = 1
        active[i] = True
        queue[qt] = i
        qt = (qt + 1) % qcap

    time = 0
    cur = -1
    while True:
        if cur >= 0 and parent[cur] == _NONE:
            cur = -1
        if cur < 0:
            while qh != qt:
                i = queue[qh]
                qh = (qh + 1) % qcap
                active[i] = False
                if parent[i] != _NONE:
                    cur = i
                    break
            if cur < 0:
                break
        i = cur

        # growth
        bridge = -1
        if tree[i] == _S:
            for p in range(first[i], first[i + 1]):
                a = adj[p]
                if rcap[a] > EPS:
                    j = head[a]
                    if tree[j] == _FREE:
                        tree[j] = _S
                        parent[j] = a ^ 1
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not active[j]:
                            active[j] = True
                            queue[qt] = j
                            qt = (qt + 1) % qcap
                    elif tree[j] == _T:
                        bridge = a
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = a ^ 1
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
        else:
            for p in range(first[i], first[i + 1]):
                a = adj[p]
                b = a ^ 1
                if rcap[b] > EPS:
                    j = head[a]
                    if tree[j] == _FREE:
                        tree[j] = _T
                        parent[j] = b
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1
                        if not active[j]:
                            active[j] = True
                            queue[qt] = j
                            qt = (qt + 1) % qcap
                    elif tree[j] == _S:
                        bridge = b
                        break
                    elif ts[j] <= ts[i] and dist[j] > dist[i]:
                        parent[j] = b
                        ts[j] = ts[i]
                        dist[j] = dist[i] + 1

        if bridge < 0:
            cur = -1
            continue

        # augmentation along source root .. bridge .. sink root
        time += 1
        bottleneck = rcap[bridge]
        x = head[bridge ^ 1]
        while parent[x] != _TERMINAL:
            pa = parent[x]
            if rcap[pa ^ 1] < bottleneck:
                bottleneck = rcap[pa ^ 1]
            x = head[pa]
        if tr[x] < bottleneck:
            bottleneck = tr[x]
        y = head[bridge]
        while parent[y] != _TERMINAL:
            pa = parent[y]
            if rcap[pa] < bottleneck:
                bottleneck = rcap[pa]
            y = head[pa]
        if -tr[y] < bottleneck:
            bottleneck = -tr[y]

        rcap[bridge] -= bottleneck
        rcap[bridge ^ 1] += bottleneck
        x = head[bridge ^ 1]
        while True:
            pa = parent[x]
            if pa == _TERMINAL:
                tr[x] -= bottleneck
                if tr[x] <= EPS:
                    parent[x] = _ORPHAN
                    orphans[ot] = x
                    ot = (ot + 1) % qcap
                break
            rcap[pa] += bottleneck
            rcap[pa ^ 1] -= bottleneck
            if rcap[pa ^ 1] <= EPS:
                parent[x] = _ORPHAN
                orphans[ot] = x
                ot = (ot + 1) % qcap
            x = head[pa]
        y = head[bridge]
        while True:
            pa = parent[y]
            if pa == _TERMINAL:
                tr[y] += bottleneck
                if tr[y] >= -EPS:
                    parent[y] = _ORPHAN
                    orphans[ot] = y
                    ot = (ot + 1) % qcap
                break
            rcap[pa ^ 1] += bottleneck
            rcap[pa] -= bottleneck
            if rcap[pa] <= EPS:
                parent[y] = _ORPHAN
                orphans[ot] = y
                ot = (ot + 1) % qcap
            y = head[pa]
        flow += bottleneck

        # adoption
        while oh != ot:
            x = orphans[oh]
            oh = (oh + 1) % qcap
            tx = tree[x]
            best = -1
            dmin = 1 << 62
            for p in range(first[x], first[x + 1]):
                a = adj[p]
                cap = rcap[a ^ 1] if tx == _S else rcap[a]
                if cap <= EPS:
                    continue
                j = head[a]
                if tree[j] != tx or parent[j] == _NONE:
                    continue
                d = 0
                k = j
                valid = False
                while True:
                    if ts[k] == time:
                        d += dist[k]
                        valid = True
                        break
                    pk = parent[k]
                    d += 1
                    if pk == _TERMINAL:
                        ts[k] = time
                        dist[k] = 1
                        valid = True
                        break
                    if pk == _ORPHAN:
                        break
                    k = head[pk]
                if valid:
                    if d < dmin:
                        best = a
                        dmin = d
                    k = j
                    while ts[k] != time:
                        ts[k] = time
                        dist[k] = d
                        d -= 1
                        k = head[parent[k]]
            if best >= 0:
                parent[x] = best
                ts[x] = time
                dist[x] = dmin + 1
                continue
            for p in range(first[x], first[x + 1]):
                a = adj[p]
                j = head[a]
                if tree[j] != tx:
                    continue
                cap = rcap[a ^ 1] if tx == _S else rcap[a]
                if cap > EPS and not active[j]:
                    active[j] = True
                    queue[qt] = j
                    qt = (qt + 1) % qcap
                pj = parent[j]
                if pj >= 0 and head[pj] == x:
                    parent[j] = _ORPHAN
                    orphans[ot] = j
                    ot = (ot + 1) % qcap
            tree[x] = _FREE
            parent[x] = _NONE

    return flow


@jit
def _source_reachable(tr, head, rcap, first, adj):
    n = tr.shape[0]
    seen = np.zeros(n, np.bool_)
    stack = np.empty(n, np.int64)
    top = 0
    for i in range(n):
        if tr[i] > EPS:
            seen[i] = True
            stack[top] = i
            top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        for p in range(first[x], first[x + 1]):
            a = adj[p]
            if rcap[a] > EPS:
                j = head[a]
                if not seen[j]:
                    seen[j] = True
                    stack[top] = j
                    top += 1
    return seen


def max_flow(net: FlowNetwork) -> CutResult:
    n, m = net.node_count, net.arc_count
    common = np.minimum(net.source_caps, net.sink_caps)
    tr0 = net.source_caps - net.sink_caps
    tr = tr0.copy()
    head = np.empty(2 * m, dtype=np.int64)
    head[0::2] = net.heads
    head[1::2] = net.tails
    rcap = np.empty(2 * m)
    rcap[0::2] = net.caps
    rcap[1::2] = net.rev_caps
    # arc 2k leaves tails[k], its sister 2k+1 leaves heads[k]
    first, adj = _csr(n, head[np.arange(2 * m) ^ 1])

    augmented = _bk_kernel(tr, head, rcap, first, adj) if n else 0.0
    side = _source_reachable(tr, head, rcap, first, adj) if n else np.zeros(0, bool)

    source_flow = common + np.maximum(tr0, 0) - np.maximum(tr, 0)
    sink_flow = common + np.maximum(-tr0, 0) - np.maximum(-tr, 0)
    flow_value = float(common.sum() + augmented + net.constant)
    return CutResult(
        flow_value=flow_value,
        side=side,
        arc_flow=net.caps - rcap[0::2],
        source_flow=source_flow,
        sink_flow=sink_flow,
    )


def cut_capacity(net: FlowNetwork, side) -> float:
    """Total capacity severed by the cut that puts ``side`` with the source."""
    side = np.asarray(side, dtype=bool)
    total = net.constant
    total += net.sink_caps[side].sum() + net.source_caps[~side].sum()
    st, sh = side[net.tails], side[net.heads]
    total += net.caps[st & ~sh].sum() + net.rev_caps[sh & ~st].sum()
    return float(total)


def cut_to_labels(cut: CutResult, graph) -> np.ndarray:
    """Label 1 for source-side nodes, 2 for sink-side nodes."""
    if len(cut.side) != graph.node_count:
        raise ValueError(f"cut covers {len(cut.side)} nodes, graph has {graph.node_count}")
    return np.where(cut.side, 1, 2).astype(np.int8)


def augmenting_path_max_flow(net: FlowNetwork) -> tuple[float, np.ndarray]:
    """Edmonds-Karp reference solver; returns ``(flow_value, source_side)``."""
    n = net.node_count
    s, t = n, n + 1
    residual = [dict() for _ in range(n + 2)]

    def add(u, v, c):
        residual[u][v] = residual[u].get(v, 0.0) + c
        residual[v].setdefault(u, 0.0)

    for i in range(n):
        add(s, i, float(net.source_caps[i]))
        add(i, t, float(net.sink_caps[i]))
    for u, v, c, r in zip(net.tails.tolist(), net.heads.tolist(), net.caps.tolist(), net.rev_caps.tolist()):
        add(u, v, c)
        add(v, u, r)

    def bfs():
        prev = {s: None}
        frontier = deque([s])
        while frontier:
            u = frontier.popleft()
            for v, c in residual[u].items():
                if c > EPS and v not in prev:
                    prev[v] = u
                    if v == t:
                        return prev
                    frontier.append(v)
        return prev

    flow = net.constant
    while True:
        prev = bfs()
        if t not in prev:
            break
        path = []
        v = t
        while prev[v] is not None:
            path.append((prev[v], v))
            v = prev[v]
        push = min(residual[u][v] for u, v in path)
        for u, v in path:
            residual[u][v] -= push
            residual[v][u] += push
        flow += push
    side = np.zeros(n, dtype=bool)
    for v in prev:
        if v < n:
            side[v] = True
    return flow, side


def read_dimacs(path) -> FlowNetwork:
    """Parse a DIMACS max-flow problem (1-based ids, real capacities allowed)."""
    n = None
    source = sink = None
    arcs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0] == "c":
                continue
            try:
                if parts[0] == "p":
                    if len(parts) != 4 or parts[1] != "max":
                        raise FormatError(f"line {lineno}: expected 'p max NODES ARCS'")
                    n = int(parts[2])
                elif parts[0] == "n":
                    if parts[2] == "s":
                        source = int(parts[1]) - 1
                    elif parts[2] == "t":
                        sink = int(parts[1]) - 1
                    else:
                        raise FormatError(f"line {lineno}: node designator must be 's' or 't'")
                elif parts[0] == "a":
                    arcs.append((int(parts[1]) - 1, int(parts[2]) - 1, float(parts[3])))
                else:
                    raise FormatError(f"line {lineno}: unknown line type {parts[0]!r}")
            except (IndexError, ValueError) as exc:
                if isinstance(exc, FormatError):
                    raise
                raise FormatError(f"line {lineno}: malformed {line.strip()!r}") from None
    if n is None or source is None or sink is None:
        raise FormatError("DIMACS file lacks problem line or terminal designators")
    try:
        return FlowNetwork.from_arcs(n, source, sink, arcs)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
