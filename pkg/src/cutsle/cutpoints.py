"""Cut points of a sampled curve united with two open boundary arcs.

A scene is a list of strands (polylines): the curve, and the arcs A1, A2.  The
proximity graph joins consecutive points of each strand and any two points
closer than epsilon that are not neighbours along the same strand (arclength
separation above 2 epsilon).  The local pairs are excluded so that a simple
stretch of curve stays a path, whose interior vertices separate it, instead
of a thick band without articulation vertices.

A vertex is a cut point of the union when every path from the A1 side to the
A2 side passes through it.  These are found with one depth-first search from
a virtual source joined to A1: walking up the DFS tree from a virtual sink
joined to A2, the vertex v above child c separates them iff low[c] >= disc[v].
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

KIND_CURVE, KIND_ARC1, KIND_ARC2 = 0, 1, 2
KIND_NAMES = {KIND_CURVE: "curve", KIND_ARC1: "arc1", KIND_ARC2: "arc2"}


@dataclass
class SceneSample:
    curve: np.ndarray
    arc1: np.ndarray
    arc2: np.ndarray
    epsilon: float
    closed: bool = False            # curve is a closed loop
    anchor_end: bool = False        # last curve point joined to the arc2 point nearest `end_target`
    end_target: complex | None = None
    center: complex | None = None   # if set, the proximity scale is epsilon * max(|z - center|, floor)
    floor: float = 0.0

    def __post_init__(self):
        self.curve = np.asarray(self.curve, dtype=complex).ravel()
        self.arc1 = np.asarray(self.arc1, dtype=complex).ravel()
        self.arc2 = np.asarray(self.arc2, dtype=complex).ravel()
        if self.curve.size + self.arc1.size + self.arc2.size == 0:
            raise ValueError("empty scene")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.center is not None and not self.floor > 0:
            raise ValueError("a relative scale needs a positive floor")

    def eps_at(self, z):
        """Proximity scale at the points z."""
        z = np.asarray(z, dtype=complex)
        if self.center is None:
            return np.full(z.shape, float(self.epsilon))
        return self.epsilon * np.maximum(np.abs(z - self.center), self.floor)

    def points(self):
        return np.concatenate([self.curve, self.arc1, self.arc2])

    def kinds(self):
        return np.concatenate([np.full(self.curve.size, KIND_CURVE),
                               np.full(self.arc1.size, KIND_ARC1),
                               np.full(self.arc2.size, KIND_ARC2)])

    def max_gap(self):
        g = 0.0
        for s in (self.curve, self.arc1, self.arc2):
            if s.size > 1:
                g = max(g, float(np.max(np.abs(np.diff(s)))))
        return g

    def rotate(self, phi):
        r = complex(math.cos(phi), math.sin(phi))
        return SceneSample(self.curve * r, self.arc1 * r, self.arc2 * r, self.epsilon,
                           self.closed, self.anchor_end,
                           None if self.end_target is None else self.end_target * r,
                           None if self.center is None else self.center * r, self.floor)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["kind", "re", "im"])
            for k, z in zip(self.kinds(), self.points()):
                wr.writerow([KIND_NAMES[int(k)], repr(float(z.real)), repr(float(z.imag))])

    @classmethod
    def from_csv(cls, path, epsilon, **kw):
        parts = {"curve": [], "arc1": [], "arc2": []}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                parts[row["kind"]].append(complex(float(row["re"]), float(row["im"])))
        return cls(parts["curve"], parts["arc1"], parts["arc2"], epsilon, **kw)


def densify(points, max_gap):
    """Insert points on each segment of the polyline so consecutive gaps are <= max_gap.
    max_gap may also be a function of the positions, applied at the segment ends."""
    pts = np.asarray(points, dtype=complex)
    if pts.size < 2:
        return pts.copy()
    seg = np.abs(np.diff(pts))
    if callable(max_gap):
        g = max_gap(pts)
        max_gap = np.minimum(g[:-1], g[1:])
    k = np.maximum(1, np.ceil(seg / max_gap).astype(np.int64))
    out = [pts[:1]]
    for a, b, m in zip(pts[:-1], pts[1:], k):
        out.append(a + (b - a) * (np.arange(1, m + 1) / m))
    return np.concatenate(out)


def thin(points, min_gap):
    """Drop points closer than min_gap to the previously kept one (the last point is kept).
    min_gap may be a function of the positions, taken at the kept point."""
    pts = np.asarray(points, dtype=complex)
    if pts.size < 3:
        return pts.copy()
    gap = min_gap(pts) if callable(min_gap) else np.full(pts.size, float(min_gap))
    keep = [0]
    last = pts[0]
    lg = gap[0]
    for k in range(1, pts.size - 1):
        if abs(pts[k] - last) >= min(lg, gap[k]):
            keep.append(k)
            last = pts[k]
            lg = gap[k]
    keep.append(pts.size - 1)
    return pts[keep]


def arc_points(theta_from, theta_to, spacing, endpoint_gap):
    """Points e^{i theta} for theta strictly inside (theta_from, theta_to), keeping an angular
    margin endpoint_gap from both ends."""
    a, b = theta_from + endpoint_gap, theta_to - endpoint_gap
    if b <= a:
        return np.zeros(0, dtype=complex)
    m = max(2, int(math.ceil((b - a) / spacing)) + 1)
    return np.exp(1j * np.linspace(a, b, m))


def make_scene(curve, w1, v1, w2, v2, epsilon, anchor_end=True, center=None, floor=0.0):
    """Scene for a chord from e^{i w1}; A1 is the open arc (v1, v2 + 2pi) containing w1 and A2 the
    open arc (v2, v1) containing w2.  The curve is densified to gaps <= epsilon/2 and the arcs stop
    0.6 epsilon short of e^{i v_s}, so A1 and A2 are never joined directly.  Points closer than
    epsilon/4 to their predecessor are dropped first; they carry nothing at this resolution.

    With `center`, epsilon is relative: the scale at z is epsilon * max(|z - center|, floor)."""
    probe = SceneSample([0j], [], [], epsilon, center=center, floor=floor)
    curve = densify(thin(curve, lambda z: 0.25 * probe.eps_at(z)), lambda z: 0.5 * probe.eps_at(z))
    e_arc = epsilon if center is None else epsilon * max(1.0 - abs(center), floor)
    sp = 0.5 * e_arc
    gap = 2.0 * math.asin(min(1.0, 0.3 * e_arc))
    arc1 = arc_points(v1, v2 + 2.0 * math.pi, sp, gap)
    arc2 = arc_points(v2, v1, sp, gap)
    return SceneSample(curve, arc1, arc2, epsilon, anchor_end=anchor_end,
                       end_target=complex(np.exp(1j * w2)), center=center, floor=floor)


@dataclass
class ProximityGraph:
    pos: np.ndarray
    kind: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    labels: np.ndarray = field(default=None)

    @property
    def n(self):
        return self.pos.size

    def edges(self):
        out = set()
        for u in range(self.n):
            for v in self.indices[self.indptr[u]:self.indptr[u + 1]]:
                if u < v:
                    out.add((u, int(v)))
        return out

    @property
    def n_components(self):
        return int(self.labels.max()) + 1 if self.n else 0


def _strand_arclength(pts, closed=False):
    s = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(pts)))]) if pts.size else np.zeros(0)
    total = s[-1] + (abs(pts[-1] - pts[0]) if closed and pts.size > 1 else 0.0) if pts.size else 0.0
    return s, total


def _csr(n, pairs):
    if len(pairs) == 0:
        return np.zeros(n + 1, dtype=np.int64), np.zeros(0, dtype=np.int64)
    pairs = np.asarray(pairs, dtype=np.int64)
    u = np.concatenate([pairs[:, 0], pairs[:, 1]])
    v = np.concatenate([pairs[:, 1], pairs[:, 0]])
    m = coo_matrix((np.ones(u.size), (u, v)), shape=(n, n)).tocsr()
    m.sum_duplicates()
    m.sort_indices()
    return m.indptr.astype(np.int64), m.indices.astype(np.int64)


def build_graph(scene: SceneSample) -> ProximityGraph:
    pos = scene.points()
    kind = scene.kinds()
    n = pos.size
    eps = scene.epsilon
    strand = np.concatenate([np.full(scene.curve.size, 0), np.full(scene.arc1.size, 1),
                             np.full(scene.arc2.size, 2)])
    arcl = np.empty(n)
    totals = {}
    off = 0
    pairs = []
    for sid, pts in enumerate((scene.curve, scene.arc1, scene.arc2)):
        closed = scene.closed and sid == 0
        s, tot = _strand_arclength(pts, closed)
        arcl[off:off + pts.size] = s
        totals[sid] = (tot, closed)
        idx = np.arange(off, off + pts.size)
        if pts.size > 1:
            pairs.append(np.stack([idx[:-1], idx[1:]], axis=1))
            if closed:
                pairs.append(np.array([[idx[-1], idx[0]]]))
        off += pts.size
    tree = cKDTree(np.stack([pos.real, pos.imag], axis=1))
    if scene.center is None:
        cand = tree.query_pairs(eps, output_type="ndarray")
    else:
        loc = scene.eps_at(pos)
        nb = tree.query_ball_point(np.stack([pos.real, pos.imag], axis=1), loc, return_sorted=False)
        cnt = np.fromiter((len(b) for b in nb), dtype=np.int64, count=n)
        i = np.repeat(np.arange(n), cnt)
        j = np.fromiter((x for b in nb for x in b), dtype=np.int64, count=int(cnt.sum()))
        cand = np.stack([i, j], axis=1)[i < j]
        eps = np.minimum(loc[cand[:, 0]], loc[cand[:, 1]]) if cand.size else eps
    if cand.size:
        i, j = cand[:, 0], cand[:, 1]
        close = np.abs(pos[i] - pos[j]) < eps
        same = strand[i] == strand[j]
        sep = np.abs(arcl[i] - arcl[j])
        for sid, (tot, closed) in totals.items():
            if closed:
                msk = same & (strand[i] == sid)
                sep[msk] = np.minimum(sep[msk], tot - sep[msk])
        keep = close & (~same | (sep > 2.0 * eps))
        pairs.append(np.stack([i[keep], j[keep]], axis=1))
    if scene.anchor_end and scene.curve.size and scene.arc2.size:
        tgt = scene.end_target if scene.end_target is not None else scene.curve[-1]
        a2 = scene.curve.size + scene.arc1.size + int(np.argmin(np.abs(scene.arc2 - tgt)))
        pairs.append(np.array([[scene.curve.size - 1, a2]]))
    pairs = np.concatenate(pairs) if pairs else np.zeros((0, 2), dtype=np.int64)
    indptr, indices = _csr(n, pairs)
    g = ProximityGraph(pos, kind, indptr, indices)
    adj = coo_matrix((np.ones(indices.size), (np.repeat(np.arange(n), np.diff(indptr)), indices)),
                     shape=(n, n))
    g.labels = connected_components(adj, directed=False)[1]
    return g


def brute_force_edges(scene: SceneSample):
    """All-pairs version of the edge rule, for testing."""
    g = build_graph(scene)   # reuse strand bookkeeping only through the rule below
    pos, n = g.pos, g.n
    strand = np.concatenate([np.full(scene.curve.size, 0), np.full(scene.arc1.size, 1),
                             np.full(scene.arc2.size, 2)])
    arcl = np.concatenate([_strand_arclength(p, scene.closed and k == 0)[0]
                           for k, p in enumerate((scene.curve, scene.arc1, scene.arc2))])
    tot = _strand_arclength(scene.curve, scene.closed)[1]
    loc = scene.eps_at(pos)
    out = set()
    for u in range(n):
        for v in range(u + 1, n):
            eps = min(loc[u], loc[v])
            if strand[u] == strand[v]:
                if v == u + 1:
                    out.add((u, v))
                    continue
                if scene.closed and strand[u] == 0 and u == 0 and v == scene.curve.size - 1:
                    out.add((u, v))
                    continue
                sep = abs(arcl[u] - arcl[v])
                if scene.closed and strand[u] == 0:
                    sep = min(sep, tot - sep)
                if sep <= 2 * eps:
                    continue
            if abs(pos[u] - pos[v]) < eps:
                out.add((u, v))
    if scene.anchor_end and scene.curve.size and scene.arc2.size:
        tgt = scene.end_target if scene.end_target is not None else scene.curve[-1]
        a2 = scene.curve.size + scene.arc1.size + int(np.argmin(np.abs(scene.arc2 - tgt)))
        out.add(tuple(sorted((scene.curve.size - 1, a2))))
    return out


@njit(cache=True)
def _dfs(indptr, indices, root, n):
    disc = np.full(n, -1, dtype=np.int64)
    low = np.zeros(n, dtype=np.int64)
    parent = np.full(n, -1, dtype=np.int64)
    nchild = np.zeros(n, dtype=np.int64)
    it = np.zeros(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    stack[0] = root
    disc[root] = 0
    low[root] = 0
    it[root] = indptr[root]
    clock = 1
    while top >= 0:
        u = stack[top]
        if it[u] < indptr[u + 1]:
            v = indices[it[u]]
            it[u] += 1
            if disc[v] == -1:
                parent[v] = u
                nchild[u] += 1
                disc[v] = clock
                low[v] = clock
                clock += 1
                it[v] = indptr[v]
                top += 1
                stack[top] = v
            elif v != parent[u]:
                if disc[v] < low[u]:
                    low[u] = disc[v]
        else:
            top -= 1
            p = parent[u]
            if p >= 0 and low[u] < low[p]:
                low[p] = low[u]
    return disc, low, parent, nchild


def articulation_points(graph: ProximityGraph) -> set:
    """Exact articulation vertices of a connected graph (iterative low-link search)."""
    if graph.n == 0:
        return set()
    if graph.n_components != 1:
        raise ValueError("graph is disconnected; check connectivity first")
    disc, low, parent, nchild = _dfs(graph.indptr, graph.indices, 0, graph.n)
    out = set()
    if nchild[0] >= 2:
        out.add(0)
    for v in range(1, graph.n):
        p = parent[v]
        if p > 0 and low[v] >= disc[p]:
            out.add(int(p))
    return out


def articulation_points_bruteforce(n, edges) -> set:
    """Vertices whose removal increases the number of components (among the others)."""
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)

    def ncomp(skip):
        seen = [False] * n
        if skip is not None:
            seen[skip] = True
        c = 0
        for s in range(n):
            if not seen[s]:
                c += 1
                seen[s] = True
                st = [s]
                while st:
                    u = st.pop()
                    for w in adj[u]:
                        if not seen[w]:
                            seen[w] = True
                            st.append(w)
        return c

    base = ncomp(None)
    return {v for v in range(n) if ncomp(v) > base}


def _with_terminals(graph, S, T):
    """Append virtual source (joined to S) and sink (joined to T); return CSR and their ids."""
    n = graph.n
    src, snk = n, n + 1
    u = np.repeat(np.arange(n), np.diff(graph.indptr))
    m = u < graph.indices
    pairs = np.concatenate([np.stack([u[m], graph.indices[m]], axis=1),
                            np.stack([np.full(len(S), src), S], axis=1),
                            np.stack([np.full(len(T), snk), T], axis=1)])
    indptr, indices = _csr(n + 2, pairs)
    return indptr, indices, src, snk


def separating_vertices(graph: ProximityGraph, S, T) -> np.ndarray:
    """Vertices (outside S and T) lying on every path from S to T; empty if not connected."""
    S, T = np.asarray(S, dtype=np.int64), np.asarray(T, dtype=np.int64)
    if S.size == 0 or T.size == 0:
        return np.zeros(0, dtype=np.int64)
    indptr, indices, src, snk = _with_terminals(graph, S, T)
    disc, low, parent, _ = _dfs(indptr, indices, src, graph.n + 2)
    if disc[snk] < 0:
        return np.zeros(0, dtype=np.int64)
    out = []
    c = snk
    v = parent[c]
    while v != src and v >= 0:
        if low[c] >= disc[v]:
            out.append(v)
        c, v = v, parent[v]
    out = np.array(sorted(out), dtype=np.int64)
    return out[~np.isin(out, S) & ~np.isin(out, T)]


@dataclass
class CutVerdict:
    verdict: bool
    n_in_disk: int
    disconnected: bool = False


def _anchors(scene: SceneSample):
    nc, n1 = scene.curve.size, scene.arc1.size
    S = np.arange(nc, nc + n1) if n1 else np.array([0] if nc else [], dtype=np.int64)
    T = np.arange(nc + n1, nc + n1 + scene.arc2.size) if scene.arc2.size else \
        np.array([nc - 1] if nc else [], dtype=np.int64)
    return S, T


def cut_points(scene: SceneSample, graph: ProximityGraph | None = None, thick=False):
    """Positions of cut-point vertices of the union (curve vertices separating A1 from A2)."""
    g = graph or build_graph(scene)
    S, T = _anchors(scene)
    if scene.closed and scene.arc1.size == 0 and scene.arc2.size == 0:
        return np.zeros(0, dtype=complex), g
    if g.n_components != 1:
        return None, g
    sep = separating_vertices(g, S, T)
    if thick:
        sep = _thick_separating(scene, g, S, T)
    return g.pos[sep], g


def _thick_separating(scene, g, S, T):
    """Curve vertices v such that deleting every vertex within epsilon of v separates S from T."""
    tree = cKDTree(np.stack([g.pos.real, g.pos.imag], axis=1))
    out = []
    Sset, Tset = set(S.tolist()), set(T.tolist())
    for v in range(scene.curve.size):
        ball = set(tree.query_ball_point([g.pos[v].real, g.pos[v].imag],
                                         float(scene.eps_at(g.pos[v]))))
        starts = [s for s in Sset if s not in ball]
        if not starts:
            continue
        seen = set(ball) | set(starts)
        st = list(starts)
        hit = False
        while st and not hit:
            u = st.pop()
            for w in g.indices[g.indptr[u]:g.indptr[u + 1]]:
                w = int(w)
                if w not in seen:
                    if w in Tset:
                        hit = True
                        break
                    seen.add(w)
                    st.append(w)
        if not hit:
            out.append(v)
    return np.array(out, dtype=np.int64)


def has_cut_point_in_disk(scene: SceneSample, z0, r, thick=False, graph=None) -> CutVerdict:
    pts, _ = cut_points(scene, graph, thick)
    if pts is None:
        return CutVerdict(False, 0, disconnected=True)
    k = int(np.count_nonzero(np.abs(pts - z0) < r))
    return CutVerdict(k > 0, k)


def verdicts_for_radii(scene: SceneSample, z0, radii, thick=False):
    """Verdicts for several radii from one graph (nested by construction)."""
    pts, _ = cut_points(scene, None, thick)
    if pts is None:
        return [CutVerdict(False, 0, True) for _ in radii]
    d = np.abs(pts - z0)
    return [CutVerdict(bool(np.any(d < r)), int(np.count_nonzero(d < r))) for r in radii]


def write_verdicts_csv(path, rows):
    """rows: iterable of (scene_id, r, verdict, n_articulation_in_disk)."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["scene-id", "r", "verdict", "n_articulation_in_disk"])
        for sid, r, v, k in rows:
            wr.writerow([sid, repr(float(r)), int(bool(v)), int(k)])
