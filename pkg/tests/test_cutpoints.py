import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from cutsle.cutpoints import (ProximityGraph, SceneSample, _csr, arc_points,
                              articulation_points, articulation_points_bruteforce,
                              brute_force_edges, build_graph, cut_points, densify,
                              has_cut_point_in_disk, make_scene, separating_vertices, thin,
                              verdicts_for_radii, write_verdicts_csv)

SYM = (1.5 * math.pi, math.pi, 0.5 * math.pi, 0.0)


def graph_from_edges(n, edges):
    indptr, indices = _csr(n, list(edges))
    g = ProximityGraph(np.zeros(n, dtype=complex), np.zeros(n, dtype=np.int64), indptr, indices)
    adj = coo_matrix((np.ones(indices.size), (np.repeat(np.arange(n), np.diff(indptr)), indices)),
                     shape=(n, n))
    g.labels = connected_components(adj, directed=False)[1]
    return g


def diameter(eps=0.01):
    return densify(np.array([-1j, 1j]), eps / 2)


def looped_chord(eps=0.01):
    # -i up to -0.5i, once around |z| = 0.5, then straight up to i
    th = np.linspace(-0.5 * math.pi, 1.5 * math.pi, 400)
    pts = np.concatenate([[-1j], 0.5 * np.exp(1j * th), [1j]])
    return densify(pts, eps / 2)


def test_edge_rule_examples():
    eps = 0.1
    s = SceneSample([0.0], [0.05], [], eps)
    assert build_graph(s).edges() == {(0, 1)}
    s = SceneSample([0.0], [0.2], [], eps)
    g = build_graph(s)
    assert g.edges() == set() and g.n_components == 2
    with pytest.raises(ValueError):
        SceneSample([], [], [], eps)
    with pytest.raises(ValueError):
        SceneSample([0.0], [], [], 0.0)


def test_dense_circle_graph():
    eps = 0.05
    circ = np.exp(1j * np.linspace(0, 2 * math.pi, 400, endpoint=False))
    s = SceneSample(circ, [], [], eps, closed=True)
    g = build_graph(s)
    assert g.edges() == brute_force_edges(s)
    assert g.n_components == 1
    assert articulation_points(g) == set()
    assert not has_cut_point_in_disk(s, 0, 0.99).verdict


def test_edges_match_brute_force_on_chord_scene():
    rng = np.random.default_rng(4)
    walk = np.cumsum(0.02 * (rng.standard_normal(300) + 1j * rng.standard_normal(300)))
    walk = 0.8 * walk / np.max(np.abs(walk))
    s = make_scene(walk, *SYM, epsilon=0.06)
    assert build_graph(s).edges() == brute_force_edges(s)


def test_small_graphs():
    assert articulation_points(graph_from_edges(3, [(0, 1), (1, 2)])) == {1}
    assert articulation_points(graph_from_edges(5, [(i, (i + 1) % 5) for i in range(5)])) == set()
    with pytest.raises(ValueError):
        articulation_points(graph_from_edges(4, [(0, 1), (2, 3)]))


def test_articulation_matches_removal_oracle():
    rng = np.random.default_rng(0)
    checked = 0
    for trial in range(100):
        n = int(rng.integers(20, 301))
        pts = rng.uniform(0, 1, (n, 2))
        rad = 1.6 / math.sqrt(n)
        pairs = cKDTree(pts).query_pairs(rad, output_type="ndarray")
        g = graph_from_edges(n, pairs)
        giant = np.argmax(np.bincount(g.labels))
        keep = np.flatnonzero(g.labels == giant)
        remap = -np.ones(n, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        sub = [(remap[u], remap[v]) for u, v in pairs if g.labels[u] == giant]
        h = graph_from_edges(keep.size, sub)
        assert articulation_points(h) == articulation_points_bruteforce(keep.size, sub)
        checked += 1
    assert checked == 100


def _st_connected(n, edges, S, T, skip):
    adj = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {skip} | set(S)
    st_ = list(S)
    while st_:
        u = st_.pop()
        if u in T:
            return True
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                st_.append(w)
    return False


def test_separating_vertices_match_removal_oracle():
    rng = np.random.default_rng(1)
    for trial in range(40):
        n = int(rng.integers(20, 150))
        pts = rng.uniform(0, 1, (n, 2))
        pairs = cKDTree(pts).query_pairs(1.4 / math.sqrt(n), output_type="ndarray")
        g = graph_from_edges(n, pairs)
        S = list(rng.choice(n, 3, replace=False))
        T = [int(v) for v in rng.choice(n, 3, replace=False) if v not in S]
        if not T or not _st_connected(n, pairs, S, set(T), None):
            continue
        want = {v for v in range(n) if v not in S and v not in T
                and not _st_connected(n, pairs, S, set(T), v)}
        assert set(separating_vertices(g, S, T).tolist()) == want


def test_diameter_and_circle():
    s = SceneSample(diameter(), [], [], 0.01)
    assert has_cut_point_in_disk(s, 0, 0.1).verdict
    circ = np.exp(1j * np.linspace(0, 2 * math.pi, 2000, endpoint=False))
    s = SceneSample(circ, [], [], 0.01, closed=True)
    for z0, r in [(0, 0.5), (0.9, 0.2), (0, 1.0)]:
        assert not has_cut_point_in_disk(s, z0, r).verdict


def test_chord_with_arcs():
    s = make_scene(diameter(), *SYM, epsilon=0.01)
    assert has_cut_point_in_disk(s, 0, 0.1).verdict
    loop = make_scene(looped_chord(), *SYM, epsilon=0.01)
    v = verdicts_for_radii(loop, 0, [0.6, 0.45, 0.2])
    assert [c.verdict for c in v] == [True, False, False]
    # cut points only on the stems below and above the loop
    pts, _ = cut_points(loop)
    assert np.all(np.abs(pts) > 0.5 - 0.01) and np.all(np.abs(pts.real) < 1e-9)


def test_arcs_are_open():
    a = arc_points(0.0, 1.0, 0.01, 0.05)
    ang = np.angle(a)
    assert ang.min() == pytest.approx(0.05) and ang.max() == pytest.approx(0.95)
    assert np.max(np.abs(np.diff(a))) <= 0.01
    assert arc_points(0.0, 0.05, 0.01, 0.05).size == 0


def test_thin_and_densify():
    pts = np.array([0, 0.001, 0.002, 0.5, 0.5005, 1.0], dtype=complex)
    t = thin(pts, 0.01)
    assert list(t) == [0, 0.5, 1.0]
    d = densify(t, 0.1)
    assert np.max(np.abs(np.diff(d))) <= 0.1 + 1e-15 and d[0] == 0 and d[-1] == 1


def test_disconnected_scene_flagged():
    curve = densify(np.array([-0.1, 0.1]), 0.005)
    s = make_scene(curve, *SYM, epsilon=0.01, anchor_end=False)
    v = has_cut_point_in_disk(s, 0, 0.5)
    assert not v.verdict and v.disconnected
    assert all(c.disconnected for c in verdicts_for_radii(s, 0, [0.5, 0.2]))


def test_thick_mode():
    s = make_scene(diameter(), *SYM, epsilon=0.01)
    assert has_cut_point_in_disk(s, 0, 0.1, thick=True).verdict
    loop = make_scene(looped_chord(), *SYM, epsilon=0.01)
    assert not has_cut_point_in_disk(loop, 0, 0.45, thick=True).verdict


walks = st.integers(0, 10 ** 6)


def _random_scene(seed):
    rng = np.random.default_rng(seed)
    steps = 0.05 * (rng.standard_normal(200) + 1j * rng.standard_normal(200))
    w = np.cumsum(steps)
    w = -1j + 0.9 * (w - w[0]) / max(1.0, np.max(np.abs(w - w[0])))
    w = w[np.abs(w) < 1] if np.all(np.abs(w[1:]) < 1) else w / (1.01 * np.max(np.abs(w)))
    return make_scene(w, *SYM, epsilon=0.04)


@settings(max_examples=30, deadline=None)
@given(walks, st.floats(0, 2 * math.pi))
def test_monotone_and_rotation(seed, phi):
    s = _random_scene(seed)
    radii = [0.8, 0.5, 0.3, 0.1]
    v = [c.verdict for c in verdicts_for_radii(s, 0.1, radii)]
    assert all(a >= b for a, b in zip(v, v[1:]))
    for r, want in zip(radii, v):
        assert has_cut_point_in_disk(s, 0.1, r).verdict == want
    rot = s.rotate(phi)
    z = 0.1 * np.exp(1j * phi)
    assert [c.verdict for c in verdicts_for_radii(rot, z, radii)] == v


def test_scene_csv_round_trip(tmp_path):
    s = make_scene(looped_chord(0.02), *SYM, epsilon=0.02)
    s.to_csv(tmp_path / "scene.csv")
    back = SceneSample.from_csv(tmp_path / "scene.csv", 0.02, anchor_end=True, end_target=s.end_target)
    np.testing.assert_array_equal(back.points(), s.points())
    np.testing.assert_array_equal(back.kinds(), s.kinds())
    assert has_cut_point_in_disk(back, 0, 0.6) == has_cut_point_in_disk(s, 0, 0.6)


def test_verdict_csv(tmp_path):
    write_verdicts_csv(tmp_path / "v.csv", [(0, 0.1, True, 3), (1, 0.1, False, 0)])
    lines = (tmp_path / "v.csv").read_text().splitlines()
    assert lines[0] == "scene-id,r,verdict,n_articulation_in_disk"
    assert lines[1] == "0,0.1,1,3"


def resolution_agreement(n_scenes, r=0.2, seed=42):
    """Fraction of kappa = 6 chord scenes whose verdict at (0, r) is the same at eps and eps/2."""
    from cutsle.mc import McPlan
    plan = McPlan(6.0, SYM, (r,), n_scenes, seed)
    same = 0
    for i in range(n_scenes):
        pts, _ = plan.chord(i)
        a = has_cut_point_in_disk(plan.scene(pts), 0, r).verdict
        b = has_cut_point_in_disk(plan.scene(pts, plan.eps / 2), 0, r).verdict
        same += a == b
    return same / n_scenes


@pytest.mark.slow
def test_resolution_stability():
    assert resolution_agreement(1000) >= 0.95
