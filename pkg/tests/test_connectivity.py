import numpy as np
import pytest

from conftest import bfs_connected, box_vertices, random_config
from enhperc import bond_config
from enhperc.connectivity import (
    UnionFind, build_index, cluster_stats, crossing, crossing_engine, one_arm, one_arm_engine,
)
from enhperc.enhancement import enhance
from enhperc.families import pair_family
from enhperc.lattice import Box, GeometryError


def open_pairs(cfg):
    verts = cfg.domain.vertices
    u, v = cfg.domain.edge_endpoints
    return [(tuple(verts[a]), tuple(verts[b])) for a, b in zip(u[cfg.open_edges], v[cfg.open_edges])]


def test_union_find():
    uf = UnionFind(5)
    uf.union(0, 1)
    uf.union(3, 4)
    assert uf.connected(0, 1) and not uf.connected(1, 3)
    assert uf.components == 3


def test_crossing_matches_bfs(seed):
    rs = np.random.default_rng(seed)
    for _ in range(60):
        rect = Box.centered((int(rs.integers(1, 4)), int(rs.integers(1, 4))))
        cfg = random_config(rect, rs, rs.uniform(0.3, 0.7))
        verts = box_vertices(rect.lo, rect.hi)
        left = [v for v in verts if v[0] == rect.lo[0]]
        right = [v for v in verts if v[0] == rect.hi[0]]
        assert crossing(cfg, rect, "H") == bfs_connected(verts, open_pairs(cfg), left, right)
        bottom = [v for v in verts if v[1] == rect.lo[1]]
        top = [v for v in verts if v[1] == rect.hi[1]]
        assert crossing(cfg, rect, "V") == bfs_connected(verts, open_pairs(cfg), bottom, top)


def test_one_arm_matches_bfs(seed):
    rs = np.random.default_rng(seed + 1)
    for _ in range(40):
        k = int(rs.integers(1, 4))
        region = Box.cube(k)
        cfg = random_config(region.expand(1), rs, 0.5)
        verts = box_vertices(region.lo, region.hi)
        bnd = [v for v in verts if max(abs(x) for x in v) == k]
        assert one_arm(cfg, k) == bfs_connected(verts, open_pairs(cfg), [(0, 0)], bnd)


def test_region_restriction_ignores_outside_edges():
    dom = Box.cube(3)
    rect = Box.centered((1, 1))
    cfg = bond_config.sample(dom, 1.0, 0)
    assert crossing(cfg, rect, "H")
    # remove every edge inside the rectangle: the detour outside must not count
    mask = cfg.open_mask.copy()
    inside = dom.edge_index(rect.edge_lower, rect.edge_axis)
    mask[inside] = False
    cut = bond_config.BondConfig(dom, mask, 1.0)
    assert not crossing(cut, rect, "H")


def test_extra_edges_outside_window_rejected():
    fam = pair_family()
    dom = Box.cube(3)
    cfg = bond_config.sample(dom, 1.0, 0)
    g = enhance(cfg, fam)
    build_index(g)
    from enhperc.enhancement import EnhancedGraph
    bad = EnhancedGraph(cfg, frozenset({((0, 0), (5, 0))}), None)
    with pytest.raises(GeometryError):
        build_index(bad)


def test_cluster_stats():
    dom = Box.cube(1)
    assert cluster_stats(build_index(bond_config.sample(dom, 0.0, 0))) == (9, 1, {1: 9})
    count, largest, hist = cluster_stats(build_index(bond_config.sample(dom, 1.0, 0)))
    assert (count, largest) == (1, 9)


@pytest.mark.parametrize("method", ["scipy", "propagate"])
def test_engine_matches_single_config(seed, method):
    rs = np.random.default_rng(seed + 2)
    rect = Box.centered((3, 2))
    eng = crossing_engine(rect, "H")
    sq = Box.cube(2)
    arm = one_arm_engine(2)
    cfgs = [random_config(rect, rs, 0.5) for _ in range(50)]
    mask = np.stack([c.open_mask for c in cfgs])
    got = eng.connect(mask, method=method)
    assert got.tolist() == [crossing(c, rect, "H") for c in cfgs]
    cfgs = [random_config(sq, rs, 0.55) for _ in range(50)]
    got = arm.connect(np.stack([c.open_mask for c in cfgs]), method=method)
    assert got.tolist() == [one_arm(c, 2) for c in cfgs]
