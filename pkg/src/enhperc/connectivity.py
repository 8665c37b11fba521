"""Cluster analysis: union-find, crossings, one-arm events, cluster statistics.

``build_index`` works on one configuration. ``ConnectionEngine`` answers the
same connection questions for a batch of trials at once, over a fixed
region, and is what the Monte Carlo estimators use.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .bond_config import BondConfig
from .enhancement import EnhancedGraph
from .lattice import Box, GeometryError


class UnionFind:
    """Disjoint sets with path compression and union by rank."""

    def __init__(self, size):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.components = size

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.rank[ra] < self.rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        if self.rank[ra] == self.rank[rb]:
            self.rank[ra] += 1
        self.components -= 1
        return True

    def connected(self, a, b):
        return self.find(a) == self.find(b)


@dataclass
class ClusterIndex:
    region: object
    uf: UnionFind

    @property
    def component_count(self):
        return self.uf.components

    def roots(self):
        return np.array([self.uf.find(i) for i in range(len(self.uf.parent))])

    @property
    def largest(self):
        _, counts = np.unique(self.roots(), return_counts=True)
        return int(counts.max())

    def root_of(self, v):
        idx = int(self.region.vertex_index(v))
        if idx < 0:
            raise GeometryError(f"{v} is outside the indexed region")
        return self.uf.find(idx)


def _split(graph):
    if isinstance(graph, EnhancedGraph):
        return graph.base, graph.extra_edges
    if isinstance(graph, BondConfig):
        return graph, frozenset()
    raise TypeError(f"expected BondConfig or EnhancedGraph, got {type(graph).__name__}")


def build_index(graph, region=None):
    """Union-find over open base edges and extra pairs.

    With ``region`` only edges with both endpoints in it are used. Without
    it every extra pair must lie in the window.
    """
    base, extra = _split(graph)
    domain = base.domain
    if region is None:
        region = domain
    elif isinstance(domain, Box) and not domain.contains_box(region):
        raise GeometryError(f"region {region.describe()} exceeds window {domain.describe()}")
    uf = UnionFind(region.num_vertices)
    open_idx = base.open_edges
    lu, lv = domain.edge_endpoints
    verts = domain.vertices
    a = region.vertex_index(verts[lu[open_idx]])
    b = region.vertex_index(verts[lv[open_idx]])
    keep = (a >= 0) & (b >= 0)
    for x, y in zip(a[keep].tolist(), b[keep].tolist()):
        uf.union(x, y)
    for u, v in extra:
        ia = int(region.vertex_index(u))
        ib = int(region.vertex_index(v))
        if ia < 0 or ib < 0:
            if region is domain:
                raise GeometryError(f"extra edge {u}-{v} leaves the window")
            continue
        uf.union(ia, ib)
    return ClusterIndex(region, uf)


def _index_for(graph_or_index, region):
    if isinstance(graph_or_index, ClusterIndex):
        if graph_or_index.region != region:
            raise GeometryError("index was built on a different region")
        return graph_or_index
    return build_index(graph_or_index, region)


def _axis(direction, dim):
    if direction in ("H", "h", "horizontal", 0):
        return 0
    if direction in ("V", "v", "vertical", 1):
        if dim < 2:
            raise GeometryError("vertical crossing needs dim >= 2")
        return 1
    if isinstance(direction, int) and 0 <= direction < dim:
        return direction
    raise ValueError(f"unknown direction {direction!r}")


def crossing(graph_or_index, rect, direction="H"):
    """Open path inside ``rect`` joining its two faces orthogonal to ``direction``."""
    index = _index_for(graph_or_index, rect)
    axis = _axis(direction, rect.dim)
    left = {index.uf.find(int(i)) for i in rect.face(axis, 0)}
    return any(index.uf.find(int(i)) in left for i in rect.face(axis, 1))


def one_arm(graph_or_index, k, dim=2):
    """The origin is joined to the boundary of Lambda_k inside Lambda_k."""
    region = Box.cube(k, dim)
    index = _index_for(graph_or_index, region)
    origin = index.root_of((0,) * dim)
    return any(index.uf.find(int(i)) == origin for i in region.boundary())


def cluster_stats(index):
    """(component count, largest component size, {size: number of components})."""
    _, sizes = np.unique(index.roots(), return_counts=True)
    sz, freq = np.unique(sizes, return_counts=True)
    return index.component_count, int(sizes.max()), {int(s): int(f) for s, f in zip(sz, freq)}


# -- batched connectivity ---------------------------------------------------

class ConnectionEngine:
    """Batch test of "some source vertex is joined to some target vertex".

    The graph lives on ``region``'s vertices: its nearest-neighbour edges
    (``edge_u``, ``edge_v``) plus optional candidate extra pairs
    (``pair_a``, ``pair_b``). Each trial switches edges and pairs on or off.
    """

    small_graph = 48

    def __init__(self, region, sources, targets, pair_a=None, pair_b=None):
        self.region = region
        self.edge_u, self.edge_v = region.edge_endpoints
        self.sources = np.asarray(sources, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int64)
        self.pair_a = np.zeros(0, np.int64) if pair_a is None else np.asarray(pair_a, np.int64)
        self.pair_b = np.zeros(0, np.int64) if pair_b is None else np.asarray(pair_b, np.int64)

    @property
    def num_vertices(self):
        return self.region.num_vertices

    def connect(self, edges_open, pairs_open=None, method=None):
        """``edges_open`` (B, E_region) and ``pairs_open`` (B, X) -> (B,) bool."""
        edges_open = np.asarray(edges_open, dtype=bool)
        B = edges_open.shape[0]
        if pairs_open is None:
            pairs_open = np.zeros((B, len(self.pair_a)), dtype=bool)
        if method is None:
            method = "propagate" if self.num_vertices <= self.small_graph else "scipy"
        if method == "propagate":
            return self._propagate(edges_open, pairs_open)
        return self._components(edges_open, pairs_open)

    def _components(self, edges_open, pairs_open):
        B = edges_open.shape[0]
        V = self.num_vertices
        t_e, j_e = np.nonzero(edges_open)
        t_x, j_x = np.nonzero(pairs_open)
        rows = np.concatenate([self.edge_u[j_e] + t_e * V, self.pair_a[j_x] + t_x * V])
        cols = np.concatenate([self.edge_v[j_e] + t_e * V, self.pair_b[j_x] + t_x * V])
        g = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(B * V, B * V)).tocsr()
        ncomp, labels = connected_components(g, directed=False)
        labels = labels.reshape(B, V)
        mark = np.zeros(ncomp, dtype=bool)
        mark[labels[:, self.sources].ravel()] = True
        return mark[labels[:, self.targets]].any(axis=1)

    def _propagate(self, edges_open, pairs_open):
        B = edges_open.shape[0]
        V = self.num_vertices
        U = np.concatenate([self.edge_u, self.pair_a])
        W = np.concatenate([self.edge_v, self.pair_b])
        on = np.concatenate([edges_open, pairs_open], axis=1)
        lab = np.tile(np.arange(V, dtype=np.int16 if V < 2 ** 15 else np.int64), (B, 1))
        while True:
            changed = False
            for j in range(len(U)):
                o = on[:, j]
                a = lab[:, U[j]]
                b = lab[:, W[j]]
                m = np.where(o, np.minimum(a, b), a)
                n = np.where(o, m, b)
                if not changed and (np.any(m != a) or np.any(n != b)):
                    changed = True
                lab[:, U[j]] = m
                lab[:, W[j]] = n
            if not changed:
                break
        src = lab[:, self.sources]
        dst = lab[:, self.targets]
        return (src[:, :, None] == dst[:, None, :]).any(axis=(1, 2))


def crossing_engine(rect, direction="H", pair_a=None, pair_b=None):
    axis = _axis(direction, rect.dim)
    return ConnectionEngine(rect, rect.face(axis, 0), rect.face(axis, 1), pair_a, pair_b)


def one_arm_engine(k, dim=2, pair_a=None, pair_b=None):
    region = Box.cube(k, dim)
    origin = region.vertex_index((0,) * dim)
    return ConnectionEngine(region, [int(origin)], region.boundary(), pair_a, pair_b)
