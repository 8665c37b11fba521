"""Increasing events evaluated on batches of trials.

An event is compiled against a fixed domain. ``needed`` lists the domain
edges it reads, and ``evaluate`` maps a (trials, len(needed)) boolean array
of open states to one outcome per trial. ``evaluate_config`` recomputes the
outcome of a single ``BondConfig`` through the per-configuration API
(matcher, enhanced graph, union-find); the two paths are kept independent
so they can check each other.
"""

from functools import reduce

import numpy as np
from scipy.sparse import csr_matrix

from .connectivity import ConnectionEngine, build_index, crossing_engine, one_arm_engine
from .enhancement import (
    MarginError, anchor_box, check_radius_for_L, check_torus_for_J, detect_Gk, detect_Jkl,
    detect_Ln, enhance, placement_table, s_images, _check_embedded,
)
from .lattice import Box, Torus


class Event:
    name = "event"
    domain = None
    needed = np.zeros(0, dtype=np.int64)
    params = {}

    def evaluate(self, open_):
        raise NotImplementedError

    def evaluate_config(self, config):
        raise NotImplementedError

    def columns(self, edges):
        """Positions of domain edges ``edges`` within ``needed``."""
        cols = np.searchsorted(self.needed, edges)
        if np.any(cols >= len(self.needed)) or np.any(self.needed[np.minimum(cols, len(self.needed) - 1)] != edges):
            raise ValueError("edge not tracked by this event")
        return cols


class EdgeOpen(Event):
    """A single fixed edge is open."""

    def __init__(self, domain, lower, axis, name="edge"):
        self.domain = domain
        idx = int(domain.edge_index(lower, axis))
        if idx < 0:
            raise ValueError("edge not in domain")
        self.index = idx
        self.needed = np.array([idx], dtype=np.int64)
        self.name = name
        self.params = {}

    def evaluate(self, open_):
        return np.asarray(open_)[:, 0].copy()

    def evaluate_config(self, config):
        return bool(config.open_mask[self.index])


class _ActivationTables:
    def __init__(self, domain, family, indices, anchors, drop_outside=False):
        self.tables = placement_table(domain, family, indices, anchors, drop_outside)
        edges = [t.t_edges.ravel() for t in self.tables]
        self.edges = np.unique(np.concatenate(edges)) if edges else np.zeros(0, np.int64)

    def bind(self, needed):
        self.cols = [np.searchsorted(needed, t.t_edges) for t in self.tables]

    def activated(self, open_):
        """List of (B, P_member) boolean arrays."""
        return [np.all(open_[:, c], axis=2) if c.size else np.zeros((open_.shape[0], 0), bool)
                for c in self.cols]


class Activation(Event):
    """Some placement of the chosen members is open (G_k, J_{k,l}, L_n)."""

    def __init__(self, domain, family, indices, anchors, name, params, check):
        self.domain = domain
        self.family = family
        self.indices = list(indices)
        self.name = name
        self.params = params
        self._check = check
        self.acts = _ActivationTables(domain, family, self.indices, anchors)
        self.needed = self.acts.edges
        self.acts.bind(self.needed)

    def evaluate(self, open_):
        open_ = np.asarray(open_, dtype=bool)
        out = np.zeros(open_.shape[0], dtype=bool)
        for a in self.acts.activated(open_):
            if a.shape[1]:
                out |= a.any(axis=1)
        return out

    def evaluate_config(self, config):
        return self._check(config)


def gk_event(family, k, anchor_scale=1.0, domain=None):
    """G_k: a level-k member is activated with anchor in Lambda_{floor(c 2^k)}."""
    dim = family.dim
    idx = family.member_indices(level=k)
    box = anchor_box(k, dim, anchor_scale)
    radius = family.max_footprint_radius(idx)
    if domain is None:
        domain = Box.cube(max(3 * 2 ** k, box.hi[0] + radius), dim)
    _check_embedded(domain, box, radius)
    return Activation(domain, family, idx, box.vertices, "G",
                      {"k": k, "anchor_scale": anchor_scale},
                      lambda c: detect_Gk(c, family, k, anchor_scale))


def jkl_event(family, k, l):
    """J_{k,l}: a level-k member is activated somewhere on T_{l 2^k}."""
    torus = Torus(family.dim, l * 2 ** k)
    check_torus_for_J(torus, family, k, l)
    idx = family.member_indices(level=k)
    return Activation(torus, family, idx, torus.vertices, "J", {"k": k, "l": l},
                      lambda c: detect_Jkl(c, family, k, l))


def ln_event(family, n, domain=None):
    """L_n: some member is activated with anchor in Lambda_{n/2}."""
    check_radius_for_L(family, n)
    box = Box.cube(n // 2, family.dim)
    radius = family.max_footprint_radius()
    if domain is None:
        domain = box.expand(radius)
    _check_embedded(domain, box, radius)
    return Activation(domain, family, range(len(family.members)), box.vertices, "L", {"n": n},
                      lambda c: detect_Ln(c, family, n))


class Connection(Event):
    """Source and target vertex sets joined inside ``region``.

    With a family, edges ``gamma(S) + t`` of activated members of level at
    most ``k_max`` join the graph when both endpoints lie in ``region``.
    Every anchor whose S can reach the region is searched, so the result is
    exact for the enhanced graph restricted to the region.
    """

    def __init__(self, region, sources, targets, name, params, family=None, k_max=None, domain=None):
        self.region = region
        self.name = name
        self.params = dict(params)
        self.family = family
        self.k_max = k_max
        self.sources = np.asarray(sources, dtype=np.int64)
        self.targets = np.asarray(targets, dtype=np.int64)
        idx = family.member_indices(k_max) if family is not None else []
        self.indices = idx
        reach = family.max_footprint_radius(idx) if idx else 0
        self.search_box = region.expand(reach) if idx else None
        if domain is None:
            domain = region.expand(2 * reach)
        if not domain.contains_box(region.expand(2 * reach)):
            raise MarginError(f"domain {domain.describe()} too small: need {region.expand(2 * reach).describe()}")
        self.domain = domain
        self.region_edges = domain.edge_index(region.edge_lower, region.edge_axis)
        pair_a = pair_b = None
        self.incidence = []
        if idx:
            self.acts = _ActivationTables(domain, family, idx, self.search_box.vertices)
            pair_a, pair_b = self._build_pairs()
            t_edges = self.acts.edges
        else:
            self.acts = None
            t_edges = np.zeros(0, np.int64)
        self.engine = ConnectionEngine(region, self.sources, self.targets, pair_a, pair_b)
        self.needed = np.union1d(self.region_edges, t_edges)
        self._region_cols = np.searchsorted(self.needed, self.region_edges)
        if self.acts is not None:
            self.acts.bind(self.needed)

    def _build_pairs(self):
        V = self.region.num_vertices
        per_table = []
        for table in self.acts.tables:
            img = s_images(self.domain, self.family, table)  # (P, nS, 2, d)
            a = self.region.vertex_index(img[:, :, 0])
            b = self.region.vertex_index(img[:, :, 1])
            ok = (a >= 0) & (b >= 0)
            lo = np.minimum(a, b)
            hi = np.maximum(a, b)
            per_table.append((ok, lo * V + hi))
        codes = [c[ok] for ok, c in per_table]
        allc = np.unique(np.concatenate(codes)) if codes else np.zeros(0, np.int64)
        for table, (ok, c) in zip(self.acts.tables, per_table):
            rows, cols = np.nonzero(ok)
            pid = np.searchsorted(allc, c[rows, cols])
            inc = csr_matrix((np.ones(len(rows), dtype=np.int32), (rows, pid)),
                             shape=(len(table), len(allc)))
            self.incidence.append(inc)
        return allc // V, allc % V

    def evaluate(self, open_):
        open_ = np.asarray(open_, dtype=bool)
        edges_open = open_[:, self._region_cols]
        pairs_open = None
        if self.acts is not None:
            B = open_.shape[0]
            hits = None
            for act, inc in zip(self.acts.activated(open_), self.incidence):
                if not act.shape[1]:
                    continue
                h = csr_matrix(act.astype(np.int32)) @ inc
                hits = h if hits is None else hits + h
            pairs_open = np.zeros((B, len(self.engine.pair_a)), dtype=bool)
            if hits is not None:
                r, c = hits.nonzero()
                pairs_open[r, c] = True
        return self.engine.connect(edges_open, pairs_open)

    def evaluate_config(self, config):
        if self.indices:
            graph = enhance(config, self.family, self.k_max, self.search_box)
        else:
            graph = config
        index = build_index(graph, self.region)
        src = {index.uf.find(int(i)) for i in self.sources}
        return any(index.uf.find(int(i)) in src for i in self.targets)


def crossing_event(rect, direction="H", family=None, k_max=None, domain=None, name=None):
    eng = crossing_engine(rect, direction)
    label = name or ("H" if direction in ("H", 0) else "V")
    geometry = "x".join(f"{l}:{h}" for l, h in zip(rect.lo, rect.hi))
    return Connection(rect, eng.sources, eng.targets, label,
                      {"geometry": geometry, "k": k_max}, family, k_max, domain)


def one_arm_event(k, dim=2, family=None, k_max=None, domain=None):
    eng = one_arm_engine(k, dim)
    return Connection(eng.region, eng.sources, eng.targets, "one_arm", {"k": k}, family, k_max, domain)


class AllOf(Event):
    """Conjunction of events compiled on one domain."""

    def __init__(self, events, name="and"):
        self.events = list(events)
        self.domain = self.events[0].domain
        if any(e.domain != self.domain for e in self.events):
            raise ValueError("AllOf needs events on a common domain")
        self.needed = reduce(np.union1d, [e.needed for e in self.events])
        self._cols = [np.searchsorted(self.needed, e.needed) for e in self.events]
        self.name = name
        self.params = {}

    def evaluate(self, open_):
        out = None
        for e, c in zip(self.events, self._cols):
            r = e.evaluate(open_[:, c])
            out = r if out is None else out & r
        return out

    def evaluate_config(self, config):
        return all(e.evaluate_config(config) for e in self.events)
