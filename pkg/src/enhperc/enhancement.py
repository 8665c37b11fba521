"""Enhancements, enhancement families and pattern activation.

An enhancement is a pair ``(T, S)``: ``T`` is a set of nearest-neighbour
edges, ``S`` a set of vertex pairs (long range allowed) containing the
anchor vertex 0. Wherever a rotated translate ``gamma(T) + t`` is open in a
bond configuration, the edges ``gamma(S) + t`` are added; ``t`` is the
anchor of the activation.

Levels partition a family by the l-infinity diameter of ``S``: level ``k``
holds the members with ``2**k <= diam(S) < 2**(k+1)``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import json
from typing import NamedTuple, Optional

import numpy as np

from .lattice import Box, Torus, rotations, rotate_edge, GeometryError


class FamilyError(ValueError):
    pass


class MarginError(GeometryError):
    """Raised when a window is too small for the requested activation search."""


def _pair(u, v):
    u = tuple(int(x) for x in u)
    v = tuple(int(x) for x in v)
    if u == v:
        raise FamilyError(f"degenerate edge at {u}")
    return (u, v) if u < v else (v, u)


def _linf(u, v):
    return max(abs(a - b) for a, b in zip(u, v))


def _pairs_array(pairs, dim):
    return np.array(pairs, dtype=np.int64).reshape(len(pairs), 2, dim)


def _nn_lower_axis(pairs, dim):
    arr = _pairs_array(pairs, dim)
    diff = arr[:, 1] - arr[:, 0]
    if np.any(np.abs(diff).sum(axis=1) != 1):
        raise FamilyError("activation pattern T must consist of nearest-neighbour edges")
    axis = np.argmax(np.abs(diff), axis=1)
    return arr[:, 0], axis  # pairs are sorted, so the first endpoint is lower


def _connected(pairs):
    verts = {v for p in pairs for v in p}
    if not verts:
        return False
    adj = {v: [] for v in verts}
    for u, v in pairs:
        adj[u].append(v)
        adj[v].append(u)
    start = next(iter(verts))
    seen = {start}
    stack = [start]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(verts)


@dataclass(frozen=True)
class Enhancement:
    name: str
    T: tuple
    S: tuple
    dim: int = 2

    def __post_init__(self):
        T = tuple(sorted({_pair(u, v) for u, v in self.T}))
        S = tuple(sorted({_pair(u, v) for u, v in self.S}))
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "S", S)
        if not T:
            raise FamilyError(f"{self.name}: T is empty")
        if not S:
            raise FamilyError(f"{self.name}: S is empty")
        for u, v in T + S:
            if len(u) != self.dim or len(v) != self.dim:
                raise FamilyError(f"{self.name}: edge {u}-{v} is not {self.dim}-dimensional")
        _nn_lower_axis(T, self.dim)
        if (0,) * self.dim not in self.vertices_S:
            raise FamilyError(f"{self.name}: the origin must be a vertex of S")
        if self.diameter == 0:
            raise FamilyError(f"{self.name}: S has diameter 0, level undefined")

    @cached_property
    def vertices_S(self):
        return frozenset(v for p in self.S for v in p)

    @cached_property
    def vertices_T(self):
        return frozenset(v for p in self.T for v in p)

    @property
    def t_subset_s(self):
        return set(self.T) <= set(self.S)

    @staticmethod
    def _diam(verts):
        arr = np.array(sorted(verts))
        return int((arr.max(axis=0) - arr.min(axis=0)).max())

    @cached_property
    def diameter(self):
        """l-infinity diameter of the vertex set of S."""
        return self._diam(self.vertices_S)

    @cached_property
    def footprint_diameter(self):
        return self._diam(self.vertices_S | self.vertices_T)

    @cached_property
    def radius(self):
        """Smallest n with every vertex of S in Lambda_n."""
        return int(np.abs(np.array(sorted(self.vertices_S))).max())

    @cached_property
    def footprint_radius(self):
        """Radius of T u S; equals ``radius`` when T is inside S."""
        return int(np.abs(np.array(sorted(self.vertices_S | self.vertices_T))).max())

    @property
    def level(self):
        return level_of(self)

    @cached_property
    def t_lower_axis(self):
        return _nn_lower_axis(self.T, self.dim)

    @cached_property
    def s_array(self):
        return _pairs_array(self.S, self.dim)

    def transformed(self, rotation, t):
        """Images ``(gamma(T)+t, gamma(S)+t)`` as sorted pair tuples."""
        t = np.asarray(t)

        def img(pairs):
            arr = rotation.apply(_pairs_array(pairs, self.dim)) + t
            return tuple(sorted(_pair(a, b) for a, b in arr))

        return img(self.T), img(self.S)

    def to_json(self):
        return {"name": self.name,
                "T": [[list(u), list(v)] for u, v in self.T],
                "S": [[list(u), list(v)] for u, v in self.S]}


def level_of(e):
    """k with ``2**k <= diam(S) < 2**(k+1)``."""
    if e.diameter < 1:
        raise FamilyError("level undefined for diameter 0")
    return int(e.diameter).bit_length() - 1


def _normal_form(e, group):
    best = None
    for g in group:
        T, S = e.transformed(g, np.zeros(e.dim, dtype=np.int64))
        verts = [v for p in T + S for v in p]
        shift = np.min(np.array(verts), axis=0)
        T2 = tuple(sorted(_pair(np.subtract(u, shift), np.subtract(v, shift)) for u, v in T))
        S2 = tuple(sorted(_pair(np.subtract(u, shift), np.subtract(v, shift)) for u, v in S))
        key = (T2, S2)
        if best is None or key < best:
            best = key
    return best


@dataclass(frozen=True)
class EnhancementFamily:
    members: tuple
    symmetrized: bool = True
    planar_connected: bool = False
    rotund_c: Optional[float] = None
    reflections: bool = False
    relaxed_c: Optional[float] = None

    def __post_init__(self):
        members = tuple(self.members)
        object.__setattr__(self, "members", members)
        if not members:
            raise FamilyError("family has no members")
        dims = {m.dim for m in members}
        if len(dims) != 1:
            raise FamilyError("members have mixed dimensions")
        names = [m.name for m in members]
        if len(set(names)) != len(names):
            raise FamilyError("member names must be unique")
        for m in members:
            if not m.t_subset_s:
                if self.relaxed_c is None:
                    raise FamilyError(f"{m.name}: T is not contained in S (set relaxed_c to allow)")
                if m.footprint_diameter > self.relaxed_c * m.diameter:
                    raise FamilyError(f"{m.name}: diam(T u S) = {m.footprint_diameter} exceeds "
                                      f"{self.relaxed_c} * diam(S) = {self.relaxed_c * m.diameter}")
            if self.planar_connected:
                if any(_linf(u, v) != 1 or sum(abs(a - b) for a, b in zip(u, v)) != 1 for u, v in m.S):
                    raise FamilyError(f"{m.name}: S has a non nearest-neighbour edge")
                if not _connected(m.S):
                    raise FamilyError(f"{m.name}: S is not connected")
        if self.rotund_c is not None:
            from .continuum import rotund_check
            bad = [m.name for m, ok in zip(members, rotund_check(self, self.rotund_c)) if not ok]
            if bad:
                raise FamilyError(f"not rotund with c={self.rotund_c}: {', '.join(bad)}")
        seen = {}
        for m in members:
            key = _normal_form(m, self.group)
            if key in seen:
                raise FamilyError(f"{m.name} is congruent to {seen[key]}")
            seen[key] = m.name

    @property
    def dim(self):
        return self.members[0].dim

    @cached_property
    def group(self):
        """Transformations applied when matching T."""
        if self.symmetrized:
            return rotations(self.dim, self.reflections)
        return rotations(self.dim)[:1]

    def levels(self):
        out = {}
        for i, m in enumerate(self.members):
            out.setdefault(m.level, []).append(i)
        return out

    def member_indices(self, k_max=None, level=None):
        return [i for i, m in enumerate(self.members)
                if (k_max is None or m.level <= k_max) and (level is None or m.level == level)]

    def max_footprint_radius(self, indices=None):
        indices = range(len(self.members)) if indices is None else indices
        return max((self.members[i].footprint_radius for i in indices), default=0)

    def to_json(self):
        out = {"dim": self.dim, "symmetrized": self.symmetrized,
               "planar_connected": self.planar_connected}
        if self.rotund_c is not None:
            out["rotund_c"] = self.rotund_c
        if self.reflections:
            out["reflections"] = True
        if self.relaxed_c is not None:
            out["relaxed_c"] = self.relaxed_c
        out["members"] = [m.to_json() for m in self.members]
        return out


def symmetrize(family, reflections=None):
    """Family matched under the full rotation group, congruent members merged."""
    reflections = family.reflections if reflections is None else reflections
    group = rotations(family.dim, reflections)
    kept, keys = [], set()
    for m in family.members:
        key = _normal_form(m, group)
        if key not in keys:
            keys.add(key)
            kept.append(m)
    return EnhancementFamily(tuple(kept), True, family.planar_connected, family.rotund_c,
                             reflections, family.relaxed_c)


def family_from_json(obj, symmetrize_flag=False):
    try:
        dim = int(obj["dim"])
        members = []
        for raw in obj["members"]:
            members.append(Enhancement(str(raw["name"]),
                                       tuple((tuple(u), tuple(v)) for u, v in raw["T"]),
                                       tuple((tuple(u), tuple(v)) for u, v in raw["S"]), dim))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FamilyError):
            raise
        raise FamilyError(f"malformed family: {exc!r}") from exc
    symmetrized = bool(obj.get("symmetrized", True))
    kwargs = dict(planar_connected=bool(obj.get("planar_connected", False)),
                  rotund_c=obj.get("rotund_c"), reflections=bool(obj.get("reflections", False)),
                  relaxed_c=obj.get("relaxed_c"))
    if not symmetrized and symmetrize_flag:
        raw = EnhancementFamily(tuple(members), False, **{**kwargs, "rotund_c": None})
        fam = symmetrize(raw)
        return EnhancementFamily(fam.members, True, **kwargs)
    return EnhancementFamily(tuple(members), symmetrized, **kwargs)


def load_family(path, symmetrize_flag=False):
    with open(path) as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FamilyError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    return family_from_json(obj, symmetrize_flag)


def dump_family(family, path):
    with open(path, "w") as fh:
        json.dump(family.to_json(), fh, indent=1)
        fh.write("\n")


# -- matching on a single configuration ------------------------------------

class Activation(NamedTuple):
    member: str
    rotation: int
    anchor: tuple


@dataclass(frozen=True, eq=False)
class EnhancedGraph:
    base: object
    extra_edges: frozenset
    level: Optional[int]
    activations: tuple = field(default=())

    @property
    def new_edges(self):
        """Extra pairs that are not already open base edges."""
        dom = self.base.domain
        out = set()
        for u, v in self.extra_edges:
            if sum(abs(a - b) for a, b in zip(u, v)) == 1:
                idx = dom.edge_index_of_pair(u, v)
                if idx >= 0 and self.base.open_mask[idx]:
                    continue
            out.add((u, v))
        return frozenset(out)


def _anchor_points(box):
    return box.vertices


def _check_margin(domain, family, indices, search_box):
    if isinstance(domain, Torus):
        for i in indices:
            m = family.members[i]
            if m.footprint_radius > domain.m:
                raise MarginError(f"{m.name}: radius {m.footprint_radius} exceeds torus diameter {domain.m}")
        return
    if search_box is None:
        return
    if not domain.contains_box(search_box):
        raise MarginError("search box is not inside the configuration domain")
    for i in indices:
        need = search_box.expand(family.members[i].footprint_radius)
        if not domain.contains_box(need):
            raise MarginError(f"{family.members[i].name}: footprint of anchors in {search_box.describe()} "
                              f"needs {need.describe()}, domain is {domain.describe()}")


def _default_search(domain, family, indices):
    if isinstance(domain, Torus):
        return None
    r = family.max_footprint_radius(indices)
    lo = tuple(a + r for a in domain.lo)
    hi = tuple(b - r for b in domain.hi)
    if any(h < l for l, h in zip(lo, hi)):
        raise MarginError(f"domain {domain.describe()} too small for footprint radius {r}")
    return Box(lo, hi)


def _in_search(domain, search_box, t):
    if search_box is None:
        return np.ones(len(t), dtype=bool)
    return search_box.contains(t)


def _sorted_acts(acts, family):
    order = {m.name: i for i, m in enumerate(family.members)}
    return sorted(acts, key=lambda a: (order[a.member], a.rotation, a.anchor))


def match_activations(config, family, k_max=None, search_box=None, level=None):
    """All ``(member, rotation, anchor)`` with ``gamma(T) + anchor`` open.

    Scans open edges for the image of a pivot edge of T, solves for the
    translation and verifies the remaining edges. Anchors are restricted to
    ``search_box`` (default: every anchor whose footprint fits in a box
    domain; every vertex on a torus).
    """
    domain = config.domain
    indices = family.member_indices(k_max, level)
    if search_box is None:
        search_box = _default_search(domain, family, indices)
    _check_margin(domain, family, indices, search_box)
    is_open = config.open_mask
    open_idx = np.nonzero(is_open)[0]
    o_lower = domain.edge_lower[open_idx]
    o_axis = domain.edge_axis[open_idx]
    acts = []
    for mi in indices:
        m = family.members[mi]
        lower, axis = m.t_lower_axis
        for ri, g in enumerate(family.group):
            rl, ra = rotate_edge(g, lower, axis)
            sel = o_axis == ra[0]
            t = o_lower[sel] - rl[0]
            t = domain.reduce(t)
            t = t[_in_search(domain, search_box, t)]
            if len(t) == 0:
                continue
            idx = domain.edge_index(rl[None, 1:, :] + t[:, None, :], np.broadcast_to(ra[1:], (len(t), len(ra) - 1)))
            ok = np.all((idx >= 0) & is_open[np.maximum(idx, 0)], axis=1)
            for tt in t[ok]:
                acts.append(Activation(m.name, ri, tuple(int(x) for x in tt)))
    return _sorted_acts(acts, family)


def naive_match(config, family, k_max=None, search_box=None, level=None):
    """Reference matcher: test every (member, rotation, anchor) placement."""
    domain = config.domain
    indices = family.member_indices(k_max, level)
    if search_box is None:
        search_box = _default_search(domain, family, indices)
    _check_margin(domain, family, indices, search_box)
    anchors = domain.vertices if search_box is None else search_box.vertices
    acts = []
    for mi in indices:
        m = family.members[mi]
        for ri, g in enumerate(family.group):
            for t in anchors:
                T_img, _ = m.transformed(g, t)
                ok = True
                for u, v in T_img:
                    idx = domain.edge_index_of_pair(u, v)
                    if idx < 0 or not config.open_mask[idx]:
                        ok = False
                        break
                if ok:
                    acts.append(Activation(m.name, ri, tuple(int(x) for x in domain.reduce(np.asarray(t)))))
    return _sorted_acts(acts, family)


def _reduce_pair(domain, u, v):
    if isinstance(domain, Torus):
        u = tuple(int(x) for x in domain.reduce(np.asarray(u)))
        v = tuple(int(x) for x in domain.reduce(np.asarray(v)))
    return _pair(u, v)


def enhance(config, family, k_max=None, search_box=None, activations=None):
    """Base configuration plus ``gamma(S) + t`` for every activation."""
    if activations is None:
        activations = match_activations(config, family, k_max, search_box)
    by_name = {m.name: m for m in family.members}
    extra = set()
    for a in activations:
        m = by_name[a.member]
        _, S_img = m.transformed(family.group[a.rotation], a.anchor)
        for u, v in S_img:
            extra.add(_reduce_pair(config.domain, u, v))
    return EnhancedGraph(config, frozenset(extra), k_max, tuple(activations))


def activation_count(activations, family, dedupe=True):
    """Number of activations; with ``dedupe`` coinciding images count once."""
    if not dedupe:
        return len(activations)
    by_name = {m.name: m for m in family.members}
    images = set()
    for a in activations:
        images.add((a.member,) + by_name[a.member].transformed(family.group[a.rotation], a.anchor))
    return len(images)


def anchor_box(k, dim=2, scale=1.0):
    """``Lambda_{floor(scale * 2**k)}``."""
    return Box.cube(int(np.floor(scale * 2 ** k)), dim)


def _check_embedded(domain, box, radius):
    """The footprint region must sit in the domain without wrapping."""
    need = box.expand(radius)
    if isinstance(domain, Torus):
        if any(l < -domain.m for l in need.lo) or any(h > domain.m - 1 for h in need.hi):
            raise MarginError(f"{need.describe()} does not embed in torus {domain.m}")
    elif not domain.contains_box(need):
        raise MarginError(f"domain too small: need {need.describe()}, have {domain.describe()}")


def detect_Gk(config, family, k, anchor_scale=1.0):
    """Some level-k member is activated with anchor in Lambda_{2^k}."""
    idx = family.member_indices(level=k)
    if not idx:
        return False
    box = anchor_box(k, family.dim, anchor_scale)
    _check_embedded(config.domain, box, family.max_footprint_radius(idx))
    return bool(match_activations(config, family, level=k, search_box=box))


def check_torus_for_J(torus, family, k, l):
    if not isinstance(torus, Torus):
        raise GeometryError("J_{k,l} lives on a torus")
    if l < 3:
        raise ValueError(f"l must be at least 3, got {l}")
    if torus.m != l * 2 ** k:
        raise GeometryError(f"torus diameter {torus.m} != l * 2^k = {l * 2 ** k}")
    for i in family.member_indices(level=k):
        if family.members[i].footprint_radius > torus.m:
            raise MarginError(f"{family.members[i].name} is not well defined on the torus")


def detect_Jkl(config, family, k, l):
    """Some level-k member is activated anywhere on ``T_{l 2^k}``."""
    check_torus_for_J(config.domain, family, k, l)
    if not family.member_indices(level=k):
        return False
    return bool(match_activations(config, family, level=k))


def check_radius_for_L(family, n):
    small = [m.name for m in family.members if m.radius < n]
    if small:
        raise FamilyError(f"members with radius below {n}: {', '.join(small)}")


def detect_Ln(config, family, n):
    """Some member is activated with anchor in Lambda_{n/2}."""
    check_radius_for_L(family, n)
    box = Box.cube(n // 2, family.dim)
    _check_embedded(config.domain, box, family.max_footprint_radius())
    return bool(match_activations(config, family, search_box=box))


# -- vectorized placement tables -------------------------------------------

@dataclass
class Placements:
    """Every placement of one member over a set of anchors.

    ``t_edges[i]`` are the domain edge indices of ``gamma(T) + anchor``.
    """
    member: int
    rotation: np.ndarray
    anchor: np.ndarray
    t_edges: np.ndarray

    def __len__(self):
        return len(self.rotation)


def placement_table(domain, family, indices, anchors, drop_outside=False):
    """Placements of members ``indices`` at ``anchors`` (shape (A, d)).

    Placements whose T leaves a box domain raise ``MarginError`` unless
    ``drop_outside`` is set, in which case they are discarded.
    """
    anchors = np.asarray(anchors, dtype=np.int64).reshape(-1, family.dim)
    out = []
    for mi in indices:
        m = family.members[mi]
        lower, axis = m.t_lower_axis
        rots, ancs, edges = [], [], []
        for ri, g in enumerate(family.group):
            rl, ra = rotate_edge(g, lower, axis)
            idx = domain.edge_index(rl[None] + anchors[:, None], np.broadcast_to(ra, (len(anchors), len(ra))))
            ok = np.all(idx >= 0, axis=1)
            if not ok.all() and not drop_outside:
                raise MarginError(f"{m.name}: pattern leaves the domain for some anchors")
            rots.append(np.full(int(ok.sum()), ri))
            ancs.append(anchors[ok])
            edges.append(idx[ok])
        out.append(Placements(mi, np.concatenate(rots), np.concatenate(ancs), np.concatenate(edges)))
    return out


def s_images(domain, family, placements):
    """Coordinates of ``gamma(S) + anchor``: shape (P, |S|, 2, d), torus-reduced."""
    m = family.members[placements.member]
    S = m.s_array
    mats = np.stack([g.array for g in family.group])[placements.rotation]
    img = np.einsum("pij,snj->psni", mats, S) + placements.anchor[:, None, None, :]
    return domain.reduce(img)
