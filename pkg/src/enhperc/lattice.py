"""Integer-lattice geometry: boxes, tori, canonical edge order, rotations.

An edge is stored as ``(lower, axis)``: ``lower`` is the endpoint with the
smaller coordinate along ``axis`` and the other endpoint is
``lower + e_axis``. On a torus "lower" is taken before reduction, so the
seam edge from ``m - 1`` to ``-m`` has lower endpoint ``m - 1``.

Edge indices run over ``[0, E)`` in lexicographic order of the lower
endpoint, then axis.
"""

from dataclasses import dataclass
from functools import cached_property
import itertools

import numpy as np


class GeometryError(ValueError):
    pass


def _as_points(v, dim):
    arr = np.asarray(v, dtype=np.int64)
    if arr.shape[-1] != dim:
        raise GeometryError(f"expected {dim}-dimensional points, got shape {arr.shape}")
    return arr


class _Domain:
    """Shared vectorized edge machinery for boxes and tori."""

    dim: int

    @cached_property
    def vertices(self):
        """All vertices, shape (V, d), in index order."""
        axes = [np.arange(lo, lo + s) for lo, s in zip(self._lo, self.shape)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1).astype(np.int64)

    @property
    def num_vertices(self):
        return int(np.prod(self.shape))

    @cached_property
    def _strides(self):
        strides = np.ones(self.dim, dtype=np.int64)
        for i in range(self.dim - 2, -1, -1):
            strides[i] = strides[i + 1] * self.shape[i + 1]
        return strides

    def vertex_index(self, v):
        """Index of vertices ``v`` (shape (..., d)); -1 where outside."""
        v = self.reduce(_as_points(v, self.dim))
        rel = v - np.asarray(self._lo, dtype=np.int64)
        inside = np.all((rel >= 0) & (rel < np.asarray(self.shape)), axis=-1)
        idx = rel @ self._strides
        return np.where(inside, idx, -1)

    @cached_property
    def _edge_lookup(self):
        lower = self.vertices
        table = np.full(self.num_vertices * self.dim, -1, dtype=np.int64)
        exists = np.empty((self.num_vertices, self.dim), dtype=bool)
        for a in range(self.dim):
            step = np.zeros(self.dim, dtype=np.int64)
            step[a] = 1
            exists[:, a] = self._edge_exists(lower, step)
        flat = exists.ravel()
        table[flat] = np.arange(int(flat.sum()), dtype=np.int64)
        return table

    @property
    def num_edges(self):
        return int((self._edge_lookup >= 0).sum())

    @cached_property
    def edge_lower(self):
        """Lower endpoints of all edges, shape (E, d)."""
        pos = np.nonzero(self._edge_lookup >= 0)[0]
        return self.vertices[pos // self.dim]

    @cached_property
    def edge_axis(self):
        pos = np.nonzero(self._edge_lookup >= 0)[0]
        return (pos % self.dim).astype(np.int64)

    @cached_property
    def edge_endpoints(self):
        """Vertex indices ``(u, v)`` of every edge, each of shape (E,)."""
        lower = self.edge_lower
        upper = lower.copy()
        upper[np.arange(len(lower)), self.edge_axis] += 1
        return self.vertex_index(lower), self.vertex_index(upper)

    def edge_index(self, lower, axis):
        """Canonical index of edges ``(lower, axis)``; -1 where absent."""
        vi = self.vertex_index(lower)
        axis = np.asarray(axis, dtype=np.int64)
        upper = _as_points(lower, self.dim).copy()
        upper = upper + np.eye(self.dim, dtype=np.int64)[axis]
        ok = (vi >= 0) & (self.vertex_index(upper) >= 0)
        flat = np.where(ok, vi * self.dim + axis, 0)
        return np.where(ok, self._edge_lookup[flat], -1)

    def edge_index_of_pair(self, u, v):
        """Index of nearest-neighbour pairs ``(u, v)`` (either order); -1 if absent."""
        u = _as_points(u, self.dim)
        v = _as_points(v, self.dim)
        # an unreduced unit step names the edge even on a side-2 torus,
        # where two edges join the same vertex pair
        raw = v - u
        unit = (np.abs(raw).sum(axis=-1) == 1)[..., None]
        diff = np.where(unit, raw, self.reduce(raw))
        if np.any(np.abs(diff).sum(axis=-1) != 1):
            raise GeometryError("pair is not a nearest-neighbour edge")
        axis = np.argmax(np.abs(diff), axis=-1)
        forward = diff.max(axis=-1) > 0
        lower = np.where(forward[..., None], u, v)
        return self.edge_index(lower, axis)

    def edges(self):
        """Ordered list of ``(lower tuple, axis)``."""
        return [(tuple(int(x) for x in lw), int(a)) for lw, a in zip(self.edge_lower, self.edge_axis)]


@dataclass(frozen=True)
class Box(_Domain):
    """Integer box ``[lo_1, hi_1] x ... x [lo_d, hi_d]`` (inclusive)."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(int(x) for x in self.lo)
        hi = tuple(int(x) for x in self.hi)
        if len(lo) != len(hi) or not lo:
            raise GeometryError("lo and hi must be nonempty and of equal length")
        if any(h < l for l, h in zip(lo, hi)):
            raise GeometryError(f"empty box {lo}..{hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def centered(cls, half_widths, offset=None):
        """``Lambda_{n_1,...,n_d}`` translated by ``offset``."""
        half_widths = tuple(int(n) for n in half_widths)
        if any(n < 0 for n in half_widths):
            raise GeometryError("half widths must be nonnegative")
        offset = tuple(offset) if offset is not None else (0,) * len(half_widths)
        return cls(tuple(o - n for o, n in zip(offset, half_widths)),
                   tuple(o + n for o, n in zip(offset, half_widths)))

    @classmethod
    def cube(cls, n, dim=2):
        """``Lambda_n = [-n, n]^d``."""
        return cls.centered((n,) * dim)

    @classmethod
    def from_shape(cls, shape, lo=None):
        """Box with ``shape[i]`` vertices along axis i."""
        lo = tuple(lo) if lo is not None else (0,) * len(shape)
        return cls(lo, tuple(l + s - 1 for l, s in zip(lo, shape)))

    @property
    def dim(self):
        return len(self.lo)

    @property
    def shape(self):
        return tuple(h - l + 1 for l, h in zip(self.lo, self.hi))

    @property
    def _lo(self):
        return self.lo

    @property
    def half_widths(self):
        return tuple((h - l) / 2 if (h - l) % 2 else (h - l) // 2 for l, h in zip(self.lo, self.hi))

    @property
    def center(self):
        return tuple((l + h) / 2 for l, h in zip(self.lo, self.hi))

    def reduce(self, v):
        return v

    def _edge_exists(self, lower, step):
        return np.all(lower + step <= np.asarray(self.hi), axis=1)

    def contains(self, v):
        v = _as_points(v, self.dim)
        return np.all((v >= np.asarray(self.lo)) & (v <= np.asarray(self.hi)), axis=-1)

    def contains_box(self, other):
        return all(a <= b for a, b in zip(self.lo, other.lo)) and all(
            a >= b for a, b in zip(self.hi, other.hi))

    def expand(self, r):
        """Box grown by ``r`` in every direction (l-infinity neighbourhood)."""
        return Box(tuple(x - r for x in self.lo), tuple(x + r for x in self.hi))

    def translate(self, t):
        return Box(tuple(x + s for x, s in zip(self.lo, t)), tuple(x + s for x, s in zip(self.hi, t)))

    def face(self, axis, side):
        """Vertex indices of the face orthogonal to ``axis``; side 0 = low, 1 = high."""
        coord = self.lo[axis] if side == 0 else self.hi[axis]
        return np.nonzero(self.vertices[:, axis] == coord)[0]

    def boundary(self):
        """Vertex indices of the inner vertex boundary."""
        v = self.vertices
        on = np.any((v == np.asarray(self.lo)) | (v == np.asarray(self.hi)), axis=1)
        return np.nonzero(on)[0]

    def describe(self):
        return "box " + ",".join(map(str, self.lo)) + " " + ",".join(map(str, self.hi))


@dataclass(frozen=True)
class Torus(_Domain):
    """``T_m``: the box ``[-m, m)^d`` with opposite faces identified."""

    dim: int
    m: int

    def __post_init__(self):
        if self.dim < 1 or self.m < 1:
            raise GeometryError("torus needs dim >= 1 and m >= 1")

    @property
    def diameter(self):
        return self.m

    @property
    def shape(self):
        return (2 * self.m,) * self.dim

    @property
    def _lo(self):
        return (-self.m,) * self.dim

    def reduce(self, v):
        """Canonical representative in ``[-m, m)^d``."""
        return np.mod(np.asarray(v, dtype=np.int64) + self.m, 2 * self.m) - self.m

    def _edge_exists(self, lower, step):
        return np.ones(len(lower), dtype=bool)

    def contains(self, v):
        return np.ones(np.asarray(v).shape[:-1], dtype=bool)

    def describe(self):
        return f"torus {self.m}"


def edges_of_box(box):
    return box.edges()


def edges_of_torus(torus):
    return torus.edges()


@dataclass(frozen=True)
class LatticeRotation:
    """Signed permutation matrix acting on Z^d (column vectors)."""

    matrix: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrix", tuple(tuple(int(x) for x in row) for row in self.matrix))

    @property
    def dim(self):
        return len(self.matrix)

    @cached_property
    def array(self):
        return np.array(self.matrix, dtype=np.int64)

    @property
    def det(self):
        return int(round(np.linalg.det(self.array)))

    def apply(self, v):
        """Rotate points ``v`` of shape (..., d)."""
        return np.asarray(v, dtype=np.int64) @ self.array.T

    def __matmul__(self, other):
        return LatticeRotation(tuple(map(tuple, self.array @ other.array)))

    def inverse(self):
        return LatticeRotation(tuple(map(tuple, self.array.T)))

    def is_identity(self):
        return bool(np.array_equal(self.array, np.eye(self.dim, dtype=np.int64)))


def rotations(dim, reflections=False):
    """All orientation-preserving signed permutations of Z^dim, identity first.

    With ``reflections`` the determinant -1 elements are appended as well.
    For ``dim == 2`` the order is identity, rot90, rot180, rot270.
    """
    if dim not in (2, 3):
        raise GeometryError(f"rotations are supported for dim 2 or 3, not {dim}")
    if dim == 2:
        r90 = np.array([[0, -1], [1, 0]])
        mats = [np.linalg.matrix_power(r90, i) for i in range(4)]
    else:
        mats = []
        for perm in itertools.permutations(range(dim)):
            for signs in itertools.product((1, -1), repeat=dim):
                m = np.zeros((dim, dim), dtype=np.int64)
                for row, (col, s) in enumerate(zip(perm, signs)):
                    m[row, col] = s
                if round(np.linalg.det(m)) == 1:
                    mats.append(m)
    if reflections:
        flip = np.eye(dim, dtype=np.int64)
        flip[0, 0] = -1
        mats = mats + [m @ flip for m in mats]
    return [LatticeRotation(tuple(map(tuple, m))) for m in mats]


def rotate_edge(rotation, lower, axis):
    """Image of nearest-neighbour edges ``(lower, axis)``; returns (lower', axis')."""
    lower = np.asarray(lower, dtype=np.int64)
    axis = np.asarray(axis, dtype=np.int64)
    dim = lower.shape[-1]
    upper = lower + np.eye(dim, dtype=np.int64)[axis]
    a = rotation.apply(lower)
    b = rotation.apply(upper)
    diff = b - a
    new_axis = np.argmax(np.abs(diff), axis=-1)
    forward = np.take_along_axis(diff, new_axis[..., None], axis=-1)[..., 0] > 0
    new_lower = np.where(forward[..., None], a, b)
    return new_lower, new_axis
