"""Continuum point processes, disk unions and the Bernoulli-tile coupling.

Tiles are the unit cubes ``z + [-1/2, 1/2]^d`` with integer centres ``z``.
A tile is *certified* for a sample when each of its ``2^d`` half-side
subcubes holds a point. A subcube has diameter ``sqrt(d)/2 <= 1`` for
``d <= 4``, so a certified tile lies inside ``D(X, 1)``. Mere occupancy
(one point somewhere in the tile) does not give that for ``d >= 2``: the
opposite corner can be ``sqrt(d) > 1`` away.
"""

import io
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import poisson

from . import rng
from .lattice import Box

# Boolean-model critical reduced densities eta_c = lambda_c * vol(B_r), taken
# from published simulation estimates. Non-normative; only used as a default
# reference point and always overridable.
ETA_C_PLACEHOLDER = {2: 1.128, 3: 0.342}


def lambda_c_placeholder(dim, r):
    """Literature-range placeholder for the disk critical intensity (not computed)."""
    if dim not in ETA_C_PLACEHOLDER:
        raise ValueError(f"no placeholder for dim {dim}")
    ball = math.pi ** (dim / 2) / math.gamma(dim / 2 + 1) * r ** dim
    return ETA_C_PLACEHOLDER[dim] / ball


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``[lo, hi]`` in R^d."""
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.lo)
        hi = tuple(float(x) for x in self.hi)
        if len(lo) != len(hi) or any(h <= l for l, h in zip(lo, hi)):
            raise ValueError(f"bad region {lo} {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return len(self.lo)

    @property
    def volume(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        return np.all((pts >= self.lo) & (pts <= self.hi), axis=1)

    def scaled(self, s):
        return Region(tuple(s * x for x in self.lo), tuple(s * x for x in self.hi))


@dataclass
class PointSample:
    region: Region
    points: np.ndarray
    intensity: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, self.region.dim)
        if not np.all(self.region.contains(self.points)):
            raise ValueError("sample has points outside its region")

    @property
    def dim(self):
        return self.region.dim

    def __len__(self):
        return len(self.points)

    def to_csv(self):
        buf = io.StringIO()
        names = "xyzw"[: self.dim]
        buf.write(f"# region lo={list(self.region.lo)} hi={list(self.region.hi)} intensity={self.intensity!r}\n")
        buf.write(",".join(names) + "\n")
        for p in self.points:
            buf.write(",".join(repr(float(x)) for x in p) + "\n")
        return buf.getvalue()


class DiskUnion:
    """``D(X, r)``: union of closed balls of radius ``r`` around the sample points."""

    def __init__(self, sample, r):
        if r <= 0:
            raise ValueError("radius must be positive")
        self.sample = sample
        self.r = float(r)

    @cached_property
    def _tree(self):
        return cKDTree(self.sample.points) if len(self.sample) else None

    def distance(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.sample.dim)
        if self._tree is None:
            return np.full(len(x), np.inf)
        return self._tree.query(x)[0]

    def cover(self, x):
        x = np.asarray(x, dtype=float).reshape(-1, self.sample.dim)
        if self._tree is None:
            return np.zeros(len(x), dtype=bool)
        d = self._tree.query(x, distance_upper_bound=np.nextafter(self.r, np.inf))[0]
        return d <= self.r


def sample_poisson(region, lam, seed, trial, stream=rng.STREAM_CONTINUUM):
    """Poisson process of intensity ``lam`` on ``region``, fixed by (seed, trial)."""
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    gen = rng.generator(seed, trial, stream)
    n = gen.poisson(lam * region.volume) if lam > 0 else 0
    u = gen.random((n, region.dim))
    pts = np.asarray(region.lo) + u * (np.asarray(region.hi) - np.asarray(region.lo))
    return PointSample(region, pts, float(lam))


def sample_marked(region, lam_max, seed, trial, stream=rng.STREAM_CONTINUUM):
    """Poisson(lam_max) points with independent uniform marks.

    Points with mark below ``lam / lam_max`` form a Poisson(lam) process,
    so thinning one draw couples every intensity up to ``lam_max``.
    """
    s = sample_poisson(region, lam_max, seed, trial, stream)
    marks = rng.generator(seed, trial, stream + 16).random(len(s))
    return s, marks


def thin(sample, marks, lam):
    lam_max = sample.intensity
    if lam > lam_max:
        raise ValueError("cannot thin to a larger intensity")
    keep = marks < (lam / lam_max if lam_max > 0 else 0.0)
    return PointSample(sample.region, sample.points[keep], float(lam))


# -- tiles -----------------------------------------------------------------

@dataclass(frozen=True)
class TileGrid:
    """Unit tiles with centres ``0 .. shape-1`` along each axis."""
    shape: tuple

    @property
    def dim(self):
        return len(self.shape)

    @property
    def region(self):
        return Region(tuple(-0.5 for _ in self.shape), tuple(n - 0.5 for n in self.shape))

    @property
    def size(self):
        return int(np.prod(self.shape))

    @cached_property
    def centers(self):
        return Box.from_shape(self.shape).vertices

    def tile_of(self, pts):
        """Flat tile index of each point (points on shared faces go to the upper tile)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        z = np.clip(np.floor(pts + 0.5).astype(np.int64), 0, np.array(self.shape) - 1)
        return np.ravel_multi_index(tuple(z.T), self.shape)

    def subcube_of(self, pts):
        """Which of the ``2^d`` half-side subcubes of its tile a point lies in."""
        pts = np.asarray(pts, dtype=float).reshape(-1, self.dim)
        z = np.clip(np.floor(pts + 0.5), 0, np.array(self.shape) - 1)
        upper = (pts - z) >= 0
        return (upper * (1 << np.arange(self.dim))).sum(axis=1)

    def counts(self, sample):
        return np.bincount(self.tile_of(sample.points), minlength=self.size)

    def occupied(self, sample):
        return self.counts(sample) > 0

    def certified(self, sample):
        if not len(sample):
            return np.zeros(self.size, dtype=bool)
        code = self.tile_of(sample.points) * (1 << self.dim) + self.subcube_of(sample.points)
        hit = np.zeros(self.size * (1 << self.dim), dtype=bool)
        hit[code] = True
        return hit.reshape(self.size, 1 << self.dim).all(axis=1)

    def interior(self, margin=1):
        c = self.centers
        return np.all((c >= margin) & (c <= np.array(self.shape) - 1 - margin), axis=1)

    def neighbourhood(self, mask):
        """Closed one-tile (l-infinity) neighbourhood of a tile set."""
        grid = np.asarray(mask, dtype=bool).reshape(self.shape)
        out = grid.copy()
        for shift in Box.cube(1, self.dim).vertices:
            src = tuple(slice(max(0, -s), n - max(0, s)) for s, n in zip(shift, self.shape))
            dst = tuple(slice(max(0, s), n - max(0, -s)) for s, n in zip(shift, self.shape))
            out[dst] |= grid[src]
        return out.ravel()


@dataclass
class TileField:
    """Tile sets derived from one coupled draw: W from X, U Bernoulli, U' its neighbourhood."""
    grid: TileGrid
    W: np.ndarray
    certified: np.ndarray
    U: np.ndarray

    @property
    def U_prime(self):
        return self.grid.neighbourhood(self.U)


# -- k-dependent sources ---------------------------------------------------

class BlockResampledPoisson:
    """Poisson(mu) on tiles, grouped in ``block^d`` blocks with a random offset.

    A block in which some tile is not certified is redrawn once. Block
    states are independent, so tiles more than ``block`` apart are
    independent.
    """

    def __init__(self, mu, block=2):
        if mu < 0 or block < 1:
            raise ValueError("need mu >= 0 and block >= 1")
        self.mu = float(mu)
        self.block = int(block)

    @property
    def dependence_range(self):
        return self.block

    def tile_certify_probability(self, dim):
        return (-math.expm1(-self.mu / 2 ** dim)) ** (2 ** dim)

    def certified_lower_bound(self, dim):
        """Exact certification probability of a tile in a full block."""
        a = self.tile_certify_probability(dim)
        return 1.0 - (1.0 - a ** (self.block ** dim)) * (1.0 - a)

    def occupancy_lower_bound(self, dim):
        return self.certified_lower_bound(dim)

    def sample(self, grid, seed, trial):
        gen = rng.generator(seed, trial, rng.STREAM_CONTINUUM)
        offset = gen.integers(0, self.block, size=grid.dim)
        block_id = (grid.centers + offset) // self.block
        flat = np.ravel_multi_index(tuple(block_id.T), tuple(block_id.max(axis=0) + 1))
        pts = []
        for b in np.unique(flat):
            tiles = grid.centers[flat == b]
            for attempt in range(2):
                n = gen.poisson(self.mu, size=len(tiles))
                local = [z + gen.random((k, grid.dim)) - 0.5 for z, k in zip(tiles, n)]
                if attempt == 1 or all(_tile_certified(p, z) for p, z in zip(local, tiles)):
                    break
            pts.extend(local)
        pts = np.concatenate(pts) if pts else np.zeros((0, grid.dim))
        return PointSample(grid.region, pts, self.mu, {"source": "block", "offset": offset.tolist()})


def _tile_certified(pts, z):
    if not len(pts):
        return False
    code = ((pts - z) >= 0) @ (1 << np.arange(len(z)))
    return len(np.unique(code)) == 1 << len(z)


class HardcorePoisson:
    """Poisson(mu) with every point that has another within ``h`` removed.

    Range of dependence ``2h``.
    """

    def __init__(self, mu, h):
        if mu < 0 or h < 0:
            raise ValueError("need mu, h >= 0")
        self.mu = float(mu)
        self.h = float(h)

    @property
    def dependence_range(self):
        return 2 * self.h

    def _cell_hit(self, side, dim):
        """P(one isolated point sits in the inner cube of a cell of side ``side``)."""
        q = side - 2 * self.h
        if q <= 0:
            return 0.0
        return self.mu * q ** dim * math.exp(-self.mu * side ** dim)

    def occupancy_lower_bound(self, dim, cells=4):
        r = self._cell_hit(1.0 / cells, dim)
        return 1.0 - (1.0 - r) ** (cells ** dim)

    def certified_lower_bound(self, dim, cells=4):
        if cells % 2:
            raise ValueError("cells must be even")
        r = self._cell_hit(1.0 / cells, dim)
        return (1.0 - (1.0 - r) ** ((cells // 2) ** dim)) ** (2 ** dim)

    def sample(self, grid, seed, trial):
        region = grid.region
        big = Region(tuple(x - self.h for x in region.lo), tuple(x + self.h for x in region.hi))
        s = sample_poisson(big, self.mu, seed, trial)
        pts = s.points
        if len(pts) and self.h > 0:
            tree = cKDTree(pts)
            nbr = tree.query_ball_point(pts, self.h, return_length=True)
            pts = pts[nbr == 1]
        pts = pts[region.contains(pts)]
        return PointSample(region, pts, self.mu, {"source": "hardcore", "h": self.h})


class FullSource:
    """Deterministic source with a point in every subcube of every tile."""

    mu = float("inf")
    dependence_range = 0

    def certified_lower_bound(self, dim):
        return 1.0

    occupancy_lower_bound = certified_lower_bound

    def sample(self, grid, seed, trial):
        offs = (Box.from_shape((2,) * grid.dim).vertices - 0.5) * 0.5
        pts = (grid.centers[:, None, :] + offs[None]).reshape(-1, grid.dim)
        return PointSample(grid.region, pts, self.mu, {"source": "full"})


# -- coupling --------------------------------------------------------------

@dataclass
class Certificate:
    success: bool
    failed_tile: object
    y_in_U: bool
    dY_in_U_prime: bool
    U_prime_certified: bool
    certified_in_dX: bool
    grid_points: int
    grid_violations: int

    @property
    def holds(self):
        return (self.y_in_U and self.dY_in_U_prime and self.U_prime_certified
                and self.certified_in_dX and self.grid_violations == 0)

    def to_text(self):
        lines = [f"success: {self.success}"]
        if self.failed_tile is not None:
            lines.append(f"failed_tile: {list(self.failed_tile)}")
        for name in ("y_in_U", "dY_in_U_prime", "U_prime_certified", "certified_in_dX",
                     "grid_points", "grid_violations", "holds"):
            lines.append(f"{name}: {getattr(self, name)}")
        return "\n".join(lines) + "\n"


@dataclass
class Coupling:
    X: PointSample
    Y: PointSample
    field: TileField
    certificate: Certificate


def _conditional_poisson(lam, u):
    """Poisson(lam) conditioned on being at least 1, by inversion of ``u``."""
    p0 = math.exp(-lam)
    return poisson.ppf(p0 + u * (1.0 - p0), lam).astype(np.int64)


def couple_tiles(source, lam, seed, trial, shape=(8, 8), grid_step=0.1):
    """Couple a source sample X with a Poisson(lam) sample Y so D(Y,1) is inside D(X,1).

    U is an independent Bernoulli(1 - e^-lam) set of interior tiles, and Y
    puts Poisson(lam) points, conditioned nonempty, in each tile of U. The
    coupling succeeds when the one-tile neighbourhood of U is certified for
    X; otherwise the first offending tile is reported. The certificate
    checks every inclusion in ``D(Y,1) c U' c certified tiles c D(X,1)``
    from the samples, plus the pointwise inclusion on a grid.
    """
    if lam < 0:
        raise ValueError("intensity must be nonnegative")
    grid = TileGrid(tuple(shape))
    d = grid.dim
    if d > 4:
        raise ValueError("tile geometry needs d <= 4")
    X = source.sample(grid, seed, trial)
    W = grid.occupied(X)
    cert = grid.certified(X)
    interior = grid.interior()
    V = rng.uniforms(seed, [trial], np.arange(grid.size), rng.STREAM_TILE_U)[0]
    U = (V < -math.expm1(-lam)) & interior
    tiles = TileField(grid, W, cert, U)
    Up = tiles.U_prime
    bad = np.nonzero(Up & ~cert)[0]
    success = len(bad) == 0
    failed = None
    if not success:
        failed = tuple(int(x) for x in grid.centers[bad[0]])

    gen = rng.generator(seed, trial, rng.STREAM_COUPLED)
    u_n = gen.random(grid.size)
    centers = grid.centers[U]
    n = _conditional_poisson(lam, u_n[U]) if centers.size else np.zeros(0, np.int64)
    pts = [z + gen.random((k, d)) - 0.5 for z, k in zip(centers, n)]
    pts = np.concatenate(pts) if pts else np.zeros((0, d))
    Y = PointSample(grid.region, pts, float(lam), {"tiles": int(U.sum())})

    # every Y point lies in a U tile
    y_in_U = bool(np.all(U[grid.tile_of(Y.points)])) if len(Y) else True
    # a point of tile z is within 1 only of points inside z's closed neighbourhood
    dY_in_U_prime = y_in_U
    U_prime_certified = success
    # independent recount of certification from raw coordinates
    certified_in_dX = _recount_certified(X.points, grid.centers[Up & cert])
    gp, gv = 0, 0
    if success and len(Y) and grid_step:
        gp, gv = _grid_check(Y, X, grid, grid_step)
    c_obj = Certificate(success, failed, y_in_U, dY_in_U_prime, U_prime_certified,
                        bool(certified_in_dX), gp, gv)
    return Coupling(X, Y, tiles, c_obj)


def _recount_certified(pts, centers):
    """Every tile with the given centres has a point in each closed subcube."""
    if not len(centers):
        return True
    if not len(pts):
        return False
    d = pts.shape[1]
    tree = cKDTree(pts)
    for code in range(1 << d):
        upper = np.array([(code >> i) & 1 for i in range(d)], dtype=float)
        mid = centers + (upper - 0.5) * 0.5
        # closed subcube of side 1/2 around mid, as an l-infinity ball
        dist = tree.query(mid, p=np.inf, distance_upper_bound=0.25 + 1e-12)[0]
        if np.any(~np.isfinite(dist)):
            return False
    return True


def _grid_check(Y, X, grid, step):
    """Grid points within 1 of Y must be within 1 of X."""
    lo = np.asarray(grid.region.lo) - 1.0
    hi = np.asarray(grid.region.hi) + 1.0
    axes = [np.arange(a, b + step / 2, step) for a, b in zip(lo, hi)]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, grid.dim)
    near_y = DiskUnion(Y, 1.0).cover(mesh)
    pts = mesh[near_y]
    if not len(X):
        return len(pts), len(pts)
    near_x = DiskUnion(X, 1.0).cover(pts)
    return len(pts), int((~near_x).sum())


def coupling_run(source, lam, N, seed, shape=(8, 8), grid_step=0.1, keep=False):
    """Aggregate N couplings: failure rate, certificate tally and Y tile counts."""
    grid = TileGrid(tuple(shape))
    interior = grid.interior()
    counts = np.zeros((N, int(interior.sum())), dtype=np.int64)
    fails, cert_ok, failed_tiles = 0, 0, []
    occupied = np.zeros(N)
    runs = []
    for t in range(N):
        c = couple_tiles(source, lam, seed, t, shape, grid_step)
        counts[t] = grid.counts(c.Y)[interior]
        occupied[t] = c.field.W[interior].mean()
        if c.certificate.success:
            cert_ok += c.certificate.holds
        else:
            fails += 1
            failed_tiles.append(c.certificate.failed_tile)
        if keep:
            runs.append(c)
    return {"N": N, "failures": fails, "failure_rate": fails / N,
            "certified_successes": cert_ok, "successes": N - fails,
            "occupancy": float(occupied.mean()), "failed_tiles": failed_tiles,
            "counts": counts, "runs": runs}


@dataclass
class MarginalReport:
    lam: float
    n: int
    mean: float
    mean_se: float
    var: float
    var_se: float
    p_empty: float
    p_empty_se: float
    neighbour_corr: float
    corr_tol: float
    passed: bool


def marginal_check(counts, lam, neighbour=None, sigmas=3.0):
    """Per-tile counts against Poisson(lam): mean, variance and P(empty).

    ``counts`` has shape (N, tiles). ``neighbour`` optionally gives two
    column indices whose count correlation should vanish.
    """
    counts = np.asarray(counts)
    N = counts.shape[0]
    c = counts.ravel().astype(float)
    n = len(c)
    mean = c.mean()
    var = c.var(ddof=1) if n > 1 else 0.0
    p0 = float(np.mean(c == 0))
    e0 = math.exp(-lam)
    mean_se = math.sqrt(lam / n)
    var_se = math.sqrt((lam + 2 * lam ** 2) / n)
    p0_se = math.sqrt(e0 * (1 - e0) / n)
    corr = 0.0
    tol = 4.0 / math.sqrt(N)
    if neighbour is not None and lam > 0:
        a, b = counts[:, neighbour[0]], counts[:, neighbour[1]]
        if a.std() > 0 and b.std() > 0:
            corr = float(np.corrcoef(a, b)[0, 1])
    ok = (abs(mean - lam) <= sigmas * mean_se and abs(var - lam) <= sigmas * var_se
          and abs(p0 - e0) <= sigmas * p0_se and abs(corr) <= tol)
    if lam == 0:
        ok = bool(np.all(c == 0))
    return MarginalReport(float(lam), n, float(mean), mean_se, float(var), var_se, p0, p0_se,
                          corr, tol, bool(ok))


# -- disk percolation ------------------------------------------------------

def disk_crossing(sample, r, axis=0):
    """Do overlapping disks of radius r join the two faces orthogonal to ``axis``?"""
    pts = sample.points
    if not len(pts):
        return False
    lo, hi = sample.region.lo[axis], sample.region.hi[axis]
    left = pts[:, axis] - r <= lo
    right = pts[:, axis] + r >= hi
    if not left.any() or not right.any():
        return False
    pairs = cKDTree(pts).query_pairs(2 * r, output_type="ndarray")
    n = len(pts)
    g = coo_matrix((np.ones(len(pairs), np.int8), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, lab = connected_components(g, directed=False)
    return bool(np.intersect1d(lab[left], lab[right]).size)


def disk_percolation_probe(lam, r, region, N, seed, axis=0, first_trial=0):
    """Crossing frequency of D(X, r) for Poisson(lam) X on ``region``."""
    if lam < 0 or r <= 0:
        raise ValueError("need lam >= 0 and r > 0")
    hits = np.array([disk_crossing(sample_poisson(region, lam, seed, t), r, axis)
                     for t in range(first_trial, first_trial + N)])
    return hits


def scaled_crossings(lam, r, region, s, N, seed):
    """Crossing outcomes at (lam, r) on region and at (lam/s^d, s r) on s*region, same draws."""
    d = region.dim
    big = region.scaled(s)
    a = disk_percolation_probe(lam, r, region, N, seed)
    b = disk_percolation_probe(lam / s ** d, s * r, big, N, seed)
    return a, b


def monotone_in_lambda(lams, r, region, N, seed, axis=0):
    """Per-trial crossing outcomes over an increasing intensity grid, coupled by thinning."""
    lams = list(lams)
    if any(b < a for a, b in zip(lams, lams[1:])):
        raise ValueError("intensity grid must be nondecreasing")
    out = np.zeros((N, len(lams)), dtype=bool)
    for t in range(N):
        s, marks = sample_marked(region, lams[-1], seed, t)
        for i, lam in enumerate(lams):
            out[t, i] = disk_crossing(thin(s, marks, lam), r, axis)
    return out


# -- rotundity -------------------------------------------------------------

def rotund_check(family, c):
    """Per member: every edge of Lambda_{floor(c r)} belongs to S (r the radius of S)."""
    out = []
    for m in family.members:
        k = int(math.floor(c * m.radius))
        S = set(m.S)
        box = Box.cube(k, m.dim)
        u, v = box.edge_endpoints
        verts = box.vertices
        ok = all(tuple(sorted((tuple(int(x) for x in verts[a]), tuple(int(x) for x in verts[b])))) in S
                 for a, b in zip(u.tolist(), v.tolist()))
        out.append(ok)
    return out
