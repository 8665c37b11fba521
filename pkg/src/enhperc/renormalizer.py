"""Renormalized site field built from box crossings.

Site ``z`` of the renormalized lattice sits at ``s z`` with spacing
``s = 4 * 2^k``; its tile is the translate of ``Lambda_{2*2^k}``. The site
is open when the wide box ``R1 = Lambda_{6*2^k, 2*2^k}`` is crossed
horizontally and the tall box ``R2 = Lambda_{2*2^k, 6*2^k}`` vertically,
both in the model enhanced by the members of level at most ``k-1``.
"""

from dataclasses import dataclass, field
from itertools import product
import io
import math

import numpy as np

from . import rng
from .events import crossing_event
from .lattice import Box, GeometryError
from .mc_estimator import outcomes, verdict


@dataclass(frozen=True)
class RenormSite:
    z: tuple
    k: int

    @property
    def spacing(self):
        return 4 * 2 ** self.k

    @property
    def center(self):
        return tuple(self.spacing * c for c in self.z)

    @property
    def tile(self):
        return Box.centered((2 * 2 ** self.k,) * 2, self.center)

    @property
    def R1(self):
        return Box.centered((6 * 2 ** self.k, 2 * 2 ** self.k), self.center)

    @property
    def R2(self):
        return Box.centered((2 * 2 ** self.k, 6 * 2 ** self.k), self.center)


def sites(k, grid_extent):
    return [RenormSite(z, k) for z in product(range(grid_extent), repeat=2)]


def _truncation(k):
    if k < 1:
        raise ValueError("renormalization needs k >= 1")
    return k - 1


def reach(family, k):
    """Largest footprint radius among members of level at most k-1 (0 without a family)."""
    if family is None:
        return 0
    return family.max_footprint_radius(family.member_indices(_truncation(k)))


def window(k, grid_extent, family=None):
    """Smallest box holding every site's crossing events with their margins."""
    rho = reach(family, k)
    ss = sites(k, grid_extent)
    lo = np.min([s.R1.lo for s in ss] + [s.R2.lo for s in ss], axis=0) - 2 * rho
    hi = np.max([s.R1.hi for s in ss] + [s.R2.hi for s in ss], axis=0) + 2 * rho
    return Box(tuple(int(x) for x in lo), tuple(int(x) for x in hi))


def site_events(k, grid_extent, family=None, domain=None):
    """``[(H(R1), V(R2)) per site]`` compiled on one common domain."""
    kt = _truncation(k)
    need = window(k, grid_extent, family)
    if domain is None:
        domain = need
    elif not domain.contains_box(need):
        raise GeometryError(f"window {domain.describe()} does not hold {need.describe()}")
    fam = family if family is not None and family.member_indices(kt) else None
    out = []
    for s in sites(k, grid_extent):
        h = crossing_event(s.R1, "H", fam, kt if fam else None, domain, name="H_R1")
        v = crossing_event(s.R2, "V", fam, kt if fam else None, domain, name="V_R2")
        out.append((h, v))
    return out


# -- dependence range ------------------------------------------------------

def _displacements(grid_extent):
    g = grid_extent
    return [d for d in product(range(-(g - 1), g), repeat=2) if d > (0, 0)]


def dependence_range_sets(events, grid_extent):
    """Largest l-infinity site distance at which two sites read a common edge."""
    foot = [np.union1d(h.needed, v.needed) for h, v in events]
    g = grid_extent
    best = 0
    for i, j in product(range(len(foot)), repeat=2):
        if i >= j:
            continue
        zi, zj = divmod(i, g), divmod(j, g)
        dist = max(abs(zi[0] - zj[0]), abs(zi[1] - zj[1]))
        if dist > best and np.intersect1d(foot[i], foot[j], assume_unique=True).size:
            best = dist
    return best


def _share_edge(a, b):
    lo = np.maximum(a.lo, b.lo)
    hi = np.minimum(a.hi, b.hi)
    return bool(np.all(hi >= lo) and np.any(hi > lo))


def dependence_range_geometric(k, family=None, max_distance=16):
    """Same range from box arithmetic: each box grown by twice the reach.

    A crossing of R reads the edges of R and the patterns of members whose
    anchor lies within the reach of R; those patterns fit in R grown by
    twice the reach.
    """
    rho = reach(family, k)
    base = RenormSite((0, 0), k)
    boxes0 = [base.R1.expand(2 * rho), base.R2.expand(2 * rho)]
    best = 0
    for d in product(range(-max_distance, max_distance + 1), repeat=2):
        if d == (0, 0):
            continue
        other = RenormSite(d, k)
        boxes1 = [other.R1.expand(2 * rho), other.R2.expand(2 * rho)]
        if any(_share_edge(a, b) for a in boxes0 for b in boxes1):
            best = max(best, max(abs(d[0]), abs(d[1])))
    if best >= max_distance:
        raise ValueError("max_distance too small")
    return best


# -- field statistics ------------------------------------------------------

@dataclass
class RenormReport:
    p: float
    k: int
    grid_extent: int
    N: int
    seed: int
    open_freq: np.ndarray
    h_freq: np.ndarray
    v_freq: np.ndarray
    p_open: float
    p_open_se: float
    delta_hat: float
    delta_se: float
    bound: float
    bound_slack: float
    bound_se: float
    bound_verdict: str
    range_sets: int
    range_geometric: int
    correlations: dict
    beyond_max: float
    corr_tol: float
    translation_max_z: float
    samples: np.ndarray = field(repr=False, default=None)

    @property
    def range_matches(self):
        return self.range_sets == self.range_geometric

    @property
    def beyond_ok(self):
        return self.beyond_max <= self.corr_tol

    def summary(self):
        return {"p": self.p, "k": self.k, "grid_extent": self.grid_extent, "N": self.N, "seed": self.seed,
                "p_open": self.p_open, "p_open_se": self.p_open_se, "delta_hat": self.delta_hat,
                "bound": self.bound, "bound_slack": self.bound_slack, "bound_verdict": self.bound_verdict,
                "range_sets": self.range_sets, "range_geometric": self.range_geometric,
                "range_exceeds_2": self.range_sets > 2,
                "beyond_range_max_abs_corr": self.beyond_max, "corr_tol": self.corr_tol,
                "translation_max_z": self.translation_max_z}

    def grid_csv(self):
        buf = io.StringIO()
        buf.write("# schema=1 renorm\n")
        buf.write(f"# p={self.p!r} k={self.k} N={self.N} seed={self.seed}\n")
        buf.write("i,j,open_freq,h_freq,v_freq\n")
        g = self.grid_extent
        for i, j in product(range(g), repeat=2):
            buf.write(f"{i},{j},{self.open_freq[i, j]!r},{self.h_freq[i, j]!r},{self.v_freq[i, j]!r}\n")
        return buf.getvalue()


def correlations(samples):
    """Pooled correlation of site states at each displacement (samples: (N, g, g))."""
    N, g, _ = samples.shape
    x = samples.astype(float)
    out = {}
    for dx, dy in _displacements(g):
        a = x[:, max(0, -dx):g - max(0, dx), max(0, -dy):g - max(0, dy)]
        b = x[:, max(0, dx):g - max(0, -dx), max(0, dy):g - max(0, -dy)]
        a, b = a.reshape(N, -1), b.reshape(N, -1)
        pa, pb, pab = a.mean(), b.mean(), (a * b).mean()
        den = math.sqrt(pa * (1 - pa) * pb * (1 - pb))
        out[(dx, dy)] = (pab - pa * pb) / den if den > 0 else 0.0
    return out


def renorm_field(p, k, family, grid_extent, N, seed, workers=1, domain=None):
    events = site_events(k, grid_extent, family, domain)
    flat = [e for pair in events for e in pair]
    res = outcomes(flat, [p], N, seed, workers=workers)[0]
    g = grid_extent
    H = res[0::2].T.reshape(N, g, g)
    V = res[1::2].T.reshape(N, g, g)
    S = H & V
    open_freq = S.mean(axis=0)
    p_open = float(S.mean())
    # per-trial averages keep the se honest under spatial correlation
    p_open_se = float(S.reshape(N, -1).mean(axis=1).std(ddof=1) / math.sqrt(N)) if N > 1 else 0.0
    fail_h, fail_v = 1 - H.mean(), 1 - V.mean()
    if fail_h >= fail_v:
        delta, dse = float(fail_h), float(H.reshape(N, -1).mean(axis=1).std(ddof=1) / math.sqrt(N))
    else:
        delta, dse = float(fail_v), float(V.reshape(N, -1).mean(axis=1).std(ddof=1) / math.sqrt(N))
    bound = (1 - delta) ** 2
    bse = math.hypot(p_open_se, 2 * (1 - delta) * dse)
    slack = p_open - bound
    rg = dependence_range_geometric(k, family)
    # the footprint search needs a grid wide enough to see the full range
    span = max(g, rg + 2)
    rs = dependence_range_sets(events if span == g else site_events(k, span, family), span)
    corr = correlations(S)
    beyond = [abs(c) for d, c in corr.items() if max(abs(d[0]), abs(d[1])) > rs]
    se_site = np.sqrt(np.maximum(p_open * (1 - p_open), 1e-12) / N)
    tz = float(np.max(np.abs(open_freq - p_open)) / se_site) if 0 < p_open < 1 else 0.0
    return RenormReport(float(p), k, g, N, int(seed), open_freq, H.mean(axis=0), V.mean(axis=0),
                        p_open, p_open_se, delta, dse, bound, slack, bse, verdict(slack, bse),
                        rs, rg, corr, max(beyond, default=0.0), 4.0 / math.sqrt(N), tz, S)


# -- comparison with Bernoulli sites ---------------------------------------

def bernoulli_site_field(q, grid_extent, N, seed):
    u = rng.uniforms(seed, np.arange(N), np.arange(grid_extent ** 2), rng.STREAM_SITE)
    return (u < q).reshape(N, grid_extent, grid_extent)


def site_crossing(block):
    """Crossing along the first block axis of a (B, b, b) batch of site blocks, 4-connectivity."""
    block = np.asarray(block, dtype=bool)
    reach_ = np.zeros_like(block)
    reach_[:, 0, :] = block[:, 0, :]
    while True:
        grow = reach_.copy()
        grow[:, 1:, :] |= reach_[:, :-1, :]
        grow[:, :-1, :] |= reach_[:, 1:, :]
        grow[:, :, 1:] |= reach_[:, :, :-1]
        grow[:, :, :-1] |= reach_[:, :, 1:]
        grow &= block
        if np.array_equal(grow, reach_):
            break
        reach_ = grow
    return reach_[:, -1, :].any(axis=1)


def crossing_polynomial(b):
    """``c[j]`` = number of b x b site states with j open sites that cross."""
    n = b * b
    codes = np.arange(1 << n, dtype=np.int64)
    states = ((codes[:, None] >> np.arange(n)) & 1).astype(bool).reshape(-1, b, b)
    hit = site_crossing(states)
    ones = states.reshape(-1, n).sum(axis=1)
    return np.bincount(ones[hit], minlength=n + 1)


def bernoulli_crossing(b, r):
    c = crossing_polynomial(b)
    n = b * b
    j = np.arange(n + 1)
    return float(np.sum(c * r ** j * (1 - r) ** (n - j)))


def block_crossing_freq(samples, b):
    """Mean over trials of the fraction of b x b sub-blocks crossed, with its se."""
    N, g, _ = samples.shape
    if b > g:
        raise ValueError("block larger than the grid")
    per = []
    for i, j in product(range(g - b + 1), repeat=2):
        per.append(site_crossing(samples[:, i:i + b, j:j + b]))
    per = np.stack(per, axis=1).mean(axis=1)
    se = per.std(ddof=1) / math.sqrt(N) if N > 1 else 0.0
    return float(per.mean()), float(se)


@dataclass
class DominationReport:
    r_max: float
    functionals: dict
    q_hat: float
    dependence_range: object
    label: str = "empirical probe of increasing block functionals; not a proof of domination"


def domination_probe(samples, dependence_range=None, blocks=(1, 2, 3), tol=1e-6, sigmas=3.0):
    """Largest r at which no block-crossing functional of the field falls 3 se below Bernoulli(r)."""
    samples = np.asarray(samples, dtype=bool)
    g = samples.shape[1]
    blocks = [b for b in blocks if b <= g]
    measured = {b: block_crossing_freq(samples, b) for b in blocks}

    def ok(r):
        return all(m >= bernoulli_crossing(b, r) - sigmas * se for b, (m, se) in measured.items())

    if ok(1.0):
        r = 1.0
    else:
        lo, hi = 0.0, 1.0
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        r = lo
    funcs = {b: {"field": m, "se": se, "bernoulli_at_r": bernoulli_crossing(b, r)} for b, (m, se) in measured.items()}
    return DominationReport(r, funcs, float(samples.mean()), dependence_range)
