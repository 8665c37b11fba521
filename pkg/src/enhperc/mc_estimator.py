"""Monte Carlo estimates, coupled sweeps and inequality checks.

Trial ``t`` of every estimate draws its edge uniforms from
``(seed, t, stream, edge)``, so results do not depend on chunking or on
the number of workers, and raising ``N`` extends the first ``N`` trials.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import reduce
import io
import math
from typing import Optional

import numpy as np

from . import enumeration, rng
from .events import crossing_event, gk_event, jkl_event, ln_event, one_arm_event
from .lattice import Box

CSV_SCHEMA = 1
CSV_COLUMNS = ("event", "p", "k", "l", "n", "N", "p_hat", "se", "seed")
NOISE_SIGMAS = 3.0


@dataclass
class Estimate:
    event: str
    p: float
    N: int
    successes: int
    seed: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N <= 0:
            raise ValueError("an estimate needs at least one trial")

    @property
    def p_hat(self):
        return self.successes / self.N

    @property
    def se(self):
        q = self.p_hat
        return math.sqrt(q * (1.0 - q) / self.N)

    def row(self):
        return {"event": self.event, "p": self.p, "k": self.params.get("k"),
                "l": self.params.get("l"), "n": self.params.get("n"), "N": self.N,
                "p_hat": self.p_hat, "se": self.se, "seed": self.seed}


@dataclass
class ExactValue:
    """Probability computed by enumeration; carries zero noise."""
    event: str
    p: float
    value: float
    params: dict = field(default_factory=dict)
    se: float = 0.0

    @property
    def p_hat(self):
        return self.value


@dataclass
class InequalityReport:
    name: str
    relation: str
    lhs: object
    rhs: object
    rhs_value: float
    slack: float
    pooled_se: float
    verdict: str
    notes: str = ""

    def to_json(self):
        def side(x):
            if isinstance(x, (Estimate, ExactValue)):
                d = {"event": x.event, "p": x.p, "value": x.p_hat, "se": x.se}
                if isinstance(x, Estimate):
                    d.update(N=x.N, successes=x.successes, seed=x.seed)
                d.update({k: v for k, v in x.params.items() if v is not None})
                return d
            return x
        return {"name": self.name, "relation": self.relation, "lhs": side(self.lhs),
                "rhs": side(self.rhs), "rhs_value": self.rhs_value, "slack": self.slack,
                "pooled_se": self.pooled_se, "verdict": self.verdict, "notes": self.notes}


def verdict(slack, pooled_se, sigmas=NOISE_SIGMAS):
    if slack >= 0:
        return "holds"
    if slack >= -sigmas * pooled_se:
        return "holds-within-noise"
    return "violated"


# -- trial runner ----------------------------------------------------------

def _chunk_size(n_edges, budget=4_000_000):
    return max(1, budget // max(1, n_edges))


def _outcomes_serial(events, ps, trials, seed, stream):
    union = reduce(np.union1d, [e.needed for e in events])
    cols = [np.searchsorted(union, e.needed) for e in events]
    out = np.zeros((len(ps), len(events), len(trials)), dtype=bool)
    step = _chunk_size(len(union))
    for start in range(0, len(trials), step):
        tr = trials[start:start + step]
        U = rng.uniforms(seed, tr, union, stream)
        for pi, p in enumerate(ps):
            op = U < p
            for ei, (e, c) in enumerate(zip(events, cols)):
                out[pi, ei, start:start + len(tr)] = e.evaluate(op[:, c])
    return out


def _job(args):
    return _outcomes_serial(*args)


def outcomes(events, ps, N, seed, stream=rng.STREAM_BOND, workers=1, first_trial=0):
    """Per-trial outcomes, shape (len(ps), len(events), N).

    All events must share a domain: they see the same uniforms, and all
    parameters ``ps`` threshold the same uniforms.
    """
    events = list(events)
    if any(e.domain != events[0].domain for e in events):
        raise ValueError("jointly simulated events must share a domain")
    for p in ps:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {p}")
    if N <= 0:
        raise ValueError("N must be positive")
    trials = np.arange(first_trial, first_trial + N, dtype=np.int64)
    if workers <= 1 or N < 2 * workers:
        return _outcomes_serial(events, list(ps), trials, seed, stream)
    parts = np.array_split(trials, workers)
    with ProcessPoolExecutor(workers) as pool:
        res = list(pool.map(_job, [(events, list(ps), part, seed, stream) for part in parts]))
    return np.concatenate(res, axis=2)


def estimate(event, p, N, seed, stream=rng.STREAM_BOND, workers=1):
    res = outcomes([event], [p], N, seed, stream, workers)[0, 0]
    return Estimate(event.name, float(p), int(N), int(res.sum()), int(seed), dict(event.params))


def estimate_joint(events, p, N, seed, stream=rng.STREAM_BOND, workers=1):
    """Estimates of several events on the same trials, plus the raw outcomes."""
    res = outcomes(events, [p], N, seed, stream, workers)[0]
    ests = [Estimate(e.name, float(p), int(N), int(r.sum()), int(seed), dict(e.params))
            for e, r in zip(events, res)]
    return ests, res


def exact(event, p):
    """Enumeration value of an event, usable wherever an Estimate is."""
    value = enumeration.exact_probability(event, p)
    return ExactValue(event.name, float(p), float(value), dict(event.params))


def sweep(event, grid, N, seed, stream=rng.STREAM_BOND, workers=1, return_outcomes=False):
    """Coupled estimates over an increasing grid of p."""
    grid = [float(p) for p in grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("p grid must be strictly increasing")
    res = outcomes([event], grid, N, seed, stream, workers)[:, 0]
    ests = [Estimate(event.name, p, int(N), int(r.sum()), int(seed), dict(event.params))
            for p, r in zip(grid, res)]
    return (ests, res) if return_outcomes else ests


@dataclass
class ThresholdBracket:
    """Finite-size proxy for a threshold: where a coupled curve crosses ``target``."""
    event: str
    target: float
    lo: float
    hi: float
    at_lo: Optional[Estimate]
    at_hi: Optional[Estimate]
    bracketed: bool
    message: str = "finite-size proxy; not a limiting threshold"

    @property
    def p_star(self):
        return 0.5 * (self.lo + self.hi)


def threshold_locate(event, target, tolerance, N, seed, stream=rng.STREAM_BOND, max_iter=64):
    """Bisection on the coupled curve p -> P_hat(event at p)."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie in (0, 1)")
    lo, hi = 0.0, 1.0
    f_lo = estimate(event, lo, N, seed, stream)
    f_hi = estimate(event, hi, N, seed, stream)
    if f_lo.p_hat > target or f_hi.p_hat < target:
        return ThresholdBracket(event.name, target, lo, hi, f_lo, f_hi, False,
                                f"curve does not cross {target} with N={N} "
                                f"(ends at {f_lo.p_hat}, {f_hi.p_hat})")
    for _ in range(max_iter):
        if hi - lo <= tolerance:
            break
        mid = 0.5 * (lo + hi)
        f_mid = estimate(event, mid, N, seed, stream)
        if f_mid.p_hat < target:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return ThresholdBracket(event.name, target, lo, hi, f_lo, f_hi, True)


# -- inequality checks -----------------------------------------------------

def _report(name, relation, lhs, rhs, rhs_value, rhs_se, reverse=False, notes=""):
    """Report for ``lhs >= rhs`` (relation ">=") or ``lhs <= rhs`` ("<=")."""
    if reverse:
        relation = "<=" if relation == ">=" else ">="
    if relation == ">=":
        slack = lhs.p_hat - rhs_value
    else:
        slack = rhs_value - lhs.p_hat
    pooled = math.hypot(lhs.se, rhs_se)
    return InequalityReport(name, relation, lhs, rhs, float(rhs_value), float(slack), float(pooled),
                            verdict(slack, pooled), notes)


def symcomp_bound(g, l, d):
    """Upper bound ``1 - (1 - g)^(l^d)`` and its derivative in ``g``."""
    m = l ** d
    return 1.0 - (1.0 - g) ** m, m * (1.0 - g) ** (m - 1)


def verify_symcomp(family, k, l, p, N, seed, anchor_scale=1.0, reverse=False, workers=1):
    """Reports for P(G_k) <= P(J_{k,l}) and P(J_{k,l}) <= 1 - (1 - P(G_k))^(l^d).

    G_k is read on the torus through its non-wrapping window in the same
    trials as J, so the first inequality holds trial by trial.
    """
    J = jkl_event(family, k, l)
    G = gk_event(family, k, anchor_scale, domain=J.domain)
    (g, j), _ = estimate_joint([G, J], p, N, seed, workers=workers)
    d = family.dim
    first = _report("symcomp_lower", "<=", g, j, j.p_hat, j.se, reverse)
    bound, slope = symcomp_bound(g.p_hat, l, d)
    second = _report("symcomp_upper", "<=", j, {"formula": f"1-(1-P(G_k))^{l}^{d}", "P(G_k)": g.p_hat},
                     bound, slope * g.se, reverse)
    return first, second


def onearm_bound(arm, j):
    return (arm / 8.0) ** (2 * j), (2 * j / 8.0) * (arm / 8.0) ** (2 * j - 1)


def verify_onearm(p, k, j, N, seed, family=None, k_max=None, method="mc", reverse=False, workers=1):
    """P(H(Lambda_{jk,2k})) >= (P(0 <-> boundary of Lambda_k) / 8)^(2j)."""
    H = crossing_event(Box.centered((j * k, 2 * k)), "H", family, k_max)
    A = one_arm_event(k, 2, family, k_max)
    if method == "exact":
        h, a = exact(H, p), exact(A, p)
    else:
        h = estimate(H, p, N, seed, workers=workers)
        a = estimate(A, p, N, seed, stream=rng.STREAM_SITE, workers=workers)
    bound, slope = onearm_bound(a.p_hat, j)
    note = ""
    if family is not None:
        note = "enhanced measure restricted to finite windows"
    return _report("onearm", ">=", h, {"formula": f"(P(one_arm)/8)^{2 * j}", "one_arm": a.p_hat, "one_arm_se": a.se},
                   bound, slope * a.se, reverse, note)


def verify_occupancy(family, n, p, N, seed, enhanced=True, reverse=False, workers=1):
    """P(H(Lambda_{n/4,n})) >= P(L_n) / 4, crossing read in the enhanced graph."""
    if n % 4:
        raise ValueError("n must be divisible by 4")
    rect = Box.centered((n // 4, n))
    H = crossing_event(rect, "H", family)
    if not enhanced:
        H = crossing_event(rect, "H", domain=H.domain)
    L = ln_event(family, n, domain=H.domain)
    (h, lv), _ = estimate_joint([H, L], p, N, seed, workers=workers)
    return _report("occupancy", ">=", h, {"formula": "P(L_n)/4", "P(L_n)": lv.p_hat, "se": lv.se},
                   lv.p_hat / 4.0, lv.se / 4.0, reverse,
                   "" if enhanced else "crossing read in the base graph")


def short_long_crossings(n, rho, p, N, seed, family=None, k_max=None):
    """Estimates of H(Lambda_{n, rho n}) (short way) and H(Lambda_{rho n, n}) (long way)."""
    m = int(round(rho * n))
    short = estimate(crossing_event(Box.centered((n, m)), "H", family, k_max), p, N, seed)
    long_ = estimate(crossing_event(Box.centered((m, n)), "H", family, k_max), p, N, seed, stream=rng.STREAM_SITE)
    return short, long_


# -- output ----------------------------------------------------------------

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def csv_text(estimates, header_lines=()):
    buf = io.StringIO()
    buf.write(f"# schema={CSV_SCHEMA}\n")
    for line in header_lines:
        buf.write(f"# {line}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for e in estimates:
        row = e.row()
        buf.write(",".join(_fmt(row[c]) for c in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def read_csv(text):
    rows = []
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    head = lines[0].split(",")
    for ln in lines[1:]:
        rows.append(dict(zip(head, ln.split(","))))
    return rows
