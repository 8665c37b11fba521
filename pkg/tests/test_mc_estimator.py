import math

import numpy as np
import pytest

from enhperc import mc_estimator as mc
from enhperc.enumeration import exact_probability
from enhperc.events import EdgeOpen, crossing_event
from enhperc.families import pair_family, rotund_family, two_level_family
from enhperc.lattice import Box


@pytest.fixture(scope="module")
def H1():
    return crossing_event(Box.cube(1), "H")


def test_estimate_extremes(H1, seed):
    assert mc.estimate(H1, 0.0, 500, seed).p_hat == 0.0
    one = mc.estimate(H1, 1.0, 500, seed)
    assert one.p_hat == 1.0 and one.se == 0.0


def test_estimate_against_enumeration(H1, seed):
    exact = exact_probability(H1, 0.5)
    assert exact == pytest.approx(43 / 64)  # 2752 of 4096 states
    est = mc.estimate(H1, 0.5, 100_000, seed)
    assert abs(est.p_hat - exact) < 3 * est.se


def test_zero_trials_rejected(H1, seed):
    with pytest.raises(ValueError):
        mc.estimate(H1, 0.5, 0, seed)


def test_extending_N_keeps_first_trials(H1, seed):
    a = mc.outcomes([H1], [0.5], 300, seed)[0, 0]
    b = mc.outcomes([H1], [0.5], 600, seed)[0, 0]
    assert np.array_equal(a, b[:300])


def test_worker_count_independent(H1, seed):
    a = mc.outcomes([H1], [0.4, 0.6], 2000, seed, workers=1)
    b = mc.outcomes([H1], [0.4, 0.6], 2000, seed, workers=3)
    assert np.array_equal(a, b)


def test_chunking_independent(H1, seed, monkeypatch):
    a = mc.outcomes([H1], [0.5], 1000, seed)
    monkeypatch.setattr(mc, "_chunk_size", lambda n, budget=0: 37)
    b = mc.outcomes([H1], [0.5], 1000, seed)
    assert np.array_equal(a, b)


def test_sweep_monotone_per_trial(seed):
    ev = crossing_event(Box.centered((3, 2)), "H", pair_family())
    ests, res = mc.sweep(ev, [0.1, 0.3, 0.5, 0.7, 0.9], 2000, seed, return_outcomes=True)
    assert np.all(res[1:] >= res[:-1])
    assert [e.p_hat for e in ests] == sorted(e.p_hat for e in ests)
    with pytest.raises(ValueError):
        mc.sweep(ev, [0.5, 0.5], 10, seed)


def test_sweep_endpoints(H1, seed):
    ests = mc.sweep(H1, [0.0, 1.0], 200, seed)
    assert [e.p_hat for e in ests] == [0.0, 1.0]


def test_bound_arithmetic():
    assert mc.symcomp_bound(0.3, 3, 2)[0] == pytest.approx(1 - 0.7 ** 9)
    assert mc.symcomp_bound(0.3, 3, 2)[0] == pytest.approx(0.95965, abs=1e-5)
    assert mc.onearm_bound(0.8, 3)[0] == pytest.approx(1e-6)


def test_verdict_rule():
    assert mc.verdict(0.0, 0.0) == "holds"
    assert mc.verdict(-0.02, 0.01) == "holds-within-noise"
    assert mc.verdict(-0.031, 0.01) == "violated"


def test_symcomp_trivial_cases(seed):
    fam = two_level_family()
    lo, hi = mc.verify_symcomp(fam, 1, 3, 0.0, 200, seed)
    assert lo.verdict == hi.verdict == "holds" and lo.lhs.p_hat == 0
    lo, hi = mc.verify_symcomp(fam, 1, 3, 1.0, 200, seed)
    assert lo.lhs.p_hat == lo.rhs.p_hat == 1.0 and lo.slack == 0
    assert hi.verdict == "holds"


def test_symcomp_reverse_is_flagged(seed):
    fam = two_level_family()
    lo, hi = mc.verify_symcomp(fam, 1, 3, 0.6, 2000, seed, reverse=True)
    assert "violated" in (lo.verdict, hi.verdict)


def test_onearm_exact_tiny_window():
    r = mc.verify_onearm(0.5, 1, 1, 0, 0, method="exact")
    assert r.verdict == "holds" and r.pooled_se == 0.0
    # H(Lambda_{1,2}) and the one-arm probability at k=1
    assert r.rhs["one_arm"] == pytest.approx(1 - 0.5 ** 4)
    assert r.rhs_value == pytest.approx(((1 - 0.5 ** 4) / 8) ** 2)


def test_onearm_p_one(seed):
    r = mc.verify_onearm(1.0, 2, 2, 100, seed)
    assert r.lhs.p_hat == 1.0 and r.rhs_value == pytest.approx(8.0 ** -4)


def test_occupancy_trivial_cases(seed):
    fam = rotund_family()
    r = mc.verify_occupancy(fam, 8, 0.0, 50, seed)
    assert r.lhs.p_hat == 0 and r.verdict == "holds"
    r = mc.verify_occupancy(fam, 8, 1.0, 50, seed)
    assert r.lhs.p_hat == 1 and r.rhs_value == 0.25
    with pytest.raises(ValueError):
        mc.verify_occupancy(fam, 6, 0.5, 10, seed)


def test_occupancy_radius_precondition(seed):
    from enhperc.enhancement import FamilyError
    with pytest.raises(FamilyError):
        mc.verify_occupancy(pair_family(), 8, 0.5, 10, seed)


def test_threshold_identity_event(seed):
    ev = EdgeOpen(Box.cube(1), (0, 0), 0)
    br = mc.threshold_locate(ev, 0.3, 0.01, 20000, seed)
    assert br.bracketed and br.hi - br.lo <= 0.01
    assert abs(br.p_star - 0.3) < 0.02
    assert "proxy" in br.message


def test_threshold_duality_rectangle(seed):
    ev = crossing_event(Box((0, 0), (8, 7)), "H")
    br = mc.threshold_locate(ev, 0.5, 0.02, 4000, seed)
    assert abs(br.p_star - 0.5) < 0.05


def test_threshold_non_bracketing_reported(seed):
    ev = EdgeOpen(Box.cube(1), (0, 0), 0)
    # with a single trial the curve jumps straight from 0 to 1; a target is
    # always crossed, so force a miss with an event that never happens at p=1
    from enhperc.events import Event

    class Never(Event):
        domain = ev.domain
        needed = ev.needed
        name = "never"
        params = {}

        def evaluate(self, open_):
            return np.zeros(len(open_), dtype=bool)

    br = mc.threshold_locate(Never(), 0.5, 0.01, 100, seed)
    assert not br.bracketed and "does not cross" in br.message


def test_csv_schema(H1, seed):
    text = mc.csv_text([mc.estimate(H1, 0.5, 100, seed)], ["run: {}"])
    lines = text.splitlines()
    assert lines[0] == "# schema=1"
    assert lines[2] == "event,p,k,l,n,N,p_hat,se,seed"
    row = mc.read_csv(text)[0]
    assert row["event"] == "H" and int(row["N"]) == 100


def test_se_zero_iff_degenerate(H1, seed):
    e = mc.estimate(H1, 0.5, 100, seed)
    assert e.se > 0
    assert e.se == pytest.approx(math.sqrt(e.p_hat * (1 - e.p_hat) / 100))
