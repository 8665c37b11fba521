import math

import numpy as np
import pytest

from enhperc import continuum as ct


UNIT = ct.Region((0.0, 0.0), (1.0, 1.0))


def test_poisson_empty_at_zero():
    assert len(ct.sample_poisson(UNIT, 0.0, 1, 0)) == 0
    with pytest.raises(ValueError):
        ct.sample_poisson(UNIT, -1.0, 1, 0)


def test_poisson_mean_and_variance(seed):
    N = 100_000
    counts = np.array([len(ct.sample_poisson(UNIT, 2.0, seed, t)) for t in range(N)])
    assert abs(counts.mean() - 2.0) < 3 * math.sqrt(2.0 / N)
    # sample variance of Poisson(2) counts has se sqrt((2 + 2*4)/N)
    assert abs(counts.var(ddof=1) - 2.0) < 3 * math.sqrt(10.0 / N)


def test_poisson_halves_independent(seed):
    N = 20000
    a, b = [], []
    for t in range(N):
        pts = ct.sample_poisson(UNIT, 3.0, seed, t).points
        a.append(np.sum(pts[:, 0] < 0.5))
        b.append(np.sum(pts[:, 0] >= 0.5))
    assert abs(np.corrcoef(a, b)[0, 1]) < 4 / math.sqrt(N)


def test_restriction_matches_subbox(seed):
    N = 20000
    big = ct.Region((0.0, 0.0), (2.0, 2.0))
    sub = ct.Region((0.0, 0.0), (1.0, 0.5))
    restricted = [np.sum(sub.contains(ct.sample_poisson(big, 4.0, seed, t).points)) for t in range(N)]
    direct = [len(ct.sample_poisson(sub, 4.0, seed + 1, t)) for t in range(N)]
    se = math.sqrt(2 * 2.0 / N)
    assert abs(np.mean(restricted) - np.mean(direct)) < 3 * se
    assert abs(np.mean(np.equal(restricted, 0)) - np.mean(np.equal(direct, 0))) < 4 / math.sqrt(N)


def test_disk_cover():
    s = ct.PointSample(UNIT, [[0.5, 0.5]])
    d = ct.DiskUnion(s, 0.25)
    assert d.cover([[0.5, 0.74], [0.5, 0.76]]).tolist() == [True, False]
    assert not ct.DiskUnion(ct.PointSample(UNIT, np.zeros((0, 2))), 1.0).cover([[0, 0]]).any()


@pytest.mark.parametrize("d", [2, 3])
def test_occupied_tile_need_not_be_covered(d):
    # a point in one corner leaves the opposite corner sqrt(d) away
    grid = ct.TileGrid((1,) * d)
    s = ct.PointSample(grid.region, [[-0.5] * d])
    assert grid.occupied(s)[0] and not grid.certified(s)[0]
    assert not ct.DiskUnion(s, 1.0).cover([[0.5] * d])[0]


@pytest.mark.parametrize("d", [2, 3])
def test_certified_tile_is_covered(d, seed):
    assert math.sqrt(d) / 2 <= 1
    grid = ct.TileGrid((1,) * d)
    gen = np.random.default_rng(seed)
    for _ in range(20):
        # one random point in each half-side subcube
        corners = np.array(list(np.ndindex(*(2,) * d)), dtype=float)
        pts = -0.5 + 0.5 * corners + 0.5 * gen.random((len(corners), d))
        s = ct.PointSample(grid.region, pts)
        assert grid.certified(s)[0]
        probe = -0.5 + gen.random((4000, d))
        assert ct.DiskUnion(s, 1.0).cover(probe).all()


def test_neighbourhood():
    g = ct.TileGrid((5, 5))
    m = np.zeros(25, dtype=bool)
    m[12] = True
    nb = g.neighbourhood(m).reshape(5, 5)
    assert nb.sum() == 9 and nb[1:4, 1:4].all()


def test_coupling_zero_intensity(seed):
    c = ct.couple_tiles(ct.BlockResampledPoisson(8.0), 0.0, seed, 0)
    assert len(c.Y) == 0 and c.certificate.success and c.certificate.holds


def test_coupling_full_source(seed):
    for t in range(30):
        c = ct.couple_tiles(ct.FullSource(), 1.5, seed, t)
        assert c.certificate.success and c.certificate.holds
        assert c.field.W.all()


def test_coupling_failure_reports_tile(seed):
    # sparse source: most tiles uncertified, so U-neighbourhoods fail
    c = ct.couple_tiles(ct.BlockResampledPoisson(0.5), 2.0, seed, 0)
    assert not c.certificate.success
    assert c.certificate.failed_tile is not None
    assert "failed_tile" in c.certificate.to_text()


def test_block_source_certified_bound(seed):
    src = ct.BlockResampledPoisson(6.0)
    g = ct.TileGrid((6, 6))
    freq = np.mean([g.certified(src.sample(g, seed, t)).mean() for t in range(2000)])
    bound = src.certified_lower_bound(2)
    assert freq >= bound - 4 * math.sqrt(bound * (1 - bound) / 2000)


def test_block_source_far_tiles_independent(seed):
    src = ct.BlockResampledPoisson(2.0, block=2)
    g = ct.TileGrid((6, 1))
    N = 20000
    counts = np.array([g.counts(src.sample(g, seed, t)) for t in range(N)])
    assert abs(np.corrcoef(counts[:, 0], counts[:, 4])[0, 1]) < 4 / math.sqrt(N)


def test_hardcore_source(seed):
    src = ct.HardcorePoisson(20.0, 0.05)
    g = ct.TileGrid((4, 4))
    s = src.sample(g, seed, 0)
    from scipy.spatial.distance import pdist
    assert pdist(s.points).min() > 0.05
    bound = src.occupancy_lower_bound(2)
    freq = np.mean([g.occupied(src.sample(g, seed, t)).mean() for t in range(300)])
    assert 0 < bound <= 1 and freq >= bound - 4 * math.sqrt(bound * (1 - bound) / 300)


def test_marginal_check_examples(seed):
    run = ct.coupling_run(ct.FullSource(), 1.0, 600, seed, shape=(6, 6), grid_step=None)
    rep = ct.marginal_check(run["counts"], 1.0, (0, 1))
    assert abs(rep.p_empty - math.exp(-1)) < 3 * rep.p_empty_se
    assert rep.passed
    zero = ct.coupling_run(ct.FullSource(), 0.0, 50, seed, shape=(4, 4), grid_step=None)
    assert ct.marginal_check(zero["counts"], 0.0).passed


def test_disk_zero_intensity(seed):
    region = ct.Region((0.0, 0.0), (4.0, 4.0))
    assert not ct.disk_percolation_probe(0.0, 0.5, region, 20, seed).any()


def test_disk_large_radius_crosses():
    region = ct.Region((0.0, 0.0), (4.0, 4.0))
    s = ct.PointSample(region, [[1.0, 3.0]])
    assert ct.disk_crossing(s, 6.0)


def test_disk_scaling_exact_at_two(seed):
    region = ct.Region((0.0, 0.0), (5.0, 5.0))
    a, b = ct.scaled_crossings(1.2, 0.5, region, 2, 300, seed)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("s", [2, 3])
def test_disk_scaling_statistical(s, seed):
    region = ct.Region((0.0, 0.0), (5.0, 5.0))
    N = 1500
    a = ct.disk_percolation_probe(1.2, 0.5, region, N, seed)
    b = ct.disk_percolation_probe(1.2 / s ** 2, 0.5 * s, region.scaled(s), N, seed + 99)
    se = math.sqrt((a.var() + b.var()) / N)
    assert abs(a.mean() - b.mean()) < 3 * max(se, 1e-9)


def test_disk_monotone_in_intensity(seed):
    region = ct.Region((0.0, 0.0), (5.0, 5.0))
    out = ct.monotone_in_lambda([0.4, 0.8, 1.2, 1.6, 2.4], 0.5, region, 200, seed)
    assert np.all(out[:, 1:] >= out[:, :-1])


def test_lambda_c_placeholder():
    assert ct.lambda_c_placeholder(2, 1.0) == pytest.approx(1.128 / math.pi)


def test_points_csv(seed):
    s = ct.sample_poisson(UNIT, 5.0, seed, 0)
    lines = s.to_csv().splitlines()
    assert lines[1] == "x,y" and len(lines) == 2 + len(s)
