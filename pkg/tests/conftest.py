import collections
import sys

import pytest

SEED = 20261014


@pytest.fixture
def seed():
    return SEED


def bfs_connected(vertices, edges, sources, targets):
    """Plain breadth-first search; independent of the package's union-find."""
    adj = collections.defaultdict(list)
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = set(s for s in sources if s in vertices)
    queue = collections.deque(seen)
    while queue:
        x = queue.popleft()
        for y in adj[x]:
            if y in vertices and y not in seen:
                seen.add(y)
                queue.append(y)
    return any(t in seen for t in targets)


def box_vertices(lo, hi):
    import itertools
    return set(itertools.product(*[range(a, b + 1) for a, b in zip(lo, hi)]))


def random_config(domain, rng, p=0.5):
    from enhperc.bond_config import from_open_edges
    mask = rng.random(domain.num_edges) < p
    edges = [e for e, m in zip(domain.edges(), mask) if m]
    return from_open_edges(domain, edges, p)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
