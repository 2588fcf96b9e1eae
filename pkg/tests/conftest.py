import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from geonoise.graph import build_graph

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def cliques(sizes, weight=1.0):
    """Disjoint cliques; returns the graph and the block label of each node."""
    edges, labels, start = [], [], 0
    for c, s in enumerate(sizes):
        nodes = range(start, start + s)
        edges += [(i, j, weight) for i, j in itertools.combinations(nodes, 2)]
        labels += [c] * s
        start += s
    return build_graph(start, edges), np.array(labels)


def random_graph(n, p, rng, weighted=True):
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(iu.size) < p
    w = rng.uniform(0.1, 2.0, keep.sum()) if weighted else np.ones(keep.sum())
    return build_graph(n, zip(iu[keep], ju[keep], w))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_cliques():
    return cliques([10, 10])


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(pytestconfig):
    """Print and keep one PASS/FAIL line per acceptance criterion."""
    lines = pytestconfig.stash.setdefault(ACCEPTANCE_KEY, [])

    def emit(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        print(line)
        lines.append(line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
