import numpy as np
import pytest

from oblite.demands import DemandSpec
from oblite.fixtures import running_example, running_example_dags, running_example_pairs, two_vertex_spec
from oblite.routing import SplittingConfig
from oblite.topology import build_dags, make_topology


def random_topology(rng, n):
    """Connected undirected graph: a random spanning tree plus extra links."""
    labels = [f"n{i}" for i in range(n)]
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        edges.add((j, i))
    extra = int(rng.integers(1, n))
    for _ in range(extra):
        a, b = sorted(rng.choice(n, size=2, replace=False).tolist())
        edges.add((a, b))
    return make_topology([(labels[a], labels[b], float(rng.integers(1, 5))) for a, b in sorted(edges)],
                         labels=labels)


def random_config(rng, dags):
    topo = dags.topo
    ratios = {}
    for t, dag in dags.items():
        ratios[t] = {}
        by_node = {}
        for a in sorted(dag.edges):
            by_node.setdefault(int(topo.src[a]), []).append(a)
        for arcs in by_node.values():
            r = rng.dirichlet(np.ones(len(arcs)))
            ratios[t].update(zip(arcs, r.tolist()))
    return SplittingConfig(dags, ratios)


def random_instance(seed, n_pairs=3):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 9))
    topo = random_topology(rng, n)
    dest = int(rng.integers(0, n))
    sources = [s for s in rng.permutation(n).tolist() if s != dest][:n_pairs]
    pairs = sorted((s, dest) for s in sources)
    dags, spf = build_dags(topo, [dest])
    return rng, topo, dags, spf, pairs


def random_box(rng, pairs):
    lo = {p: float(rng.uniform(0.2, 1.0)) for p in pairs}
    hi = {p: lo[p] * float(rng.uniform(1.0, 3.0)) for p in pairs}
    return DemandSpec.box(lo, hi)


@pytest.fixture
def fig1():
    topo = running_example()
    return topo, running_example_dags(topo)


@pytest.fixture
def fig1_spec(fig1):
    return two_vertex_spec(fig1[0])


@pytest.fixture
def fig1_pairs(fig1):
    return running_example_pairs(fig1[0])


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
