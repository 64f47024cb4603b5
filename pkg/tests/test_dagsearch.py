import numpy as np
import pytest

from oblite.dagsearch import MAX_WEIGHT, integer_weights, local_search_weights
from oblite.fixtures import running_example, two_vertex_spec
from oblite.topology import make_topology


def test_integer_weights_exact_when_possible():
    topo = make_topology([("a", "b", 1.0), ("b", "c", 2.0), ("a", "c", 4.0)])
    w = integer_weights(topo)
    assert dict(zip(map(topo.arc_label, range(topo.m)), w.tolist()))[("a", "b")] == 4
    assert w.min() == 1


def test_integer_weights_rounds_when_not():
    topo = make_topology([("a", "b", 1.0), ("b", "c", 3.0 ** 0.5)])
    w = integer_weights(topo, cap=100)
    assert w.max() == 100 and w.min() >= 1


def test_search_improves_running_example():
    topo = running_example()
    state = local_search_weights(topo, two_vertex_spec(topo), bound=1.6, budget=10)
    assert state.status == "bound"
    assert state.best == pytest.approx(1.5)
    assert all(1 <= w <= MAX_WEIGHT for w in state.weights)
    # critical matrices are normalized worst cases
    assert state.critical
    lines = state.trace_jsonl().splitlines()
    assert len(lines) == state.iterations


def test_search_stalls_honestly():
    topo = running_example()
    state = local_search_weights(topo, two_vertex_spec(topo), bound=1.0, budget=50)
    # ECMP cannot reach ratio 1 here; the search must stop on its own
    assert state.status in ("stalled", "budget")
    assert state.best >= 1.0


def test_threads_do_not_change_the_result():
    topo = running_example()
    a = local_search_weights(topo, two_vertex_spec(topo), bound=1.0, budget=5, threads=1)
    b = local_search_weights(topo, two_vertex_spec(topo), bound=1.0, budget=5, threads=4)
    assert np.array_equal(a.weights, b.weights) and a.trace == b.trace


def test_bad_arguments():
    topo = running_example()
    with pytest.raises(ValueError):
        local_search_weights(topo, two_vertex_spec(topo), bound=0.0)
    with pytest.raises(ValueError):
        local_search_weights(topo, two_vertex_spec(topo), budget=-1)


def test_zero_budget_keeps_initial_weights():
    topo = running_example()
    state = local_search_weights(topo, two_vertex_spec(topo), bound=float("inf"), budget=0)
    assert np.array_equal(state.weights, integer_weights(topo)) and state.iterations == 0
