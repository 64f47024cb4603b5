import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oblite.fixtures import running_example
from oblite.topology import (TopologyError, build_dags, dag_from_edges, distances_to, inverse_capacity_weights,
                             make_topology, parse_topology, serialize_topology, shortest_path_dag,
                             validate_acyclic)

from conftest import random_topology


def test_parse_defaults_and_expansion():
    topo = parse_topology("undirected\n# comment\na b 2\nb c\n")
    assert topo.n == 3 and topo.m == 4
    a = topo.arc("a", "b")
    assert topo.capacity[a] == 2 and topo.weight[a] == 0.5
    assert topo.capacity[topo.arc("c", "b")] == 1 and topo.weight[topo.arc("c", "b")] == 1


def test_parse_directed_keeps_single_arcs():
    topo = parse_topology("directed\na b 1 3\n")
    assert topo.m == 1 and topo.arc("b", "a") is None and topo.weight[0] == 3


@pytest.mark.parametrize("text,line", [
    ("undirected\na b 0\n", 2),
    ("undirected\na b -1\n", 2),
    ("undirected\na a 1\n", 2),
    ("undirected\na b 1\nb a 1\n", 3),
    ("sideways\na b\n", 1),
    ("undirected\na b x\n", 2),
    ("undirected\na b 1 2 3\n", 2),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(TopologyError) as exc:
        parse_topology(text)
    assert exc.value.line == line
    assert f"line {line}" in str(exc.value)


def test_empty_file_rejected():
    with pytest.raises(TopologyError):
        parse_topology("# nothing\n")


def test_arrays_are_read_only():
    topo = running_example()
    with pytest.raises(ValueError):
        topo.capacity[0] = 5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_serialize_round_trip(seed, n):
    topo = random_topology(np.random.default_rng(seed), n)
    back = parse_topology(serialize_topology(topo))
    assert back.n == topo.n and back.m == topo.m
    for a in range(topo.m):
        u, v = topo.arc_label(a)
        b = back.arc(u, v)
        assert back.capacity[b] == topo.capacity[a] and back.weight[b] == topo.weight[a]


def test_running_example_dag_matches_drawn_dag():
    topo = running_example()
    dags, spf = build_dags(inverse_capacity_weights(topo), ["t"])
    t = topo.node("t")
    got = sorted(topo.arc_label(a) for a in dags[t].edges)
    assert got == [("s1", "s2"), ("s1", "v"), ("s2", "t"), ("s2", "v"), ("v", "t")]
    assert sorted(topo.arc_label(a) for a in spf[t].edges) == [("s1", "s2"), ("s1", "v"), ("s2", "t"), ("v", "t")]


def test_two_node_graph_gives_trivial_dag():
    topo = make_topology([("a", "b", 1.0)])
    dags, _ = build_dags(topo)
    assert [topo.arc_label(a) for a in dags[topo.node("b")].edges] == [("a", "b")]


def test_cycle_is_reported():
    topo = make_topology([("a", "b", 1), ("b", "c", 1), ("c", "a", 1)], directed=True)
    order, cycle = validate_acyclic(topo, range(3))
    assert order is None and sorted(cycle) == [0, 1, 2]
    with pytest.raises(ValueError):
        dag_from_edges(topo, "c", [("a", "b"), ("b", "c"), ("c", "a")])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(3, 8))
def test_dags_are_acyclic_and_contain_spf(seed, n):
    topo = random_topology(np.random.default_rng(seed), n)
    dags, spf = build_dags(topo)
    for t in dags:
        assert spf[t].edges <= dags[t].edges
        order, cycle = validate_acyclic(topo, dags[t].edges)
        assert cycle is None
        pos = {v: i for i, v in enumerate(order)}
        assert all(pos[topo.src[a]] < pos[topo.dst[a]] for a in dags[t].edges)
        assert not any(topo.src[a] == t for a in dags[t].edges)
        # every node reaches t inside the DAG (the graph is connected)
        dist = distances_to(topo, t)
        for a in dags[t].edges:
            assert dist[topo.dst[a]] <= dist[topo.src[a]] + 1e-9


def test_augmentation_only_adds_links_not_in_spf():
    topo = running_example()
    t = topo.node("t")
    dag = shortest_path_dag(topo, t)
    dags, _ = build_dags(topo, ["t"])
    extra = dags[t].edges - dag.edges
    assert [topo.arc_label(a) for a in extra] == [("s2", "v")]


def test_cycle_found_when_leftover_node_is_a_sink():
    # c hangs off the cycle a <-> b and has no successor
    topo = make_topology([("a", "b", 1), ("b", "a", 1), ("b", "c", 1)], directed=True)
    order, cycle = validate_acyclic(topo, range(3))
    assert order is None
    assert sorted(topo.arc_label(a) for a in cycle) == [("a", "b"), ("b", "a")]
