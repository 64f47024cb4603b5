import math

import numpy as np
import pytest
from scipy.optimize import linprog

from oblite.demands import (DemandError, DemandMatrix, DemandSpec, bimodal_demands, gravity_demands, margin_box,
                            polytope_vertices, read_demand_csv, read_demand_json, routable_vertices,
                            write_demand_csv, write_demand_json)
from oblite.fixtures import running_example, running_example_pairs
from oblite.topology import make_topology


def test_matrix_validation():
    with pytest.raises(DemandError):
        DemandMatrix({(0, 0): 1.0})
    with pytest.raises(DemandError):
        DemandMatrix({(0, 1): -1.0})
    with pytest.raises(DemandError):
        DemandMatrix({(0, 1): math.nan})
    assert DemandMatrix({(0, 1): 2.0, (1, 0): 0.0}).pairs() == [(0, 1)]


def test_box_validation():
    with pytest.raises(DemandError):
        DemandSpec.box({(0, 1): 2.0}, {(0, 1): 1.0})
    with pytest.raises(DemandError):
        DemandSpec.discrete([])
    spec = DemandSpec.unbounded([(0, 1), (2, 1)])
    assert spec.is_unbounded and spec.destinations() == [1]


def test_margin_box():
    spec = margin_box(DemandMatrix({(0, 1): 4.0}), 2.0)
    assert spec.lo[(0, 1)] == 2.0 and spec.hi[(0, 1)] == 8.0
    with pytest.raises(DemandError):
        margin_box(DemandMatrix({(0, 1): 4.0}), 0.5)


def test_gravity_total_and_proportionality():
    topo = make_topology([("a", "b", 1), ("b", "c", 3), ("a", "c", 2)])
    D = gravity_demands(topo, 100.0)
    assert D.total() == pytest.approx(100.0)
    C = np.bincount(topo.src, weights=topo.capacity, minlength=3)
    a, b, c = (topo.node(x) for x in "abc")
    assert D[(a, b)] / D[(a, c)] == pytest.approx(C[b] / C[c])
    assert D[(a, b)] == pytest.approx(D[(b, a)])


def test_bimodal_is_seeded():
    topo = make_topology([("a", "b", 1), ("b", "c", 1), ("a", "c", 1)])
    D1 = bimodal_demands(topo, 0.5, rng_seed=7)
    D2 = bimodal_demands(topo, 0.5, rng_seed=7)
    assert D1 == D2
    assert sorted(D1.values()).count(10.0) == 3


def test_csv_round_trip_box_and_point():
    topo = running_example()
    p1, p2 = running_example_pairs(topo)
    box = DemandSpec.box({p1: 1.0, p2: 0.0}, {p1: 2.0, p2: math.inf})
    back = read_demand_csv(write_demand_csv(box, topo), topo)
    assert back.lo == box.lo and back.hi == box.hi
    point = DemandSpec.discrete([DemandMatrix({p1: 1.5})])
    back = read_demand_csv(write_demand_csv(point, topo), topo)
    assert back.is_discrete and back.matrices[0] == {p1: 1.5}


def test_json_round_trip():
    topo = running_example()
    p1, p2 = running_example_pairs(topo)
    spec = DemandSpec.discrete([DemandMatrix({p1: 2.0}), DemandMatrix({p2: 2.0})])
    back = read_demand_json(write_demand_json(spec, topo), topo)
    assert back.matrices == spec.matrices


def test_json_bare_record_list_is_one_matrix():
    topo = running_example()
    p1, p2 = running_example_pairs(topo)
    text = '[{"src": "s1", "dst": "t", "demand": 2}, {"src": "s2", "dst": "t", "demand": 1}]'
    spec = read_demand_json(text, topo)
    assert spec.matrices == [{p1: 2.0, p2: 1.0}]


@pytest.mark.parametrize("text", ['{"src": "s1"}', '[["s1", "t", 2]]', '[[{"src": "s1", "dst": "t"}]]'])
def test_json_malformed(text):
    with pytest.raises(DemandError):
        read_demand_json(text, running_example())


def test_csv_bad_row():
    topo = running_example()
    with pytest.raises(DemandError, match="line 2"):
        read_demand_csv("src,dst,dmin,dmax\ns1,t,1\n", topo)


def test_running_example_vertices():
    # (s1, t) and (s2, t) share the two unit links into t: the routable set
    # is d1 + d2 <= 2 and its non-dominated vertices are (2,0) and (0,2)
    topo = running_example()
    pairs = running_example_pairs(topo)
    verts = routable_vertices(topo, pairs)
    got = sorted(tuple(round(D.get(p, 0.0), 9) for p in pairs) for D in verts)
    assert got == [(0.0, 2.0), (2.0, 0.0)]


def test_vertex_enumeration_against_grid_support():
    """Every LP support value must be attained by one of the returned vertices."""
    topo = make_topology([("a", "b", 1), ("b", "c", 2), ("a", "c", 1), ("c", "d", 1), ("b", "d", 1)])
    pairs = [(topo.node("a"), topo.node("d")), (topo.node("b"), topo.node("d")), (topo.node("a"), topo.node("c"))]
    verts = polytope_vertices(topo, pairs)
    V = np.array(verts)
    rng = np.random.default_rng(3)
    from oblite.flowlp import demand_polytope_lp
    from oblite.lp import solve_lp
    bld, dvars = demand_polytope_lp(topo, pairs)
    for _ in range(40):
        c = rng.normal(size=len(pairs))
        bld.obj.clear()
        for j, ci in zip(dvars, c):
            bld.obj[j] = ci
        val = solve_lp(bld.problem(maximize=True)).objective
        assert (V @ c).max() == pytest.approx(val, abs=1e-7)


def test_vertex_guard():
    topo = running_example()
    pairs = [(s, t) for s in range(4) for t in range(4) if s != t]
    with pytest.raises(DemandError, match="guard"):
        routable_vertices(topo, pairs)
