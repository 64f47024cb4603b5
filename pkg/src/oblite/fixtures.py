"""Small constructions used as golden instances throughout the tests."""
from __future__ import annotations

from .demands import DemandError, DemandMatrix, DemandSpec
from .topology import DagSet, dag_from_edges, make_topology

#: stand-in for "arbitrarily large" capacity; keeps the LPs well scaled
BIG = 1e6

FIG1_EDGES = [("s1", "s2"), ("s1", "v"), ("s2", "v"), ("s2", "t"), ("v", "t")]
FIG1_DAG = [("s1", "s2"), ("s1", "v"), ("s2", "v"), ("s2", "t"), ("v", "t")]


def running_example():
    """Four routers s1, s2, v, t with five unit-capacity links."""
    return make_topology([(u, v, 1.0) for u, v in FIG1_EDGES], labels=["s1", "s2", "v", "t"])


def golden_variant(inner: float = BIG):
    """Running example with links (s1,s2), (s1,v), (s2,v) set to ``inner``
    and (s2,t), (v,t) kept at capacity 1."""
    caps = {("s2", "t"): 1.0, ("v", "t"): 1.0}
    return make_topology([(u, v, caps.get((u, v), inner)) for u, v in FIG1_EDGES],
                         labels=["s1", "s2", "v", "t"])


def running_example_dags(topo):
    """The forwarding DAG toward t drawn in the running example (s2->v used)."""
    return DagSet(topo, {topo.node("t"): dag_from_edges(topo, "t", FIG1_DAG)})


def running_example_pairs(topo):
    t = topo.node("t")
    return [(topo.node("s1"), t), (topo.node("s2"), t)]


def two_vertex_spec(topo, amount: float = 2.0) -> DemandSpec:
    """``{(amount, 0), (0, amount)}`` for sources s1, s2 toward t."""
    (p1, p2) = running_example_pairs(topo)
    return DemandSpec.discrete([DemandMatrix({p1: amount}), DemandMatrix({p2: amount})])


def bipartition_gadget(weights):
    """Reduction instance: one Integer gadget per weight.

    Gadget i has nodes x{i}_1, x{i}_2, m{i}; links x1-x2, x1-m, x2-m in both
    directions with capacity w_i, arcs s1->x{i}_1 and s2->x{i}_2 with
    capacity 2 w_i and m{i}->t with capacity 2 w_i.
    """
    weights = [float(w) for w in weights]
    if not weights or any(w <= 0 for w in weights):
        raise DemandError("weights must be positive")
    labels = ["s1", "s2", "t"]
    arcs = []
    for i, w in enumerate(weights, start=1):
        x1, x2, m = f"x{i}_1", f"x{i}_2", f"m{i}"
        labels += [x1, x2, m]
        for a, b in ((x1, x2), (x1, m), (x2, m)):
            arcs += [(a, b, w), (b, a, w)]
        arcs += [("s1", x1, 2 * w), ("s2", x2, 2 * w), (m, "t", 2 * w)]
    return make_topology(arcs, directed=True, labels=labels)


def bipartition_spec(topo, weights) -> DemandSpec:
    """The two non-dominated demand vertices ``(2 SUM, 0)`` and ``(0, 2 SUM)``."""
    total = 2 * sum(weights)
    t = topo.node("t")
    return DemandSpec.discrete([DemandMatrix({(topo.node("s1"), t): total}),
                                DemandMatrix({(topo.node("s2"), t): total})])


def path_gap(n: int, inner: float = BIG):
    """Path x1..xn of bidirectional ``inner`` links, plus a unit arc x_i->t."""
    if n < 2:
        raise DemandError("path-gap instance needs n >= 2")
    labels = [f"x{i}" for i in range(1, n + 1)] + ["t"]
    arcs = []
    for i in range(1, n):
        arcs += [(f"x{i}", f"x{i+1}", inner), (f"x{i+1}", f"x{i}", inner)]
    arcs += [(f"x{i}", "t", 1.0) for i in range(1, n + 1)]
    return make_topology(arcs, directed=True, labels=labels)


def path_gap_spec(topo, n: int) -> DemandSpec:
    """``D_i``: x_i sends n units to t, everything else silent."""
    t = topo.node("t")
    return DemandSpec.discrete([DemandMatrix({(topo.node(f"x{i}"), t): float(n)}) for i in range(1, n + 1)])


def halves_config(dags):
    """Every two-way choice split evenly (the ECMP outcome when s2's two
    routes tie): 3/2 on the two-vertex set."""
    from .routing import config_from_labels
    return config_from_labels(dags, {"t": {("s1", "s2"): 0.5, ("s1", "v"): 0.5, ("s2", "v"): 0.5,
                                           ("s2", "t"): 0.5, ("v", "t"): 1.0}})


def two_thirds_config(dags):
    """s1 sends 2/3 via s2 and 1/3 via v; s2 splits evenly: 4/3."""
    from .routing import config_from_labels
    return config_from_labels(dags, {"t": {("s1", "s2"): 2 / 3, ("s1", "v"): 1 / 3, ("s2", "v"): 0.5,
                                           ("s2", "t"): 0.5, ("v", "t"): 1.0}})
