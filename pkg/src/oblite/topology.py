"""Capacitated topologies, shortest-path DAGs and DAG augmentation."""
from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

#: absolute tolerance for equal-cost next-hop detection
COST_TOL = 1e-9


class TopologyError(ValueError):
    """Raised for malformed topology input."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


@dataclass(frozen=True)
class Topology:
    """Directed capacitated graph; arcs are indexed 0..m-1."""

    labels: tuple[str, ...]
    src: np.ndarray
    dst: np.ndarray
    capacity: np.ndarray
    weight: np.ndarray
    directed: bool = True
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("src", "dst", "capacity", "weight"):
            arr = np.array(getattr(self, name), dtype=int if name in ("src", "dst") else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not (len(self.src) == len(self.dst) == len(self.capacity) == len(self.weight)):
            raise TopologyError("arc arrays differ in length")
        if np.any(self.capacity <= 0) or not np.all(np.isfinite(self.capacity)):
            raise TopologyError("capacities must be positive and finite")
        if np.any(self.weight <= 0) or not np.all(np.isfinite(self.weight)):
            raise TopologyError("weights must be positive and finite")
        if np.any(self.src == self.dst):
            raise TopologyError("self-loop")
        n = len(self.labels)
        if len(set(self.labels)) != n:
            raise TopologyError("duplicate node label")
        if len(self.src) and (self.src.min() < 0 or max(self.src.max(), self.dst.max()) >= n):
            raise TopologyError("arc endpoint out of range")
        index = {}
        for a, (u, v) in enumerate(zip(self.src.tolist(), self.dst.tolist())):
            if (u, v) in index:
                raise TopologyError(f"duplicate arc {self.labels[u]}->{self.labels[v]}")
            index[(u, v)] = a
        self._index.clear()
        self._index.update(index)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def m(self) -> int:
        return len(self.src)

    def arc(self, u, v) -> int | None:
        """Arc id for (u, v); endpoints may be ids or labels."""
        return self._index.get((self.node(u), self.node(v)))

    def node(self, x) -> int:
        if isinstance(x, (int, np.integer)):
            return int(x)
        return self.labels.index(x)

    def arcs(self) -> list[tuple[int, int]]:
        return list(zip(self.src.tolist(), self.dst.tolist()))

    def out_arcs(self, u: int) -> list[int]:
        return [a for a in range(self.m) if self.src[a] == u]

    def arc_label(self, a: int) -> tuple[str, str]:
        return self.labels[self.src[a]], self.labels[self.dst[a]]

    def with_weights(self, weight) -> "Topology":
        return Topology(self.labels, self.src, self.dst, self.capacity, np.asarray(weight, float), self.directed)

    def with_capacity(self, capacity) -> "Topology":
        return Topology(self.labels, self.src, self.dst, np.asarray(capacity, float), self.weight, self.directed)


def make_topology(edges: Iterable[Sequence], directed: bool = False, labels: Sequence[str] | None = None) -> Topology:
    """Build a topology from ``(src, dst, capacity[, weight])`` tuples.

    Undirected edges are expanded into two opposite arcs.
    """
    order = list(labels) if labels is not None else []
    seen = set(order)
    rows = []
    for e in edges:
        u, v, cap = str(e[0]), str(e[1]), float(e[2])
        w = float(e[3]) if len(e) > 3 and e[3] is not None else (1.0 / cap if cap > 0 else 1.0)
        for x in (u, v):
            if x not in seen:
                seen.add(x)
                order.append(x)
        rows.append((u, v, cap, w))
        if not directed:
            rows.append((v, u, cap, w))
    pos = {x: i for i, x in enumerate(order)}
    return Topology(
        tuple(order),
        [pos[r[0]] for r in rows],
        [pos[r[1]] for r in rows],
        [r[2] for r in rows],
        [r[3] for r in rows],
        directed,
    )


def parse_topology(text: str) -> Topology:
    """Parse the whitespace edge-list format.

    First non-comment line is ``directed`` or ``undirected``; every further
    line is ``src dst capacity [weight]``.  A missing capacity defaults to 1,
    a missing weight to 1/capacity.
    """
    directed = None
    order: list[str] = []
    seen: dict[str, int] = {}
    src, dst, cap, wt = [], [], [], []
    pairs: dict[tuple[int, int], int] = {}

    def add(u, v, c, w, lineno):
        if (u, v) in pairs:
            raise TopologyError(f"duplicate arc {order[u]}->{order[v]}", lineno)
        pairs[(u, v)] = len(src)
        src.append(u)
        dst.append(v)
        cap.append(c)
        wt.append(w)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if directed is None:
            if tok[0].lower() not in ("directed", "undirected") or len(tok) != 1:
                raise TopologyError("expected header 'directed' or 'undirected'", lineno)
            directed = tok[0].lower() == "directed"
            continue
        if len(tok) not in (2, 3, 4):
            raise TopologyError(f"expected 'src dst [capacity [weight]]', got {len(tok)} fields", lineno)
        u, v = tok[0], tok[1]
        if u == v:
            raise TopologyError(f"self-loop at {u}", lineno)
        try:
            c = float(tok[2]) if len(tok) > 2 else 1.0
            w = float(tok[3]) if len(tok) > 3 else None
        except ValueError as exc:
            raise TopologyError(str(exc), lineno) from None
        if not (c > 0 and np.isfinite(c)):
            raise TopologyError(f"non-positive capacity {tok[2]}", lineno)
        if w is None:
            w = 1.0 / c
        if not (w > 0 and np.isfinite(w)):
            raise TopologyError(f"non-positive weight {tok[3]}", lineno)
        for x in (u, v):
            if x not in seen:
                seen[x] = len(order)
                order.append(x)
        a, b = seen[u], seen[v]
        add(a, b, c, w, lineno)
        if not directed:
            add(b, a, c, w, lineno)
    if directed is None:
        raise TopologyError("empty topology file")
    return Topology(tuple(order), src, dst, cap, wt, directed)


def serialize_topology(topo: Topology) -> str:
    """Inverse of :func:`parse_topology`, sorted by (src, dst) label."""
    lines = ["directed" if topo.directed else "undirected"]
    rows = []
    for a in range(topo.m):
        u, v = topo.arc_label(a)
        if not topo.directed:
            if u > v:
                continue
        rows.append((u, v, float(topo.capacity[a]), float(topo.weight[a])))
    for u, v, c, w in sorted(rows):
        lines.append(f"{u} {v} {c!r} {w!r}")
    return "\n".join(lines) + "\n"


def inverse_capacity_weights(topo: Topology) -> Topology:
    return topo.with_weights(1.0 / topo.capacity)


def distances_to(topo: Topology, t: int, weights=None) -> np.ndarray:
    """Dijkstra on reversed arcs: shortest distance from every node to ``t``."""
    w = topo.weight if weights is None else np.asarray(weights, float)
    into = [[] for _ in range(topo.n)]
    for a, (u, v) in enumerate(topo.arcs()):
        into[v].append((u, w[a]))
    dist = np.full(topo.n, np.inf)
    dist[t] = 0.0
    heap = [(0.0, t)]
    while heap:
        d, v = heapq.heappop(heap)
        if d > dist[v]:
            continue
        for u, wa in into[v]:
            nd = d + wa
            if nd < dist[u]:
                dist[u] = nd
                heapq.heappush(heap, (nd, u))
    return dist


@dataclass(frozen=True)
class DestinationDag:
    root: int
    edges: frozenset
    order: tuple[int, ...]

    def out_edges(self, topo: Topology, u: int) -> list[int]:
        return sorted(a for a in self.edges if topo.src[a] == u)

    def in_edges(self, topo: Topology, v: int) -> list[int]:
        return sorted(a for a in self.edges if topo.dst[a] == v)


class DagSet(dict):
    """Mapping destination node id -> :class:`DestinationDag`."""

    def __init__(self, topo: Topology, dags: Mapping[int, DestinationDag]):
        super().__init__(dags)
        self.topo = topo
        for t, dag in self.items():
            if dag.root != t:
                raise ValueError(f"DAG keyed {t} is rooted at {dag.root}")

    @property
    def destinations(self) -> list[int]:
        return sorted(self)


def validate_acyclic(topo: Topology, edges: Iterable[int]):
    """Topological order of the nodes touched by ``edges``, or a cycle.

    Returns ``(order, None)`` when acyclic and ``(None, cycle_arcs)``
    otherwise.  Nodes not touched by any arc are appended at the end.
    """
    edges = sorted(set(edges))
    succ = [[] for _ in range(topo.n)]
    indeg = np.zeros(topo.n, dtype=int)
    for a in edges:
        succ[topo.src[a]].append(a)
        indeg[topo.dst[a]] += 1
    # Kahn's algorithm, ties by label so the order is ingestion-independent
    ready = sorted((topo.labels[v], v) for v in range(topo.n) if indeg[v] == 0)
    heapq.heapify(ready)
    order = []
    while ready:
        _, v = heapq.heappop(ready)
        order.append(v)
        for a in succ[v]:
            w = topo.dst[a]
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(ready, (topo.labels[w], w))
    if len(order) == topo.n:
        return order, None
    # Every leftover node has a leftover predecessor (a node downstream of a
    # cycle may have no leftover successor), so walk backwards.
    left = {v for v in range(topo.n) if indeg[v] > 0}
    pred = [[] for _ in range(topo.n)]
    for a in edges:
        pred[topo.dst[a]].append(a)
    v = min(left, key=lambda x: topo.labels[x])
    path, visited = [], {}
    while v not in visited:
        visited[v] = len(path)
        a = next(a for a in pred[v] if topo.src[a] in left)
        path.append(a)
        v = topo.src[a]
    return None, path[visited[v]:][::-1]


def _make_dag(topo: Topology, t: int, edges) -> DestinationDag:
    order, cycle = validate_acyclic(topo, edges)
    if cycle is not None:
        raise ValueError(f"edge set for {topo.labels[t]} has a cycle: {[topo.arc_label(a) for a in cycle]}")
    if any(topo.src[a] == t for a in edges):
        raise ValueError(f"destination {topo.labels[t]} has outgoing DAG edges")
    return DestinationDag(t, frozenset(edges), tuple(order))


def dag_from_edges(topo: Topology, t, edges) -> DestinationDag:
    """Validated DAG from an explicit collection of arcs (ids or label pairs)."""
    t = topo.node(t)
    ids = []
    for e in edges:
        if isinstance(e, (int, np.integer)):
            ids.append(int(e))
        else:
            a = topo.arc(*e)
            if a is None:
                raise ValueError(f"no arc {e}")
            ids.append(a)
    dag = _make_dag(topo, t, ids)
    reach = _reaches(topo, dag.edges, t)
    for a in dag.edges:
        if topo.src[a] not in reach:
            raise ValueError(f"{topo.labels[topo.src[a]]} has DAG edges but no path to {topo.labels[t]}")
    return dag


def _reaches(topo: Topology, edges, t) -> set:
    pred = [[] for _ in range(topo.n)]
    for a in edges:
        pred[topo.dst[a]].append(topo.src[a])
    seen = {t}
    stack = [t]
    while stack:
        v = stack.pop()
        for u in pred[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def shortest_path_dag(topo: Topology, t, weights=None, dist=None) -> DestinationDag:
    """All equal-cost shortest next hops toward ``t``."""
    t = topo.node(t)
    w = topo.weight if weights is None else np.asarray(weights, float)
    if dist is None:
        dist = distances_to(topo, t, w)
    edges = []
    for a, (u, v) in enumerate(topo.arcs()):
        if u == t or not np.isfinite(dist[u]) or not np.isfinite(dist[v]):
            continue
        if abs(dist[u] - (w[a] + dist[v])) <= COST_TOL:
            edges.append(a)
    return _make_dag(topo, t, edges)


def augment_dag(topo: Topology, dag: DestinationDag, dist: np.ndarray, skipped: list | None = None) -> DestinationDag:
    """Add every non-DAG link, oriented toward the endpoint closer to the root.

    Equal distances orient from the smaller label to the larger one.  Arcs are
    tried in id order; one that would close a cycle is skipped, logged and,
    when ``skipped`` is given, appended to it.
    """
    t = dag.root
    edges = set(dag.edges)
    covered = {frozenset((topo.src[a], topo.dst[a])) for a in edges}
    for a, (u, v) in enumerate(topo.arcs()):
        pair = frozenset((u, v))
        if pair in covered or u == t:
            continue
        du, dv = dist[u], dist[v]
        if not (np.isfinite(du) and np.isfinite(dv)):
            continue
        if abs(du - dv) <= COST_TOL:
            forward = topo.labels[u] < topo.labels[v]
        else:
            forward = dv < du
        if not forward:
            continue
        _, cycle = validate_acyclic(topo, edges | {a})
        if cycle is not None:
            log.info("augmentation toward %s skips %s->%s (cycle)", topo.labels[t], *topo.arc_label(a))
            if skipped is not None:
                skipped.append(a)
            continue
        edges.add(a)
        covered.add(pair)
    return _make_dag(topo, t, edges)


def build_dags(topo: Topology, destinations=None, weights=None, augment: bool = True):
    """SPF DAGs (and their augmentations) for each destination.

    Returns ``(dags, spf)`` where both are :class:`DagSet`; ``spf`` holds the
    pure shortest-path DAGs.
    """
    dests = range(topo.n) if destinations is None else [topo.node(t) for t in destinations]
    w = topo.weight if weights is None else np.asarray(weights, float)
    spf, full = {}, {}
    for t in dests:
        dist = distances_to(topo, t, w)
        spf[t] = shortest_path_dag(topo, t, w, dist)
        full[t] = augment_dag(topo, spf[t], dist) if augment else spf[t]
    return DagSet(topo, full), DagSet(topo, spf)
