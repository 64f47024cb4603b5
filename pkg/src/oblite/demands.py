"""Demand matrices, uncertainty sets and synthetic generators."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .flowlp import demand_polytope_lp
from .lp import LpStatus, solve_lp


class DemandError(ValueError):
    pass


class DemandMatrix(dict):
    """``{(s, t): d_st}`` over node ids; zero entries may be omitted."""

    def __init__(self, entries=(), **kw):
        super().__init__(entries, **kw)
        for (s, t), v in self.items():
            if s == t:
                raise DemandError(f"demand from {s} to itself")
            if not (np.isfinite(v) and v >= 0):
                raise DemandError(f"invalid demand {v} for {(s, t)}")

    def scaled(self, c: float) -> "DemandMatrix":
        return DemandMatrix({p: c * v for p, v in self.items()})

    def total(self) -> float:
        return float(sum(self.values()))

    def pairs(self):
        return sorted(p for p, v in self.items() if v > 0)

    def vector(self, pairs) -> np.ndarray:
        return np.array([self.get(p, 0.0) for p in pairs])


@dataclass
class DemandSpec:
    """Discrete list of matrices, or a per-pair box ``[lo, hi]`` whose
    positive multiples are all admissible.  Unbounded sets are boxes with
    ``lo = 0`` and ``hi = inf``."""

    kind: str
    matrices: list = field(default_factory=list)
    lo: dict = field(default_factory=dict)
    hi: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind == "discrete":
            if not self.matrices:
                raise DemandError("discrete demand set is empty")
            self.matrices = [m if isinstance(m, DemandMatrix) else DemandMatrix(m) for m in self.matrices]
        elif self.kind == "box":
            for p in set(self.lo) | set(self.hi):
                lo, hi = self.lo.get(p, 0.0), self.hi.get(p, 0.0)
                if p[0] == p[1]:
                    raise DemandError(f"demand from {p[0]} to itself")
                if not (0 <= lo <= hi):
                    raise DemandError(f"box bounds out of order for {p}: [{lo}, {hi}]")
        else:
            raise DemandError(f"unknown demand spec kind {self.kind!r}")

    @classmethod
    def discrete(cls, matrices) -> "DemandSpec":
        return cls("discrete", list(matrices))

    @classmethod
    def box(cls, lo: dict, hi: dict) -> "DemandSpec":
        return cls("box", lo=dict(lo), hi=dict(hi))

    @classmethod
    def unbounded(cls, pairs) -> "DemandSpec":
        pairs = list(pairs)
        return cls("box", lo={p: 0.0 for p in pairs}, hi={p: math.inf for p in pairs})

    @property
    def is_discrete(self) -> bool:
        return self.kind == "discrete"

    @property
    def is_unbounded(self) -> bool:
        return self.kind == "box" and all(math.isinf(v) for v in self.hi.values()) and not any(self.lo.values())

    def pairs(self) -> list:
        if self.is_discrete:
            return sorted({p for m in self.matrices for p, v in m.items() if v > 0})
        return sorted(p for p, v in self.hi.items() if v > 0)

    def destinations(self) -> list:
        return sorted({t for _, t in self.pairs()})


def outgoing_capacity(topo) -> np.ndarray:
    return np.bincount(topo.src, weights=topo.capacity, minlength=topo.n)


def gravity_demands(topo, total: float) -> DemandMatrix:
    """``d_ij`` proportional to the product of the endpoints' outgoing capacity."""
    if topo.n < 2:
        raise DemandError("gravity model needs at least two nodes")
    C = outgoing_capacity(topo)
    norm = C.sum() ** 2 - (C ** 2).sum()
    if norm <= 0:
        raise DemandError("all outgoing capacities are zero")
    return DemandMatrix({(i, j): total * C[i] * C[j] / norm
                         for i in range(topo.n) for j in range(topo.n) if i != j})


def bimodal_demands(topo, heavy_fraction: float = 0.1, heavy_value: float = 10.0,
                    light_value: float = 1.0, rng_seed: int = 0) -> DemandMatrix:
    """A seeded random subset of pairs gets ``heavy_value``, the rest ``light_value``."""
    if not 0 <= heavy_fraction <= 1:
        raise DemandError("heavy_fraction must lie in [0, 1]")
    if not heavy_value >= light_value >= 0:
        raise DemandError("need heavy_value >= light_value >= 0")
    pairs = [(i, j) for i in range(topo.n) for j in range(topo.n) if i != j]
    k = int(round(heavy_fraction * len(pairs)))
    rng = np.random.default_rng(rng_seed)
    heavy = set(rng.choice(len(pairs), size=k, replace=False).tolist())
    return DemandMatrix({p: heavy_value if i in heavy else light_value for i, p in enumerate(pairs)})


def margin_box(base: DemandMatrix, margin: float) -> DemandSpec:
    """Per pair ``[d/x, x*d]``."""
    if not margin >= 1:
        raise DemandError(f"margin must be >= 1, got {margin}")
    return DemandSpec.box({p: v / margin for p, v in base.items()},
                          {p: v * margin for p, v in base.items()})


# -- vertex enumeration -------------------------------------------------------

def _support(bld, dvars, direction):
    bld.obj.clear()
    for j, c in zip(dvars, direction):
        bld.obj[j] = float(c)
    sol = solve_lp(bld.problem(maximize=True))
    if sol.status is not LpStatus.OPTIMAL:
        raise DemandError(f"support LP failed: {sol.status.value}")
    return sol.objective, sol.x[dvars]


def polytope_vertices(topo, pairs, dags=None, lo=None, hi=None, tol=1e-7, support=None):
    """Exact vertex set of the routable-demand polytope (projected onto pairs).

    Uses outer/inner approximation: the convex hull of points found so far is
    grown by querying the LP in every facet-normal direction until no facet
    can be pushed outward.  ``support(direction) -> (value, point)`` may be
    given to swap the LP backend.
    """
    from scipy.spatial import ConvexHull, QhullError

    pairs = list(pairs)
    k = len(pairs)
    if support is None:
        bld, dvars = demand_polytope_lp(topo, pairs, dags, lo, hi)
        support = lambda c: _support(bld, dvars, c)  # noqa: E731

    # affine hull through the origin (the zero demand is always routable)
    points = [np.zeros(k)]
    basis = np.zeros((0, k))
    while basis.shape[0] < k:
        comp = np.eye(k) - basis.T @ basis
        u, s, _ = np.linalg.svd(comp)
        cand = u[:, s > 0.5].T
        grown = False
        for c in cand:
            for sign in (1.0, -1.0):
                val, x = support(sign * c)
                if val > tol:
                    points.append(x)
                    v = x - (basis.T @ (basis @ x))
                    basis = np.vstack([basis, v / np.linalg.norm(v)])
                    grown = True
                    break
            if grown:
                break
        if not grown:
            break
    r = basis.shape[0]
    if r == 0:
        return [np.zeros(k)]
    if r == 1:
        d = basis[0]
        hi_v, xh = support(d)
        lo_v, xl = support(-d)
        pts = [xh, xl] if lo_v > tol else [xh, np.zeros(k)]
        return _dedupe(pts, tol)

    def coords(x):
        return basis @ x

    P = [coords(x) for x in points]
    # probe coordinate directions inside the subspace to seed a full simplex
    for c in np.vstack([basis, -basis]):
        _, x = support(c)
        points.append(x)
        P.append(coords(x))
    for _ in range(10_000):
        try:
            hull = ConvexHull(np.array(P))
        except QhullError:
            hull = ConvexHull(np.array(P), qhull_options="QJ")
        added = False
        for eq in np.unique(np.round(hull.equations, 12), axis=0):
            normal, off = eq[:-1], -eq[-1]
            val, x = support(basis.T @ normal)
            if val > off + tol * (1 + abs(off)):
                y = coords(x)
                if min(np.linalg.norm(np.array(P) - y, axis=1)) > tol:
                    P.append(y)
                    points.append(x)
                    added = True
        if not added:
            break
    verts = [points[i] for i in hull.vertices]
    return _dedupe(verts, tol)


def _dedupe(pts, tol):
    out = []
    for p in pts:
        p = np.where(np.abs(p) < tol, 0.0, p)
        if not any(np.linalg.norm(p - q) <= tol * (1 + np.linalg.norm(q)) for q in out):
            out.append(p)
    return out


def non_dominated(points, tol=1e-7):
    """Drop points dominated componentwise by another point, and the origin."""
    keep = []
    for i, p in enumerate(points):
        if np.all(p <= tol):
            continue
        dominated = any(j != i and np.all(q >= p - tol) and np.any(q > p + tol) for j, q in enumerate(points))
        if not dominated:
            keep.append(p)
    return keep


def routable_vertices(topo, pairs, cutoff: int = 6, dags=None, lo=None, hi=None) -> list:
    """Non-dominated vertices of ``{D >= 0 : D routable at utilization <= 1}``."""
    pairs = [tuple(p) for p in pairs]
    if len(pairs) > cutoff:
        raise DemandError(f"{len(pairs)} pairs exceed the vertex-enumeration guard ({cutoff}); "
                          "use a discrete or box demand spec instead")
    verts = non_dominated(polytope_vertices(topo, pairs, dags, lo, hi))
    verts.sort(key=lambda v: tuple(-v))
    return [DemandMatrix({p: float(x) for p, x in zip(pairs, v) if x > 0}) for v in verts]


# -- files --------------------------------------------------------------------

def read_demand_csv(text: str, topo) -> DemandSpec:
    """``src,dst,dmin,dmax`` rows.  If every row has dmin == dmax the result is
    a single-matrix discrete spec, otherwise a box; ``inf`` is accepted."""
    lo, hi = {}, {}
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, start=1):
        if not row or row[0].strip().startswith("#"):
            continue
        if row[0].strip() == "src":
            continue
        if len(row) != 4:
            raise DemandError(f"line {lineno}: expected src,dst,dmin,dmax")
        s, t = topo.node(row[0].strip()), topo.node(row[1].strip())
        lo[(s, t)], hi[(s, t)] = float(row[2]), float(row[3])
    if all(lo[p] == hi[p] for p in lo):
        return DemandSpec.discrete([DemandMatrix({p: v for p, v in lo.items() if v > 0})])
    return DemandSpec.box(lo, hi)


def write_demand_csv(spec_or_matrix, topo) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["src", "dst", "dmin", "dmax"])
    if isinstance(spec_or_matrix, DemandSpec) and not spec_or_matrix.is_discrete:
        items = [(p, spec_or_matrix.lo.get(p, 0.0), spec_or_matrix.hi.get(p, 0.0))
                 for p in sorted(set(spec_or_matrix.lo) | set(spec_or_matrix.hi))]
    else:
        m = spec_or_matrix.matrices[0] if isinstance(spec_or_matrix, DemandSpec) else spec_or_matrix
        items = [(p, v, v) for p, v in sorted(m.items())]
    for (s, t), a, b in items:
        w.writerow([topo.labels[s], topo.labels[t], repr(float(a)), repr(float(b))])
    return out.getvalue()


def read_demand_json(text: str, topo) -> DemandSpec:
    """JSON array of matrices, each a list of ``{"src", "dst", "demand"}``.
    A bare list of records is read as a single matrix."""
    data = json.loads(text)
    if not isinstance(data, list):
        raise DemandError("demand JSON must be a list")
    if data and all(isinstance(e, dict) for e in data):
        data = [data]
    mats = []
    for entry in data:
        if not isinstance(entry, list) or not all(
                isinstance(e, dict) and {"src", "dst", "demand"} <= e.keys() for e in entry):
            raise DemandError('each matrix must be a list of {"src", "dst", "demand"} records')
        mats.append(DemandMatrix({(topo.node(e["src"]), topo.node(e["dst"])): float(e["demand"])
                                  for e in entry if float(e["demand"]) > 0}))
    return DemandSpec.discrete(mats)


def write_demand_json(spec: DemandSpec, topo) -> str:
    return json.dumps([[{"src": topo.labels[s], "dst": topo.labels[t], "demand": v}
                        for (s, t), v in sorted(m.items())] for m in spec.matrices], indent=1)
