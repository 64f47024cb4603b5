"""LP oracles: demands-aware optimum, per-edge worst case, dual certificates."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .demands import DemandMatrix, DemandSpec, routable_vertices
from .flowlp import LpBuilder, add_box_rows, add_flow_block, allowed_arcs
from .lp import GE, LE, LpStatus, solve_lp
from .routing import SplittingConfig, load_coefficients, max_link_utilization
from .topology import DagSet, _make_dag, validate_acyclic

log = logging.getLogger(__name__)

FLOW_FLOOR = 1e-9
NORMALIZATIONS = ("in-dag", "any-pd")


class OracleError(RuntimeError):
    pass


class NumericalFailure(OracleError):
    pass


def _solve(problem, what):
    sol = solve_lp(problem)
    if sol.status is LpStatus.NUMERICAL_FAILURE:
        raise NumericalFailure(f"{what}: simplex stalled")
    return sol


def _check_norm(normalization):
    if normalization not in NORMALIZATIONS:
        raise ValueError(f"normalization must be one of {NORMALIZATIONS}")


# -- OPTU ---------------------------------------------------------------------

@dataclass
class OptuResult:
    alpha: float
    flows: dict  # t -> per-arc aggregate flow toward t


def _reachable_to(topo, arcs, t):
    pred = {}
    for a in arcs:
        pred.setdefault(int(topo.dst[a]), []).append(int(topo.src[a]))
    seen, stack = {t}, [t]
    while stack:
        for u in pred.get(stack.pop(), []):
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return seen


def remove_cycles(topo, flow: np.ndarray, floor: float = FLOW_FLOOR) -> np.ndarray:
    """Cancel directed cycles in a single-destination flow, arc by arc."""
    g = np.where(flow > floor, flow, 0.0)
    while True:
        support = np.flatnonzero(g > 0)
        _, cycle = validate_acyclic(topo, support.tolist())
        if cycle is None:
            return g
        g[cycle] -= g[cycle].min()
        g[g <= floor] = 0.0


def optu(topo, demand, dags: DagSet | None = None) -> OptuResult:
    """Minimum max-utilization of ``demand`` over PD routings (in ``dags`` if given)."""
    pairs = sorted(p for p, v in demand.items() if v > 0)
    if not pairs:
        return OptuResult(0.0, {})
    dests = sorted({t for _, t in pairs})
    if dags is not None:
        missing = [t for t in dests if t not in dags]
        if missing:
            raise OracleError(f"no DAG for destination(s) {[topo.labels[t] for t in missing]}")
    arcs_for = allowed_arcs(topo, dests, dags)
    for s, t in pairs:
        if s not in _reachable_to(topo, arcs_for[t], t):
            raise OracleError(f"infeasible: no path from {topo.labels[s]} to {topo.labels[t]}")
    bld = LpBuilder()
    alpha = bld.var(("alpha",))
    bld.obj[alpha] = 1.0
    g, _ = add_flow_block(bld, topo, arcs_for, {p: demand[p] for p in pairs}, exact=True, alpha_key=("alpha",))
    sol = _solve(bld.problem(), "OPTU")
    if not sol.ok:
        raise OracleError(f"OPTU LP {sol.status.value}")
    flows = {}
    for t in dests:
        f = np.zeros(topo.m)
        for a in arcs_for[t]:
            f[a] = sol.x[g[(t, a)]]
        flows[t] = remove_cycles(topo, f)
    return OptuResult(float(sol.x[alpha]), flows)


def flows_to_config(topo, flows: dict, dags: DagSet | None = None) -> SplittingConfig:
    """Splitting ratios proportional to aggregate flow.

    Nodes that carry no flow split equally over their DAG out-arcs.  Without
    ``dags`` the DAG toward each destination is the flow support.
    """
    ratios, built = {}, {}
    for t, f in flows.items():
        if dags is not None:
            dag = dags[t]
        else:
            dag = _make_dag(topo, t, np.flatnonzero(f > 0).tolist())
        built[t] = dag
        ratios[t] = {}
        for u in {int(topo.src[a]) for a in dag.edges}:
            out = [a for a in sorted(dag.edges) if topo.src[a] == u]
            tot = sum(f[a] for a in out)
            for a in out:
                ratios[t][a] = f[a] / tot if tot > FLOW_FLOOR else 1.0 / len(out)
    dagset = dags if dags is not None else DagSet(topo, built)
    if dags is not None:
        for t in dags:
            if t not in ratios:
                ratios[t] = {}
                for u in {int(topo.src[a]) for a in dags[t].edges}:
                    out = [a for a in dags[t].edges if topo.src[a] == u]
                    for a in out:
                        ratios[t][a] = 1.0 / len(out)
    return SplittingConfig(dagset, ratios)


# -- slave LP -----------------------------------------------------------------

def _spec_bounds(spec: DemandSpec):
    pairs = spec.pairs()
    if spec.is_unbounded:
        return pairs, None, None
    return pairs, {p: spec.lo.get(p, 0.0) for p in pairs}, {p: spec.hi.get(p, 0.0) for p in pairs}


def worst_case_dm(topo, dags, config: SplittingConfig, e: int, spec: DemandSpec,
                  normalization: str = "in-dag"):
    """Demand maximizing arc ``e``'s utilization among routable demands.

    Returns ``(DemandMatrix, utilization)``.  Routability is judged inside
    ``dags`` (``in-dag``) or over all arcs (``any-pd``).
    """
    _check_norm(normalization)
    if spec.is_discrete:
        best, arg = -1.0, None
        for D in spec.matrices:
            D1 = normalize_demand(topo, D, dags if normalization == "in-dag" else None)
            u = max_link_utilization(config, D1).utilization[e] if D1 else 0.0
            if u > best:
                best, arg = u, D1
        return arg, float(best)
    pairs, lo, hi = _spec_bounds(spec)
    L = load_coefficients(config, pairs)[:, e] / topo.capacity[e]
    bld = LpBuilder()
    dvars = [bld.var(("d",) + p) for p in pairs]
    for j, c in zip(dvars, L):
        bld.obj[j] = c
    arcs_for = allowed_arcs(topo, sorted({t for _, t in pairs}), dags if normalization == "in-dag" else None)
    add_flow_block(bld, topo, arcs_for, {p: ("var", j) for p, j in zip(pairs, dvars)}, exact=False)
    if lo is not None:
        add_box_rows(bld, pairs, dvars, lo, hi)
    sol = _solve(bld.problem(maximize=True), "slave LP")
    if not sol.ok:
        raise OracleError(f"slave LP {sol.status.value} (the zero demand is always feasible)")
    D = DemandMatrix({p: float(sol.x[j]) for p, j in zip(pairs, dvars) if sol.x[j] > 1e-12})
    return D, float(sol.objective)


def normalize_demand(topo, demand, dags=None) -> DemandMatrix:
    """Scale ``demand`` so that its OPTU is one (zero stays zero)."""
    res = optu(topo, demand, dags)
    if res.alpha <= 0:
        return DemandMatrix({})
    return DemandMatrix(demand).scaled(1.0 / res.alpha)


# -- dual certificate ---------------------------------------------------------

@dataclass
class EdgeCertificate:
    ratio: float
    pi: np.ndarray
    potential: dict  # (s, t) -> p_e(s, t)
    s_plus: dict = field(default_factory=dict)
    s_minus: dict = field(default_factory=dict)


@dataclass
class ObliviousCertificate:
    ratio: float
    edges: dict  # arc -> EdgeCertificate
    pairs: list
    normalization: str
    argmax: int | None = None

    def to_json(self, topo) -> str:
        lab = topo.labels
        out = {"ratio": self.ratio, "normalization": self.normalization,
               "argmax": None if self.argmax is None else list(topo.arc_label(self.argmax)), "edges": []}
        for e in sorted(self.edges):
            ce = self.edges[e]
            out["edges"].append({
                "edge": list(topo.arc_label(e)),
                "ratio": ce.ratio,
                "pi": {f"{lab[topo.src[h]]}->{lab[topo.dst[h]]}": float(v) for h, v in enumerate(ce.pi) if v},
                "potential": {f"{lab[s]}->{lab[t]}": float(v) for (s, t), v in sorted(ce.potential.items()) if v},
                "s_plus": {f"{lab[s]}->{lab[t]}": float(v) for (s, t), v in sorted(ce.s_plus.items()) if v},
                "s_minus": {f"{lab[s]}->{lab[t]}": float(v) for (s, t), v in sorted(ce.s_minus.items()) if v},
            })
        return json.dumps(out, indent=1)


class _DualModel:
    """The per-edge certificate LP; only the coupling right-hand sides change
    from edge to edge, so the constraint matrix is built once."""

    def __init__(self, topo, spec, arcs_for):
        self.topo = topo
        pairs, lo, hi = _spec_bounds(spec)
        self.pairs, self.lo, self.hi = pairs, lo, hi
        bld = LpBuilder()
        used = sorted({a for arcs in arcs_for.values() for a in arcs})
        self.pi = {h: bld.var(("pi", h)) for h in used}
        for h, j in self.pi.items():
            bld.obj[j] = float(topo.capacity[h])
        self.p = {}
        for t, arcs in arcs_for.items():
            nodes = {int(topo.src[a]) for a in arcs} | {int(topo.dst[a]) for a in arcs}
            nodes |= {s for s, tt in pairs if tt == t}
            for s in sorted(nodes - {t}):
                self.p[(s, t)] = bld.var(("p", s, t))
        self.sp, self.sm = {}, {}
        if lo is not None:
            for q in pairs:
                if np.isfinite(hi[q]):
                    self.sp[q] = bld.var(("s+",) + q)
                if lo[q] > 0:
                    self.sm[q] = bld.var(("s-",) + q)
        self.coupling = {}
        for q in pairs:
            row = {self.p[q]: 1.0}
            if q in self.sp:
                row[self.sp[q]] = 1.0
            if q in self.sm:
                row[self.sm[q]] = -1.0
            self.coupling[q] = bld.row(row, GE, 0.0, tag=("couple", q))
        for t, arcs in arcs_for.items():
            for a in arcs:
                j, k = int(topo.src[a]), int(topo.dst[a])
                row = {self.pi[a]: 1.0}
                if k != t:
                    row[self.p[(k, t)]] = 1.0
                if j != t:
                    row[self.p[(j, t)]] = row.get(self.p[(j, t)], 0.0) - 1.0
                bld.row(row, GE, 0.0, tag=("pot", a, t))
        if lo is not None and (self.sp or self.sm):
            row = {}
            for q, j in self.sp.items():
                row[j] = hi[q]
            for q, j in self.sm.items():
                row[j] = -lo[q]
            bld.row(row, LE, 0.0, tag=("lambda",))
        self.problem = bld.problem()

    def solve(self, rhs: np.ndarray) -> EdgeCertificate:
        prob = self.problem
        for q, r in zip(self.pairs, rhs):
            prob.b[self.coupling[q]] = r
        sol = _solve(prob, "certificate LP")
        if not sol.ok:
            raise OracleError(f"certificate LP {sol.status.value}")
        pi = np.zeros(self.topo.m)
        for h, j in self.pi.items():
            pi[h] = sol.x[j]
        return EdgeCertificate(
            float(sol.objective), pi,
            {q: float(sol.x[j]) for q, j in self.p.items()},
            {q: float(sol.x[j]) for q, j in self.sp.items()},
            {q: float(sol.x[j]) for q, j in self.sm.items()},
        )


def certify_oblivious_ratio(topo, dags, config: SplittingConfig, spec: DemandSpec,
                            normalization: str = "in-dag") -> ObliviousCertificate:
    """Dual certificate bounding the worst-case ratio over a box/unbounded set."""
    _check_norm(normalization)
    if spec.is_discrete:
        raise ValueError("certificates are for box or unbounded demand sets")
    pairs = spec.pairs()
    dests = sorted({t for _, t in pairs})
    arcs_for = allowed_arcs(topo, dests, dags if normalization == "in-dag" else None)
    model = _DualModel(topo, spec, arcs_for)
    L = load_coefficients(config, pairs) / topo.capacity
    edges = {}
    best, arg = 0.0, None
    for e in range(topo.m):
        if not np.any(L[:, e] > 0):
            continue
        ce = model.solve(L[:, e])
        edges[e] = ce
        if ce.ratio > best:
            best, arg = ce.ratio, e
    return ObliviousCertificate(best, edges, pairs, normalization, arg)


def check_certificate(topo, config, cert: ObliviousCertificate, dags=None, spec=None, tol=1e-6) -> dict:
    """Largest violation of each certificate condition (all should be ~0)."""
    dags = config.dags if dags is None else dags
    pairs = cert.pairs
    L = load_coefficients(config, pairs) / topo.capacity
    dests = sorted({t for _, t in pairs})
    arcs_for = allowed_arcs(topo, dests, dags if cert.normalization == "in-dag" else None)
    r1 = pot = couple = neg = box = 0.0
    for e, ce in cert.edges.items():
        r1 = max(r1, ce.pi @ topo.capacity - cert.ratio)
        neg = max(neg, -ce.pi.min(initial=0.0), -min(ce.potential.values(), default=0.0))
        P = lambda s, t: 0.0 if s == t else ce.potential.get((s, t), 0.0)  # noqa: E731
        for t, arcs in arcs_for.items():
            for a in arcs:
                j, k = int(topo.src[a]), int(topo.dst[a])
                pot = max(pot, -(ce.pi[a] + P(k, t) - P(j, t)))
        for q_i, q in enumerate(pairs):
            slack = ce.s_plus.get(q, 0.0) - ce.s_minus.get(q, 0.0)
            couple = max(couple, L[q_i, e] - (P(*q) + slack))
        if spec is not None and not spec.is_discrete and (ce.s_plus or ce.s_minus):
            box = max(box, sum(spec.hi[q] * v for q, v in ce.s_plus.items())
                      - sum(spec.lo[q] * v for q, v in ce.s_minus.items()))
    return {"R1": float(r1), "potential": float(pot), "coupling": float(couple),
            "nonnegativity": float(neg), "box": float(box)}


# -- performance ratio ----------------------------------------------------------

@dataclass
class PerfReport:
    ratio: float
    normalization: str
    mode: str
    rows: list = field(default_factory=list)
    certificate: ObliviousCertificate | None = None

    def to_csv(self) -> str:
        keys = list(self.rows[0]) if self.rows else ["ratio"]
        lines = [",".join(keys)]
        for r in self.rows:
            lines.append(",".join(str(r[k]) for k in keys))
        return "\n".join(lines) + "\n"


def perf_ratio(topo, dags, config: SplittingConfig, spec: DemandSpec,
               normalization: str = "in-dag", method: str = "certificate") -> PerfReport:
    """Worst ratio MxLU/OPTU of ``config`` over ``spec``.

    Discrete specs are evaluated matrix by matrix.  Box and unbounded specs
    use the dual certificate (``method="certificate"``) or enumerate the
    routable-demand vertices (``method="vertices"``, small instances only).
    """
    _check_norm(normalization)
    dags = config.dags if dags is None else dags
    restrict = dags if normalization == "in-dag" else None
    if spec.is_discrete:
        rows, worst = [], 0.0
        for i, D in enumerate(spec.matrices):
            rep = max_link_utilization(config, D)
            opt = optu(topo, D, restrict).alpha
            ratio = rep.max_utilization / opt if opt > 0 else 0.0
            rows.append({"matrix": i, "mxlu": rep.max_utilization, "optu": opt, "ratio": ratio})
            worst = max(worst, ratio)
        return PerfReport(worst, normalization, "discrete", rows)
    if method == "vertices":
        pairs, lo, hi = _spec_bounds(spec)
        verts = routable_vertices(topo, pairs, dags=restrict, lo=lo, hi=hi)
        rows, worst = [], 0.0
        for i, D in enumerate(verts):
            rep = max_link_utilization(config, D)
            opt = optu(topo, D, restrict).alpha
            ratio = rep.max_utilization / opt if opt > 0 else 0.0
            rows.append({"vertex": i, "mxlu": rep.max_utilization, "optu": opt, "ratio": ratio})
            worst = max(worst, ratio)
        return PerfReport(worst, normalization, "vertices", rows)
    if method != "certificate":
        raise ValueError(f"unknown method {method!r}")
    cert = certify_oblivious_ratio(topo, dags, config, spec, normalization)
    rows = [{"src": topo.arc_label(e)[0], "dst": topo.arc_label(e)[1], "ratio": ce.ratio}
            for e, ce in sorted(cert.edges.items())]
    return PerfReport(cert.ratio, normalization, "certificate", rows, cert)


def worst_case_ratio(topo, config, spec, normalization="in-dag", dags=None) -> float:
    """Scalar worst-case ratio: the quantity every optimizer here minimizes."""
    return perf_ratio(topo, dags, config, spec, normalization).ratio
