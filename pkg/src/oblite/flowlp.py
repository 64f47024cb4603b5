"""Helpers to assemble the per-destination aggregate-flow LPs."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from .lp import EQ, GE, LE, LpProblem


class LpBuilder:
    """Accumulates named variables and sparse rows, then emits an LpProblem."""

    def __init__(self):
        self.index: dict = {}
        self.lb: list = []
        self.ub: list = []
        self.rows: list = []
        self.senses: list = []
        self.rhs: list = []
        self.tags: list = []
        self.obj: dict = defaultdict(float)

    def var(self, key, lb=0.0, ub=np.inf) -> int:
        if key in self.index:
            return self.index[key]
        self.index[key] = len(self.lb)
        self.lb.append(lb)
        self.ub.append(ub)
        return self.index[key]

    def row(self, coeffs: dict, sense: str, rhs: float, tag=None) -> int:
        self.rows.append({k: v for k, v in coeffs.items() if v != 0})
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.tags.append(tag)
        return len(self.rows) - 1

    def problem(self, maximize=False) -> LpProblem:
        n = len(self.lb)
        A = np.zeros((len(self.rows), n))
        for i, r in enumerate(self.rows):
            for j, v in r.items():
                A[i, j] += v
        c = np.zeros(n)
        for j, v in self.obj.items():
            c[j] += v
        return LpProblem(c, A, self.senses, self.rhs, np.array(self.lb, float), np.array(self.ub, float), maximize)


def allowed_arcs(topo, destinations, dags=None) -> dict:
    """Arcs usable by flow toward each destination: the DAG edges, or every
    arc not leaving the destination when unrestricted."""
    if dags is not None:
        return {t: sorted(dags[t].edges) for t in destinations}
    return {t: [a for a in range(topo.m) if topo.src[a] != t] for t in destinations}


def add_flow_block(bld: LpBuilder, topo, arcs_for: dict, demand: dict, exact: bool,
                   alpha_key=None):
    """Per-destination conservation and shared capacity rows.

    ``demand`` maps (s, t) to either a number or a variable index.  With
    ``exact`` the net outflow at s equals the demand; otherwise it must be at
    least the demand (surplus is allowed, disposal is not).  Capacity rows are
    ``sum_t g_t(a) <= c_a`` or, given ``alpha_key``, ``<= alpha * c_a``.
    Returns ``(g_index, capacity_rows)``.
    """
    g = {}
    for t, arcs in arcs_for.items():
        for a in arcs:
            g[(t, a)] = bld.var(("g", t, a))
    for t, arcs in arcs_for.items():
        nodes = set()
        for a in arcs:
            nodes.add(int(topo.src[a]))
            nodes.add(int(topo.dst[a]))
        for (s, tt) in demand:
            if tt == t:
                nodes.add(s)
        nodes.discard(t)
        for s in sorted(nodes):
            coeff = defaultdict(float)
            for a in arcs:
                if topo.src[a] == s:
                    coeff[g[(t, a)]] += 1.0
                elif topo.dst[a] == s:
                    coeff[g[(t, a)]] -= 1.0
            rhs = 0.0
            d = demand.get((s, t))
            if isinstance(d, tuple):  # ("var", index)
                coeff[d[1]] -= 1.0
            elif d is not None:
                rhs = float(d)
            bld.row(coeff, EQ if exact else GE, rhs, tag=("cons", s, t))
    cap_rows = {}
    users = defaultdict(list)
    for (t, a), j in g.items():
        users[a].append(j)
    for a in sorted(users):
        coeff = {j: 1.0 for j in users[a]}
        if alpha_key is not None:
            coeff[bld.index[alpha_key]] = -float(topo.capacity[a])
            cap_rows[a] = bld.row(coeff, LE, 0.0, tag=("cap", a))
        else:
            cap_rows[a] = bld.row(coeff, LE, float(topo.capacity[a]), tag=("cap", a))
    return g, cap_rows


def demand_polytope_lp(topo, pairs, dags=None, lo=None, hi=None):
    """LP data for the set of demands routable within capacities.

    Optional per-pair bounds ``lo``/``hi`` (scaled by a free ``lambda >= 0``)
    restrict the demands to the cone over the box.  Returns the builder and
    the list of demand variable indices in ``pairs`` order; the objective is
    left empty for the caller.
    """
    bld = LpBuilder()
    dvars = [bld.var(("d", s, t)) for (s, t) in pairs]
    dests = sorted({t for _, t in pairs})
    arcs_for = allowed_arcs(topo, dests, dags)
    add_flow_block(bld, topo, arcs_for, {p: ("var", j) for p, j in zip(pairs, dvars)}, exact=False)
    if lo is not None or hi is not None:
        add_box_rows(bld, pairs, dvars, lo, hi)
    return bld, dvars


def add_box_rows(bld: LpBuilder, pairs, dvars, lo, hi):
    """``lambda*lo <= d <= lambda*hi`` with ``lambda >= 0`` free."""
    lam = bld.var(("lambda",))
    for p, j in zip(pairs, dvars):
        h = np.inf if hi is None else hi.get(p, 0.0)
        lo_p = 0.0 if lo is None else lo.get(p, 0.0)
        if np.isfinite(h):
            bld.row({j: 1.0, lam: -h}, LE, 0.0, tag=("box+", p))
        if lo_p > 0:
            bld.row({j: -1.0, lam: lo_p}, LE, 0.0, tag=("box-", p))
    return lam
