"""Approximate splitting ratios with ECMP over repeated (virtual) next hops.

A next hop that appears ``m`` times among equal-cost routes receives ``m/M``
of the traffic, where ``M`` sums the multiplicities at that node.  The
multiplicities are chosen under a budget of ``L`` extra virtual links per
real next hop.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .oracles import perf_ratio
from .routing import SplittingConfig
from .topology import distances_to

TIE = 1e-12


@dataclass(frozen=True)
class Multiplicities:
    m: tuple
    targets: tuple
    achieved: tuple
    error: float


def _best_for_total(t, M):
    """Smallest max error ``max_i |m_i/M - t_i|`` over integer ``m_i >= 1``
    with ``sum m = M``, and the lexicographically smallest tuple reaching it."""
    k = len(t)
    cand = sorted({abs(v - M * ti) / M for ti in t for v in range(1, M + 1)})

    def bounds(eps):
        lo = [max(1, math.ceil(M * ti - M * eps - 1e-9)) for ti in t]
        hi = [min(M, math.floor(M * ti + M * eps + 1e-9)) for ti in t]
        return lo, hi

    def feasible(eps):
        lo, hi = bounds(eps)
        return all(a <= b for a, b in zip(lo, hi)) and sum(lo) <= M <= sum(hi)

    a, b = 0, len(cand) - 1
    if not feasible(cand[b]):
        return None
    while a < b:
        mid = (a + b) // 2
        if feasible(cand[mid]):
            b = mid
        else:
            a = mid + 1
    eps = cand[a]
    lo, hi = bounds(eps)
    m, left = [], M
    for i in range(k):
        rest_lo, rest_hi = sum(lo[i + 1:]), sum(hi[i + 1:])
        v = max(lo[i], left - rest_hi)
        if v > min(hi[i], left - rest_lo):
            return None
        m.append(v)
        left -= v
    err = max(abs(mi / M - ti) for mi, ti in zip(m, t))
    return err, tuple(m)


def approx_multiplicities(targets, budget: int) -> Multiplicities:
    """Multiplicities ``m_i >= 1`` with ``sum(m_i - 1) <= budget * k`` that
    minimize the largest ratio error; ties go to the smallest total, then to
    the lexicographically smallest tuple.

    Equivalent to trying every tuple: for each total the optimal error is
    found by bisection over the finitely many candidate errors.
    """
    t = [float(x) for x in targets]
    if not t:
        raise ValueError("no targets")
    if any(x <= 0 for x in t):
        raise ValueError("targets must be positive (drop zero ratios first)")
    if budget < 0:
        raise ValueError("budget must be non-negative")
    s = sum(t)
    t = [x / s for x in t]
    k = len(t)
    best = None
    for M in range(k, k + budget * k + 1):
        r = _best_for_total(t, M)
        if r is not None and (best is None or r[0] < best[0] - TIE):
            best = r
    err, m = best
    M = sum(m)
    return Multiplicities(m, tuple(t), tuple(mi / M for mi in m), float(err))


def brute_force_multiplicities(targets, budget: int) -> Multiplicities:
    """Reference enumeration of every admissible tuple (small inputs only)."""
    import itertools

    s = sum(targets)
    t = [x / s for x in targets]
    k, extra = len(t), budget * len(t)
    best = None
    for m in itertools.product(range(1, extra + 2), repeat=k):
        if sum(m) - k > extra:
            continue
        M = sum(m)
        err = max(abs(mi / M - ti) for mi, ti in zip(m, t))
        key = (err, M, m)
        if best is None or err < best[0] - TIE or (abs(err - best[0]) <= TIE and (M, m) < best[1:]):
            best = key
    err, M, m = best
    return Multiplicities(m, tuple(t), tuple(mi / M for mi in m), float(err))


@dataclass
class PlanEntry:
    node: int
    destination: int
    next_hops: tuple      # arcs with positive target ratio
    multiplicities: Multiplicities


@dataclass
class VirtualLinkPlan:
    budget: int
    entries: dict = field(default_factory=dict)  # (node, t) -> PlanEntry

    def max_error(self) -> float:
        return max((e.multiplicities.error for e in self.entries.values()), default=0.0)

    def virtual_links(self, node) -> int:
        return sum(mi - 1 for (u, _), e in self.entries.items() if u == node for mi in e.multiplicities.m)

    def to_config(self, dags) -> SplittingConfig:
        ratios = {t: {} for t in dags}
        for (u, t), e in self.entries.items():
            for a, r in zip(e.next_hops, e.multiplicities.achieved):
                ratios[t][a] = r
        return SplittingConfig(dags, ratios)


def virtual_link_plan(config: SplittingConfig, budget: int, threshold: float = 0.0) -> VirtualLinkPlan:
    topo = config.topo
    plan = VirtualLinkPlan(budget)
    for t in sorted(config.dags):
        by_node = {}
        for a in sorted(config.dags[t].edges):
            r = config.phi(t, a)
            if r > threshold:
                by_node.setdefault(int(topo.src[a]), []).append((a, r))
        for u in sorted(by_node):
            arcs, rs = zip(*by_node[u])
            plan.entries[(u, t)] = PlanEntry(u, t, tuple(arcs), approx_multiplicities(rs, budget))
    return plan


def emit_lie_plan(dags, config: SplittingConfig, budget: int, spf=None, weights=None) -> dict:
    """Abstract fake-advertisement plan as a JSON-ready dict.

    For every (node, destination) the real next hop ``v`` with multiplicity
    ``m`` gets ``m - 1`` fake advertisements whose path cost equals the cost
    through ``v`` (so ECMP treats them as ties).  Arcs used with positive ratio
    that are not shortest-path arcs are listed as DAG directives.
    """
    topo = dags.topo
    w = topo.weight if weights is None else np.asarray(weights, float)
    plan = virtual_link_plan(config, budget)
    out = {"budget": int(budget), "max_ratio_error": plan.max_error(), "destinations": {}}
    for t in sorted(dags, key=lambda x: topo.labels[x]):
        dist = distances_to(topo, t, w)
        advert, mult, directives = [], [], []
        for (u, tt), e in sorted(plan.entries.items(), key=lambda kv: topo.labels[kv[0][0]]):
            if tt != t:
                continue
            for a, m, target, got in zip(e.next_hops, e.multiplicities.m, e.multiplicities.targets,
                                         e.multiplicities.achieved):
                v = int(topo.dst[a])
                mult.append({"node": topo.labels[u], "next_hop": topo.labels[v], "multiplicity": int(m),
                             "target": float(target), "achieved": float(got)})
                if m > 1:
                    advert.append({"at": topo.labels[u], "next_hop": topo.labels[v], "count": int(m - 1),
                                   "path_cost": float(w[a] + dist[v])})
                if spf is not None and a not in spf[t].edges:
                    directives.append({"src": topo.labels[u], "dst": topo.labels[v]})
        out["destinations"][topo.labels[t]] = {"fake_advertisements": advert, "multiplicities": mult,
                                               "dag_directives": directives}
    return out


def lie_plan_json(plan: dict) -> str:
    return json.dumps(plan, indent=1, sort_keys=True)


def evaluate_quantized(dags, plan: VirtualLinkPlan, spec, normalization: str = "in-dag"):
    cfg = plan.to_config(dags)
    return perf_ratio(dags.topo, dags, cfg, spec, normalization)
