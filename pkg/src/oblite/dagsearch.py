"""Local search over integer link weights for low worst-case ECMP utilization.

Each round finds the demand matrix that hurts the current ECMP routing most,
adds it to a growing set of critical matrices, and then moves one arc weight
by +-1, +-2 or +-4 if that lowers the worst utilization over the set.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .demands import DemandSpec
from .oracles import normalize_demand, worst_case_dm
from .routing import ecmp_config, max_link_utilization
from .topology import build_dags

log = logging.getLogger(__name__)

MAX_WEIGHT = 2 ** 16
STEPS = (1, -1, 2, -2, 4, -4)


def integer_weights(topo, cap: int = 100) -> np.ndarray:
    """Inverse-capacity weights as the smallest integer vector (scaled so the
    lightest arc gets 1) with entries at most ``cap``; if no multiplier up to
    ``cap`` makes every entry integral, scale to max ``cap`` and round."""
    inv = 1.0 / topo.capacity
    r = inv / inv.min()
    for m in range(1, cap + 1):
        v = m * r
        if v.max() > cap + 1e-9:
            break
        if np.all(np.abs(v - np.round(v)) <= 1e-9):
            return np.round(v).astype(int)
    return np.maximum(1, np.round(r * cap / r.max())).astype(int)


@dataclass
class SearchState:
    weights: np.ndarray
    critical: list = field(default_factory=list)
    best: float = math.inf
    iterations: int = 0
    bound: float = 1.0
    status: str = "budget"
    trace: list = field(default_factory=list)

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.trace)


def _ecmp(topo, dests, weights):
    _, spf = build_dags(topo, dests, weights.astype(float), augment=False)
    return spf, ecmp_config(spf)


def _score(topo, dests, weights, critical):
    _, cfg = _ecmp(topo, dests, weights)
    return max((max_link_utilization(cfg, D).max_utilization for D in critical), default=0.0)


def local_search_weights(topo, spec: DemandSpec, bound: float = 1.0, budget: int = 200,
                         weights=None, threads: int = 1) -> SearchState:
    """Iterate worst-case-matrix discovery and single-weight descent.

    Stops when the worst ECMP utilization is at most ``bound`` (status
    ``bound``), when no single move helps (``stalled``) or after ``budget``
    rounds (``budget``).  Worst cases are normalized against any per-destination
    routing, so utilizations are performance ratios.
    """
    if not bound > 0:
        raise ValueError("bound must be positive")
    if budget < 0:
        raise ValueError("budget must be non-negative")
    w = integer_weights(topo) if weights is None else np.asarray(weights, int).copy()
    dests = spec.destinations()
    state = SearchState(w, bound=bound)
    for it in range(1, budget + 1):
        state.iterations = it
        spf, cfg = _ecmp(topo, dests, w)
        worst, worst_D = 0.0, None
        for e in range(topo.m):
            D, u = worst_case_dm(topo, spf, cfg, e, spec, "any-pd")
            if u > worst + 1e-12:
                worst, worst_D = u, D
        if worst_D is not None:
            worst_D = normalize_demand(topo, worst_D)
            if worst_D and not any(D == worst_D for D in state.critical):
                state.critical.append(worst_D)
        state.best = min(state.best, worst)
        record = {"iteration": it, "utilization": worst, "critical": len(state.critical), "move": None}
        if worst <= bound:
            state.status = "bound"
            state.trace.append(record)
            break
        current = _score(topo, dests, w, state.critical)
        moves = [(a, d) for a in range(topo.m) for d in STEPS
                 if 1 <= w[a] + d <= MAX_WEIGHT]

        def trial(move):
            a, d = move
            w2 = w.copy()
            w2[a] += d
            return _score(topo, dests, w2, state.critical)

        if threads > 1:
            with ThreadPoolExecutor(threads) as pool:
                scores = list(pool.map(trial, moves))
        else:
            scores = [trial(mv) for mv in moves]
        k = int(np.argmin(scores)) if scores else -1
        if k < 0 or scores[k] >= current - 1e-12:
            state.status = "stalled"
            state.trace.append(record)
            break
        a, d = moves[k]
        w[a] += d
        record["move"] = [*topo.arc_label(a), d]
        record["score"] = scores[k]
        state.trace.append(record)
        log.debug("round %d: %s by %+d -> %.6g", it, topo.arc_label(a), d, scores[k])
    state.weights = w
    return state
