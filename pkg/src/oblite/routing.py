"""Per-destination splitting configurations and their evaluation."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .topology import DagSet

log = logging.getLogger(__name__)

SUM_TOL = 1e-6


class ConfigError(ValueError):
    pass


class SplittingConfig:
    """Splitting ratios ``ratios[t][arc]`` on the arcs of a DAG set.

    At every node with outgoing DAG arcs the ratios sum to one.  Arcs of the
    DAG missing from ``ratios[t]`` carry ratio 0.
    """

    def __init__(self, dags: DagSet, ratios: dict, validate: bool = True):
        self.dags = dags
        self.topo = dags.topo
        self.ratios = {t: {int(a): float(r) for a, r in ratios.get(t, {}).items()} for t in dags}
        if validate:
            self.validate()
        self._fractions = {}

    def validate(self):
        topo = self.topo
        for t, dag in self.dags.items():
            phi = self.ratios[t]
            extra = set(phi) - set(dag.edges)
            if extra:
                raise ConfigError(f"ratios toward {topo.labels[t]} on non-DAG arcs {sorted(extra)}")
            sums = np.zeros(topo.n)
            has_out = np.zeros(topo.n, bool)
            for a in dag.edges:
                r = phi.get(a, 0.0)
                if not (-1e-12 <= r <= 1 + 1e-12):
                    raise ConfigError(f"ratio {r} outside [0, 1] on {topo.arc_label(a)}")
                sums[topo.src[a]] += r
                has_out[topo.src[a]] = True
            bad = np.flatnonzero(has_out & (np.abs(sums - 1) > SUM_TOL))
            if bad.size:
                v = bad[0]
                raise ConfigError(f"ratios at {topo.labels[v]} toward {topo.labels[t]} sum to {sums[v]}")

    def phi(self, t, a) -> float:
        return self.ratios[t].get(a, 0.0)

    def matrix(self, t) -> np.ndarray:
        P = np.zeros((self.topo.n, self.topo.n))
        for a, r in self.ratios[t].items():
            P[self.topo.src[a], self.topo.dst[a]] = r
        return P

    def fractions(self, t) -> np.ndarray:
        """``F[s, v]``: fraction of the s->t demand entering v."""
        if t not in self._fractions:
            n = self.topo.n
            self._fractions[t] = np.linalg.solve(np.eye(n) - self.matrix(t), np.eye(n))
        return self._fractions[t]

    def destinations(self):
        return self.dags.destinations

    def to_json(self) -> str:
        topo = self.topo
        out = {}
        for t in sorted(self.dags, key=lambda x: topo.labels[x]):
            rows = []
            for a in sorted(self.dags[t].edges, key=lambda a: topo.arc_label(a)):
                u, v = topo.arc_label(a)
                rows.append({"src": u, "dst": v, "ratio": self.phi(t, a)})
            out[topo.labels[t]] = rows
        return json.dumps(out, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str, dags: DagSet) -> "SplittingConfig":
        topo = dags.topo
        data = json.loads(text)
        ratios = {}
        for tl, rows in data.items():
            t = topo.node(tl)
            if t not in dags:
                raise ConfigError(f"destination {tl} not in the DAG set")
            ratios[t] = {}
            for r in rows:
                a = topo.arc(r["src"], r["dst"])
                if a is None:
                    raise ConfigError(f"unknown arc {r['src']}->{r['dst']}")
                ratios[t][a] = float(r["ratio"])
        return cls(dags, ratios)


def config_from_labels(dags: DagSet, ratios: dict) -> SplittingConfig:
    """``{t_label: {(u_label, v_label): ratio}}`` convenience constructor."""
    topo = dags.topo
    out = {}
    for tl, row in ratios.items():
        t = topo.node(tl)
        out[t] = {topo.arc(u, v): r for (u, v), r in row.items()}
    return SplittingConfig(dags, out)


def ecmp_config(dags: DagSet, spf: DagSet | None = None) -> SplittingConfig:
    """Equal split over the shortest-path next hops; augmented arcs get 0."""
    topo = dags.topo
    spf = dags if spf is None else spf
    ratios = {}
    for t, dag in dags.items():
        sp = spf[t].edges
        if not sp <= dag.edges:
            raise ConfigError(f"SPF edges toward {topo.labels[t]} are not inside the DAG")
        ratios[t] = {}
        for u in {int(topo.src[a]) for a in dag.edges}:
            hops = [a for a in sp if topo.src[a] == u]
            if not hops:
                raise ConfigError(f"{topo.labels[u]} has DAG arcs but no shortest-path next hop")
            for a in hops:
                ratios[t][a] = 1.0 / len(hops)
    return SplittingConfig(dags, ratios)


def uniform_config(dags: DagSet) -> SplittingConfig:
    """Equal split over every DAG out-arc (augmented ones included)."""
    topo = dags.topo
    ratios = {}
    for t, dag in dags.items():
        outdeg = np.bincount([topo.src[a] for a in dag.edges], minlength=topo.n)
        ratios[t] = {a: 1.0 / outdeg[topo.src[a]] for a in dag.edges}
    return SplittingConfig(dags, ratios)


def propagate_fractions(config: SplittingConfig, pairs) -> dict:
    """``{(s, t): f}`` with ``f[v]`` the share of the s->t demand entering v."""
    out = {}
    for s, t in pairs:
        if s == t:
            continue
        out[(s, t)] = config.fractions(t)[s].copy()
    return out


def unroutable_pairs(config: SplittingConfig, pairs, tol=1e-9) -> list:
    bad = []
    for s, t in pairs:
        if t not in config.dags or config.fractions(t)[s, t] < 1 - tol:
            bad.append((s, t))
    return bad


def load_coefficients(config: SplittingConfig, pairs) -> np.ndarray:
    """``L[k, a] = f_{s_k t_k}(u) * phi_{t_k}(a)`` for arc ``a = (u, v)``."""
    topo = config.topo
    L = np.zeros((len(pairs), topo.m))
    for k, (s, t) in enumerate(pairs):
        F = config.fractions(t)
        for a, r in config.ratios[t].items():
            if r:
                L[k, a] = F[s, topo.src[a]] * r
    return L


@dataclass
class UtilizationReport:
    load: np.ndarray
    utilization: np.ndarray
    max_utilization: float
    argmax: int | None
    unroutable: list

    def to_dict(self, topo) -> dict:
        return {
            "max_utilization": self.max_utilization,
            "argmax": None if self.argmax is None else list(topo.arc_label(self.argmax)),
            "arcs": [{"src": topo.arc_label(a)[0], "dst": topo.arc_label(a)[1],
                      "load": float(self.load[a]), "utilization": float(self.utilization[a])}
                     for a in range(topo.m)],
            "unroutable": [[topo.labels[s], topo.labels[t]] for s, t in self.unroutable],
        }

    def to_csv(self, topo) -> str:
        lines = ["src,dst,load,utilization"]
        for a in range(topo.m):
            u, v = topo.arc_label(a)
            lines.append(f"{u},{v},{float(self.load[a])!r},{float(self.utilization[a])!r}")
        return "\n".join(lines) + "\n"


def max_link_utilization(config: SplittingConfig, demand) -> UtilizationReport:
    topo = config.topo
    pairs = sorted(p for p, v in demand.items() if v > 0)
    missing = [p for p in pairs if p[1] not in config.dags]
    if missing:
        raise ConfigError(f"no DAG for destinations of pairs {missing}")
    load = np.zeros(topo.m)
    if pairs:
        d = np.array([demand[p] for p in pairs])
        load = d @ load_coefficients(config, pairs)
    util = load / topo.capacity
    bad = unroutable_pairs(config, pairs)
    if bad:
        log.warning("unroutable pairs under this configuration: %s", bad)
    if topo.m == 0:
        return UtilizationReport(load, util, 0.0, None, bad)
    k = int(np.argmax(util))
    return UtilizationReport(load, util, float(util[k]), k if util[k] > 0 else None, bad)
