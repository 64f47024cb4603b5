"""Experiment-level helpers behind the command line: the comparison table,
path stretch, the reduction routing, and run manifests."""
from __future__ import annotations

import hashlib
import io
import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .demands import DemandError, DemandMatrix, DemandSpec, margin_box
from .oracles import flows_to_config, optu, perf_ratio
from .routing import SplittingConfig, ecmp_config
from .splitting import OptimizerOptions, optimize_oblivious
from .topology import DagSet, _make_dag

log = logging.getLogger(__name__)


# -- manifests ------------------------------------------------------------------------

@dataclass
class RunManifest:
    command: str
    inputs: dict = field(default_factory=dict)     # path -> sha256 of contents
    options: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    version: str = __version__

    def add_input(self, path, text: str):
        self.inputs[str(path)] = hashlib.sha256(text.encode()).hexdigest()

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_header(self) -> str:
        return "# manifest: " + json.dumps(self.to_dict(), sort_keys=True) + "\n"


# -- reduction routing -----------------------------------------------------------------

def lemma1_routing(topo, weights, part_one) -> SplittingConfig:
    """Routing on the bipartition instance built from a valid split of ``weights``.

    ``part_one`` holds 1-based indices of the first part.  At s1 gadget i gets
    ``4 w_i / (3 SUM)`` when i is in the first part and ``2 w_i / (3 SUM)``
    otherwise (symmetrically at s2).  Inside a gadget of the first part
    x{i}_1 sends half its traffic across to x{i}_2 and half to m{i}; the
    other endpoint goes straight to m{i}.
    """
    w = [float(x) for x in weights]
    total = sum(w)
    p1 = {int(i) for i in part_one}
    if not p1 <= set(range(1, len(w) + 1)):
        raise DemandError(f"part indices {sorted(p1)} out of range 1..{len(w)}")
    if not p1 or abs(sum(w[i - 1] for i in p1) - total / 2) > 1e-9:
        raise DemandError("not a valid bipartition: both parts must sum to SUM/2")
    t = topo.node("t")
    ratios = {}

    def put(u, v, r):
        ratios[topo.arc(u, v)] = r

    for i, wi in enumerate(w, start=1):
        x1, x2, m = f"x{i}_1", f"x{i}_2", f"m{i}"
        first = i in p1
        put("s1", x1, (4 if first else 2) * wi / (3 * total))
        put("s2", x2, (2 if first else 4) * wi / (3 * total))
        near, far = (x1, x2) if first else (x2, x1)
        put(near, far, 0.5)
        put(near, m, 0.5)
        put(far, m, 1.0)
        put(m, "t", 1.0)
    dag = _make_dag(topo, t, [a for a, r in ratios.items() if r > 0])
    return SplittingConfig(DagSet(topo, {t: dag}), {t: ratios})


# -- stretch ---------------------------------------------------------------------------

def hop_distances_to(topo, t) -> np.ndarray:
    """Unweighted hop count from every node to ``t``."""
    dist = np.full(topo.n, np.inf)
    dist[t] = 0
    pred = [[] for _ in range(topo.n)]
    for u, v in topo.arcs():
        pred[v].append(u)
    q = deque([t])
    while q:
        v = q.popleft()
        for u in pred[v]:
            if dist[u] == np.inf:
                dist[u] = dist[v] + 1
                q.append(u)
    return dist


def path_stretch(config: SplittingConfig, pairs=None) -> list:
    """Per pair: expected hop count under the splitting ratios over the
    fewest-hops distance.  Rows are ``(s, t, expected, shortest, stretch)``."""
    topo = config.topo
    if pairs is None:
        pairs = [(s, t) for t in config.dags for s in range(topo.n) if s != t]
    rows = []
    for s, t in pairs:
        hops = hop_distances_to(topo, t)
        if not np.isfinite(hops[s]):
            continue
        F = config.fractions(t)
        if F[s, t] < 1 - 1e-9:
            continue
        expected = sum(F[s, topo.src[a]] * r for a, r in config.ratios[t].items())
        rows.append((s, t, float(expected), float(hops[s]), float(expected / hops[s])))
    return rows


def stretch_csv(topo, rows) -> str:
    out = io.StringIO()
    out.write("src,dst,expected_hops,shortest_hops,stretch\n")
    for s, t, e, h, r in rows:
        out.write(f"{topo.labels[s]},{topo.labels[t]},{float(e)!r},{float(h)!r},{float(r)!r}\n")
    if rows:
        out.write(f"# average stretch {float(np.mean([r[4] for r in rows]))!r}\n")
    return out.getvalue()


# -- comparison table ------------------------------------------------------------------

COMPARE_COLUMNS = ["network", "margin", "ECMP", "Base", "obl.", "par.know."]


def base_config(topo, dags, base: DemandMatrix) -> SplittingConfig:
    """Splitting ratios of the demands-aware optimum for ``base`` inside the
    DAGs, held fixed when the demands later vary."""
    res = optu(topo, base, dags)
    return flows_to_config(topo, res.flows, dags)


def compare_table(topo, dags, spf, base: DemandMatrix, margins, network: str = "net",
                  opts: OptimizerOptions | None = None) -> list:
    """Rows of worst-case ratios over the margin boxes for four protocols.

    ECMP and the demands-aware base routing are fixed; the oblivious row is
    optimized once for all demands; the partial-knowledge row is optimized
    per margin, warm-started from the oblivious configuration.  All ratios
    are normalized by the in-DAG demands-aware optimum.
    """
    opts = opts or OptimizerOptions()
    if any(x < 1 for x in margins):
        raise DemandError("margins must be >= 1")
    pairs = base.pairs()
    sub = DagSet(topo, {t: dags[t] for t in sorted({t for _, t in pairs})})
    sub_spf = DagSet(topo, {t: spf[t] for t in sub})
    ecmp = ecmp_config(sub, sub_spf)
    fixed = base_config(topo, sub, base)
    obl = optimize_oblivious(topo, sub, DemandSpec.unbounded(pairs), opts=opts, spf=sub_spf).config
    rows = []
    for x in margins:
        box = margin_box(base, x)
        par = optimize_oblivious(topo, sub, box, phi_init=obl, opts=opts, spf=sub_spf)
        rows.append({
            "network": network,
            "margin": float(x),
            "ECMP": perf_ratio(topo, sub, ecmp, box, opts.normalization).ratio,
            "Base": perf_ratio(topo, sub, fixed, box, opts.normalization).ratio,
            "obl.": perf_ratio(topo, sub, obl, box, opts.normalization).ratio,
            "par.know.": par.alpha,
        })
    return rows


def compare_csv(rows, manifest: RunManifest | None = None) -> str:
    out = io.StringIO()
    if manifest is not None:
        out.write(manifest.csv_header())
    out.write(",".join(COMPARE_COLUMNS) + "\n")
    for r in rows:
        out.write(",".join(r["network"] if k == "network" else f"{r[k]:.6f}" for k in COMPARE_COLUMNS) + "\n")
    return out.getvalue()
