"""Reading and writing the on-disk artifacts used by the command line."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .demands import DemandError, read_demand_csv, read_demand_json
from .routing import ConfigError, SplittingConfig
from .topology import DagSet, dag_from_edges, parse_topology


def read_text(path) -> str:
    return Path(path).read_text()


def load_topology(path):
    return parse_topology(read_text(path))


def load_demands(path, topo):
    text = read_text(path)
    if str(path).endswith(".json"):
        return read_demand_json(text, topo)
    if str(path).endswith(".csv"):
        return read_demand_csv(text, topo)
    raise DemandError(f"{path}: demand files must end in .csv or .json")


def _dagset(topo, data) -> DagSet:
    return DagSet(topo, {topo.node(t): dag_from_edges(topo, t, [tuple(e) for e in edges])
                         for t, edges in data.items()})


def dags_to_dict(dags, spf=None, weights=None) -> dict:
    topo = dags.topo

    def dump(ds):
        return {topo.labels[t]: sorted(list(topo.arc_label(a)) for a in ds[t].edges)
                for t in sorted(ds, key=lambda x: topo.labels[x])}

    out = {"dags": dump(dags)}
    if spf is not None:
        out["spf"] = dump(spf)
    if weights is not None:
        out["weights"] = [{"src": u, "dst": v, "weight": float(w)}
                          for (u, v), w in zip((topo.arc_label(a) for a in range(topo.m)), weights)]
    return out


def load_dags(path, topo):
    """``(dags, spf_or_None, weights_or_None)`` from a DAG-set file."""
    data = json.loads(read_text(path))
    if "dags" not in data:
        raise ConfigError(f"{path}: no 'dags' entry")
    dags = _dagset(topo, data["dags"])
    spf = _dagset(topo, data["spf"]) if "spf" in data else None
    weights = None
    if "weights" in data:
        weights = np.array(topo.weight, float)
        for r in data["weights"]:
            weights[topo.arc(r["src"], r["dst"])] = float(r["weight"])
    return dags, spf, weights


def config_to_dict(config: SplittingConfig) -> dict:
    return {"ratios": json.loads(config.to_json())}


def load_config(path, topo, dags=None) -> SplittingConfig:
    """Splitting configuration; without ``dags`` the DAG toward each
    destination is the set of arcs listed for it."""
    data = json.loads(read_text(path))
    ratios = data.get("ratios", data)
    if dags is None:
        dags = _dagset(topo, {t: [(r["src"], r["dst"]) for r in rows] for t, rows in ratios.items()})
    return SplittingConfig.from_json(json.dumps(ratios), dags)


def write_output(path, text: str):
    if path in (None, "-"):
        print(text, end="" if text.endswith("\n") else "\n")
    else:
        Path(path).write_text(text)
