"""Command line entry point: ``oblite <verb> ...``.

Exit codes: 0 success, 1 bad input, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .analysis import RunManifest, compare_csv, compare_table, lemma1_routing, path_stretch, stretch_csv
from .dagsearch import integer_weights, local_search_weights
from .demands import DemandError, DemandSpec, margin_box, write_demand_json
from .fileio import (config_to_dict, dags_to_dict, load_config, load_dags, load_demands, load_topology,
                     read_text, write_output)
from .fixtures import (bipartition_gadget, bipartition_spec, golden_variant, path_gap, path_gap_spec,
                       running_example, running_example_dags, two_vertex_spec)
from .oracles import NORMALIZATIONS, NumericalFailure, perf_ratio
from .routing import ConfigError, max_link_utilization
from .splitting import OptimizerOptions, optimize_discrete, optimize_oblivious
from .topology import TopologyError, build_dags, serialize_topology
from .translate import emit_lie_plan, evaluate_quantized, lie_plan_json, virtual_link_plan

log = logging.getLogger("oblite")

EXIT_OK, EXIT_USER, EXIT_NUMERIC = 0, 1, 2


class UserError(Exception):
    pass


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("OBLITE_THREADS")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise UserError(f"OBLITE_THREADS must be an integer, got {env!r}")


def _manifest(args, *paths) -> RunManifest:
    skip = {"func", "output", "threads", "verbose"}
    opts = {k: v for k, v in sorted(vars(args).items()) if k not in skip and k not in paths}
    m = RunManifest(args.command, options=opts)
    for key in paths:
        p = getattr(args, key, None)
        if p:
            m.add_input(p, read_text(p))
    return m


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _box_from(spec: DemandSpec, margin) -> DemandSpec:
    """Box mode input: an explicit box, a single matrix widened by ``margin``,
    or the bounding box of a list of matrices."""
    if margin is not None:
        if not spec.is_discrete or len(spec.matrices) != 1:
            raise UserError("--margin needs a demand file with exactly one matrix")
        return margin_box(spec.matrices[0], margin)
    if not spec.is_discrete:
        return spec
    pairs = spec.pairs()
    lo = {p: min(D.get(p, 0.0) for D in spec.matrices) for p in pairs}
    hi = {p: max(D.get(p, 0.0) for D in spec.matrices) for p in pairs}
    return DemandSpec.box(lo, hi)


def _spec_for_mode(spec, mode, margin=None):
    if mode == "discrete":
        if not spec.is_discrete:
            raise UserError("discrete mode needs a list of demand matrices")
        return spec
    if mode == "oblivious":
        return DemandSpec.unbounded(spec.pairs())
    return _box_from(spec, margin)


def _options(args) -> OptimizerOptions:
    return OptimizerOptions(max_iter=args.max_iter, tol=args.tol, patience=args.patience,
                            normalization=args.normalization)


# -- verbs ---------------------------------------------------------------------------

def cmd_build_dags(args):
    topo = load_topology(args.topology)
    spec = load_demands(args.demands, topo) if args.demands else None
    dests = args.destinations or (spec.destinations() if spec else None)
    if dests is not None:
        dests = [topo.labels[d] if isinstance(d, int) else d for d in dests]
    if args.heuristic == "local-search":
        if spec is None:
            raise UserError("local-search needs --demands")
        state = local_search_weights(topo, spec, args.bound, args.budget, threads=_threads(args))
        weights = state.weights.astype(float)
        if args.trace:
            Path(args.trace).write_text(state.trace_jsonl())
        log.info("local search: %s after %d rounds, worst %.6g", state.status, state.iterations, state.best)
    else:
        weights = integer_weights(topo).astype(float) if args.integer else 1.0 / topo.capacity
    dags, spf = build_dags(topo, dests, weights, augment=not args.no_augment)
    out = dags_to_dict(dags, spf, weights)
    out["manifest"] = _manifest(args, "topology", "demands").to_dict()
    write_output(args.output, _dump(out))


def cmd_optimize(args):
    topo = load_topology(args.topology)
    dags, spf, _ = load_dags(args.dags, topo)
    spec = _spec_for_mode(load_demands(args.demands, topo), args.mode, args.margin)
    opts = _options(args)
    if args.mode == "discrete":
        res = optimize_discrete(topo, dags, spec, opts=opts, spf=spf)
    else:
        res = optimize_oblivious(topo, dags, spec, opts=opts, spf=spf)
    if res.status == "solver_failure":
        log.warning("convex subproblem failed; returning the best configuration found")
    out = config_to_dict(res.config)
    out.update({"alpha": res.alpha, "status": res.status, "fallback": res.fallback,
                "manifest": _manifest(args, "topology", "dags", "demands").to_dict()})
    write_output(args.output, _dump(out))
    if args.trace:
        Path(args.trace).write_text(res.trace_csv())
    if args.certificate and res.certificate is not None:
        Path(args.certificate).write_text(res.certificate.to_json(topo))


def _load_cfg(args, topo):
    dags = load_dags(args.dags, topo)[0] if args.dags else None
    cfg = load_config(args.config, topo, dags)
    return cfg.dags, cfg


def cmd_evaluate(args):
    topo = load_topology(args.topology)
    dags, cfg = _load_cfg(args, topo)
    spec = load_demands(args.demands, topo)
    mode = args.mode or ("discrete" if spec.is_discrete else "box")
    spec = _spec_for_mode(spec, mode, args.margin)
    rep = perf_ratio(topo, dags, cfg, spec, args.normalization, args.method)
    out = {"ratio": rep.ratio, "mode": rep.mode, "normalization": rep.normalization, "rows": rep.rows,
           "manifest": _manifest(args, "topology", "dags", "config", "demands").to_dict()}
    if spec.is_discrete:
        out["utilization"] = [max_link_utilization(cfg, D).to_dict(topo) for D in spec.matrices]
    write_output(args.output, _dump(out))
    if args.certificate and rep.certificate is not None:
        Path(args.certificate).write_text(rep.certificate.to_json(topo))
    if args.csv:
        Path(args.csv).write_text(rep.to_csv())


def cmd_compare(args):
    topo = load_topology(args.topology)
    if args.dags:
        dags, spf, _ = load_dags(args.dags, topo)
        if spf is None:
            raise UserError(f"{args.dags} has no shortest-path DAGs (needed for the ECMP row)")
    else:
        dags, spf = build_dags(topo, None, 1.0 / topo.capacity)
    spec = load_demands(args.base, topo)
    if not spec.is_discrete or len(spec.matrices) != 1:
        raise UserError("--base must hold exactly one demand matrix")
    name = args.name or Path(args.topology).stem
    opts = OptimizerOptions(max_iter=args.max_iter, normalization=args.normalization)
    rows = compare_table(topo, dags, spf, spec.matrices[0], args.margins, name, opts)
    write_output(args.output, compare_csv(rows, _manifest(args, "topology", "dags", "base")))


def cmd_stretch(args):
    topo = load_topology(args.topology)
    _, cfg = _load_cfg(args, topo)
    m = _manifest(args, "topology", "dags", "config")
    write_output(args.output, m.csv_header() + stretch_csv(topo, path_stretch(cfg)))


def cmd_translate(args):
    topo = load_topology(args.topology)
    spf = None
    if args.dags:
        dags, spf, weights = load_dags(args.dags, topo)
        cfg = load_config(args.config, topo, dags)
    else:
        cfg = load_config(args.config, topo)
        dags, weights = cfg.dags, None
    plan = emit_lie_plan(dags, cfg, args.budget, spf, weights)
    if args.demands:
        spec = load_demands(args.demands, topo)
        mode = args.mode or ("discrete" if spec.is_discrete else "box")
        spec = _spec_for_mode(spec, mode)
        vplan = virtual_link_plan(cfg, args.budget)
        plan["evaluation"] = {
            "quantized_ratio": evaluate_quantized(dags, vplan, spec, args.normalization).ratio,
            "ideal_ratio": perf_ratio(topo, dags, cfg, spec, args.normalization).ratio,
        }
    plan["manifest"] = _manifest(args, "topology", "dags", "config", "demands").to_dict()
    write_output(args.output, lie_plan_json(plan) + "\n")


def cmd_fixture(args):
    kind, params = args.kind, args.params
    dags = None
    if kind == "running-example":
        topo = running_example()
        spec = two_vertex_spec(topo)
        dags = running_example_dags(topo)
    elif kind == "golden-variant":
        topo = golden_variant()
        spec = two_vertex_spec(topo)
        dags = running_example_dags(topo)
    elif kind == "bipartition":
        if not params:
            raise UserError("bipartition needs the integer weights, e.g. 'fixture bipartition 1 1'")
        weights = [float(x) for x in params]
        topo = bipartition_gadget(weights)
        spec = bipartition_spec(topo, weights)
    elif kind == "path-gap":
        if len(params) != 1:
            raise UserError("path-gap needs one size, e.g. 'fixture path-gap 3'")
        n = int(params[0])
        topo = path_gap(n)
        spec = path_gap_spec(topo, n)
    else:
        raise UserError(f"unknown fixture {kind!r}")
    out = Path(args.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    (out / "topology.txt").write_text(serialize_topology(topo))
    (out / "demands.json").write_text(write_demand_json(spec, topo) + "\n")
    if dags is not None:
        (out / "dags.json").write_text(_dump(dags_to_dict(dags)))
    print(f"wrote {kind} fixture ({topo.n} nodes, {topo.m} arcs) to {out}")


def cmd_lemma1(args):
    topo = bipartition_gadget(args.weights)
    cfg = lemma1_routing(topo, args.weights, args.part)
    out = config_to_dict(cfg)
    if args.evaluate:
        rep = perf_ratio(topo, cfg.dags, cfg, bipartition_spec(topo, args.weights), "any-pd")
        out["ratio"] = rep.ratio
    out["manifest"] = _manifest(args).to_dict()
    write_output(args.output, _dump(out))


# -- parser --------------------------------------------------------------------------

def _add_opt_flags(p):
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="in-dag",
                   help="demands-aware optimum inside the DAGs or over any routing (default in-dag)")
    p.add_argument("--max-iter", type=int, default=50, help="outer iterations (default 50)")
    p.add_argument("--tol", type=float, default=1e-4, help="no-progress threshold on alpha (default 1e-4)")
    p.add_argument("--patience", type=int, default=3, help="no-progress iterations before stopping (default 3)")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: $OBLITE_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="oblite", parents=[common], description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dags", parents=[common], help="per-destination DAGs from link weights")
    p.add_argument("topology")
    p.add_argument("--heuristic", choices=["inverse-capacity", "local-search"], default="inverse-capacity")
    p.add_argument("--demands", help="demand file (required for local-search)")
    p.add_argument("--destinations", nargs="+", help="destination labels (default: all, or the demand file's)")
    p.add_argument("--bound", type=float, default=1.0, help="local-search target ratio (default 1.0)")
    p.add_argument("--budget", type=int, default=200, help="local-search rounds (default 200)")
    p.add_argument("--integer", action="store_true", help="round inverse-capacity weights to integers")
    p.add_argument("--no-augment", action="store_true", help="keep the pure shortest-path DAGs")
    p.add_argument("--trace", help="JSON-lines trace of the local search")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_build_dags)

    p = sub.add_parser("optimize", parents=[common], help="optimize splitting ratios")
    p.add_argument("topology")
    p.add_argument("dags")
    p.add_argument("demands")
    p.add_argument("--mode", choices=["discrete", "oblivious", "box"], default="discrete",
                   help="discrete: the listed matrices; oblivious: all demands on the listed pairs; "
                        "box: per-pair bounds (bounding box of the listed matrices, or --margin)")
    p.add_argument("--margin", type=float, help="box mode: widen a single matrix to [d/x, x*d]")
    _add_opt_flags(p)
    p.add_argument("--trace", help="alpha trace CSV")
    p.add_argument("--certificate", help="dual certificate JSON (oblivious and box modes)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", parents=[common], help="worst-case performance ratio of a configuration")
    p.add_argument("topology")
    p.add_argument("config")
    p.add_argument("demands")
    p.add_argument("--dags", help="DAG-set file (default: the arcs listed in the configuration)")
    p.add_argument("--mode", choices=["discrete", "oblivious", "box"])
    p.add_argument("--margin", type=float)
    p.add_argument("--method", choices=["certificate", "vertices"], default="certificate")
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="in-dag")
    p.add_argument("--certificate", help="write the dual certificate JSON")
    p.add_argument("--csv", help="write per-row CSV")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser(
        "compare", parents=[common], help="ECMP / base / oblivious / partial-knowledge table",
        description="For every margin x the demands may vary per pair in [d/x, x*d] around the base "
                    "matrix.  Base holds the base matrix's demands-aware optimal splitting fixed and "
                    "evaluates it over that box.  Ratios are normalized by the in-DAG optimum.")
    p.add_argument("topology")
    p.add_argument("--base", required=True, help="demand file with one base matrix")
    p.add_argument("--margins", type=float, nargs="+", default=[1.0, 2.0])
    p.add_argument("--dags", help="DAG-set file with shortest-path DAGs (default: inverse-capacity)")
    p.add_argument("--name", help="network name for the first column")
    p.add_argument("--max-iter", type=int, default=50)
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="in-dag")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stretch", parents=[common], help="expected hop count over fewest hops, per pair")
    p.add_argument("topology")
    p.add_argument("config")
    p.add_argument("--dags")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_stretch)

    p = sub.add_parser("translate", parents=[common], help="virtual-link plan approximating the ratios")
    p.add_argument("topology")
    p.add_argument("config")
    p.add_argument("--budget", type=int, default=3, help="extra virtual links per next hop (default 3)")
    p.add_argument("--dags", help="DAG-set file; its shortest-path DAGs mark non-shortest arcs")
    p.add_argument("--demands", help="also evaluate the quantized configuration on these demands")
    p.add_argument("--mode", choices=["discrete", "oblivious", "box"])
    p.add_argument("--normalization", choices=NORMALIZATIONS, default="in-dag")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("fixture", parents=[common], help="write a built-in instance")
    p.add_argument("kind", choices=["running-example", "golden-variant", "bipartition", "path-gap"])
    p.add_argument("params", nargs="*", help="bipartition: weights; path-gap: n")
    p.add_argument("-o", "--output", help="output directory (default .)")
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("lemma1", parents=[common], help="the reduction routing for a bipartition")
    p.add_argument("--weights", type=float, nargs="+", required=True)
    p.add_argument("--part", type=int, nargs="+", required=True, help="1-based indices of the first part")
    p.add_argument("--evaluate", action="store_true", help="include the ratio over the two extreme demands")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_lemma1)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _threads(args)
        args.func(args)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UserError, TopologyError, DemandError, ConfigError, ValueError, KeyError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
