"""Oblivious per-destination traffic engineering on small networks.

Build forwarding DAGs, optimize splitting ratios against a set of demand
matrices, certify worst-case performance ratios with LP duality, and
translate ratios into ECMP-compatible virtual next hops.
"""
__version__ = "0.1.0"

from .demands import DemandMatrix, DemandSpec  # noqa: E402
from .oracles import certify_oblivious_ratio, optu, perf_ratio  # noqa: E402
from .routing import SplittingConfig, ecmp_config, max_link_utilization  # noqa: E402
from .splitting import OptimizerOptions, optimize_discrete, optimize_oblivious  # noqa: E402
from .topology import Topology, build_dags, make_topology, parse_topology  # noqa: E402

__all__ = [
    "DemandMatrix", "DemandSpec", "OptimizerOptions", "SplittingConfig", "Topology",
    "build_dags", "certify_oblivious_ratio", "ecmp_config", "make_topology", "max_link_utilization",
    "optimize_discrete", "optimize_oblivious", "optu", "parse_topology", "perf_ratio",
]
