import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oblite.demands import DemandMatrix, DemandSpec
from oblite.fixtures import halves_config, two_thirds_config
from oblite.oracles import (NORMALIZATIONS, certify_oblivious_ratio, check_certificate, flows_to_config,
                            normalize_demand, optu, perf_ratio, remove_cycles, worst_case_dm)
from oblite.routing import ecmp_config, load_coefficients, max_link_utilization

from conftest import random_box, random_config, random_instance
from scipy_oracles import optu_reference, slave_reference


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.booleans())
def test_optu_matches_reference(seed, restrict):
    rng, topo, dags, spf, pairs = random_instance(seed)
    D = DemandMatrix({p: float(rng.uniform(0.1, 3.0)) for p in pairs})
    d = dags if restrict else None
    assert optu(topo, D, d).alpha == pytest.approx(optu_reference(topo, D, d), rel=1e-7, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_optu_flows_define_an_optimal_routing(seed):
    rng, topo, dags, spf, pairs = random_instance(seed)
    D = DemandMatrix({p: float(rng.uniform(0.1, 3.0)) for p in pairs})
    res = optu(topo, D, dags)
    cfg = flows_to_config(topo, res.flows, dags)
    assert max_link_utilization(cfg, D).max_utilization == pytest.approx(res.alpha, rel=1e-6)


def test_remove_cycles_keeps_net_flow():
    from oblite.topology import make_topology
    topo = make_topology([("a", "b", 1), ("b", "c", 1), ("c", "a", 1), ("a", "t", 1)], directed=True)
    flow = np.array([1.0, 1.0, 1.0, 2.0])
    out = remove_cycles(topo, flow)
    assert np.allclose(out, [0, 0, 0, 2])


def test_normalized_demand_has_unit_optu():
    rng, topo, dags, spf, pairs = random_instance(11)
    D = DemandMatrix({p: 5.0 for p in pairs})
    assert optu(topo, normalize_demand(topo, D, dags), dags).alpha == pytest.approx(1.0)
    assert normalize_demand(topo, DemandMatrix({}), dags) == {}


def test_running_example_ratios(fig1, fig1_spec):
    topo, dags = fig1
    assert perf_ratio(topo, dags, halves_config(dags), fig1_spec).ratio == pytest.approx(1.5, abs=1e-9)
    assert perf_ratio(topo, dags, two_thirds_config(dags), fig1_spec).ratio == pytest.approx(4 / 3, abs=1e-9)


@pytest.mark.parametrize("normalization", NORMALIZATIONS)
def test_slave_lp_matches_reference(normalization):
    for seed in range(15):
        rng, topo, dags, spf, pairs = random_instance(seed)
        cfg = random_config(rng, dags)
        spec = random_box(rng, pairs)
        L = load_coefficients(cfg, pairs) / topo.capacity
        restrict = dags if normalization == "in-dag" else None
        for e in range(topo.m):
            if not L[:, e].any():
                continue
            D, val = worst_case_dm(topo, dags, cfg, e, spec, normalization)
            ref = slave_reference(topo, L[:, e], pairs, restrict, spec.lo, spec.hi)
            assert val == pytest.approx(ref, rel=1e-7, abs=1e-8)
            assert sum(L[k, e] * D.get(p, 0.0) for k, p in enumerate(pairs)) == pytest.approx(val, abs=1e-8)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31 - 1), st.booleans())
def test_certificate_is_valid(seed, unbounded):
    rng, topo, dags, spf, pairs = random_instance(seed)
    cfg = random_config(rng, dags)
    spec = DemandSpec.unbounded(pairs) if unbounded else random_box(rng, pairs)
    cert = certify_oblivious_ratio(topo, dags, cfg, spec)
    viol = check_certificate(topo, cfg, cert, dags, spec)
    assert max(viol.values()) <= 1e-7, viol


def test_certificate_bounds_every_sampled_demand():
    """Weak duality in the direction a user cares about: no routable demand
    in the set does worse than the certified ratio."""
    for seed in range(8):
        rng, topo, dags, spf, pairs = random_instance(seed)
        cfg = random_config(rng, dags)
        spec = random_box(rng, pairs)
        bound = perf_ratio(topo, dags, cfg, spec).ratio
        for _ in range(20):
            lam = rng.uniform(0, 1)
            D = DemandMatrix({p: spec.lo[p] + lam * (spec.hi[p] - spec.lo[p]) * rng.uniform() for p in pairs})
            r = max_link_utilization(cfg, D).max_utilization / optu(topo, D, dags).alpha
            assert r <= bound + 1e-7


def test_ecmp_is_optimal_on_a_single_link():
    from oblite.topology import build_dags, make_topology
    topo = make_topology([("a", "b", 1.0)])
    dags, spf = build_dags(topo)
    cfg = ecmp_config(dags, spf)
    spec = DemandSpec.unbounded([(0, 1), (1, 0)])
    assert perf_ratio(topo, dags, cfg, spec).ratio == pytest.approx(1.0)


def test_discrete_requires_known_method(fig1, fig1_spec):
    topo, dags = fig1
    spec = DemandSpec.unbounded([(topo.node("s1"), topo.node("t"))])
    with pytest.raises(ValueError):
        perf_ratio(topo, dags, halves_config(dags), spec, method="guess")
    with pytest.raises(ValueError):
        perf_ratio(topo, dags, halves_config(dags), fig1_spec, normalization="other")
