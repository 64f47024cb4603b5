import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oblite.demands import DemandMatrix, DemandSpec
from oblite.fixtures import running_example_pairs, two_vertex_spec
from oblite.oracles import perf_ratio
from oblite.routing import ecmp_config
from oblite.splitting import (OptimizerOptions, monomial_approx, optimize_discrete, optimize_oblivious,
                              seed_from_ecmp)
from oblite.topology import build_dags

from conftest import random_box, random_instance

GOLDEN = (math.sqrt(5) - 1) / 2


def test_monomial_examples():
    a, k = monomial_approx([1.0, 1.0])
    assert np.allclose(a, [0.5, 0.5]) and k == pytest.approx(2.0)
    a, k = monomial_approx([3.0])
    assert np.allclose(a, [1.0]) and k == pytest.approx(1.0)
    with pytest.raises(ValueError):
        monomial_approx([0.5, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10.0), min_size=1, max_size=6))
def test_monomial_is_tangent_and_below(phi0):
    """The monomial touches the sum at phi0 with equal gradient and never exceeds it."""
    phi0 = np.array(phi0)
    a, k = monomial_approx(phi0)
    mono = lambda x: k * np.prod(x ** a)  # noqa: E731
    assert mono(phi0) == pytest.approx(phi0.sum(), rel=1e-9)
    grad = a * mono(phi0) / phi0
    assert np.allclose(grad, 1.0, rtol=1e-9)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = phi0 * np.exp(rng.normal(size=phi0.size))
        assert mono(x) <= x.sum() * (1 + 1e-12)


def test_seed_is_uniform_over_the_dag(fig1):
    topo, dags = fig1
    seed = seed_from_ecmp(dags)
    t = topo.node("t")
    assert seed[t][topo.arc("s2", "v")] == pytest.approx(0.5)


def test_golden_ratio_on_unit_instance(fig1, fig1_spec):
    topo, dags = fig1
    res = optimize_discrete(topo, dags, fig1_spec)
    t = topo.node("t")
    assert res.alpha == pytest.approx(2 * GOLDEN, abs=1e-6)
    assert res.config.phi(t, topo.arc("s1", "s2")) == pytest.approx(GOLDEN, abs=1e-4)
    assert res.config.phi(t, topo.arc("s2", "t")) == pytest.approx(GOLDEN, abs=1e-4)
    assert res.status == "converged"


def test_oblivious_matches_discrete_on_unit_instance(fig1):
    # the routable set's only non-dominated vertices are the two-vertex
    # matrices, so the unbounded optimum coincides with the discrete one
    topo, dags = fig1
    res = optimize_oblivious(topo, dags, DemandSpec.unbounded(running_example_pairs(topo)))
    assert res.alpha == pytest.approx(2 * GOLDEN, abs=1e-6)
    assert perf_ratio(topo, dags, res.config, DemandSpec.unbounded(running_example_pairs(topo)),
                      method="vertices").ratio == pytest.approx(res.alpha, abs=1e-7)


def test_result_certificate_is_recomputed(fig1):
    topo, dags = fig1
    spec = DemandSpec.box({p: 0.5 for p in running_example_pairs(topo)}, {p: 2.0 for p in running_example_pairs(topo)})
    res = optimize_oblivious(topo, dags, spec)
    assert res.certificate.ratio == res.alpha
    assert perf_ratio(topo, dags, res.config, spec, method="vertices").ratio == pytest.approx(res.alpha, abs=1e-7)


def test_wrong_spec_kind_rejected(fig1, fig1_spec):
    topo, dags = fig1
    with pytest.raises(ValueError):
        optimize_oblivious(topo, dags, fig1_spec)
    with pytest.raises(ValueError):
        optimize_discrete(topo, dags, DemandSpec.unbounded(running_example_pairs(topo)))


def test_zero_demand_returns_seed(fig1):
    topo, dags = fig1
    res = optimize_discrete(topo, dags, DemandSpec.discrete([DemandMatrix({})]))
    assert res.alpha == 0.0 and res.status == "converged"


def test_trace_csv_has_plain_numbers(fig1, fig1_spec):
    topo, dags = fig1
    text = optimize_discrete(topo, dags, fig1_spec).trace_csv()
    assert text.startswith("iteration,alpha,surrogate,step,accepted\n") and "np." not in text


def _check_run(res, ecmp_value, evaluated):
    accepted = res.accepted_alphas()
    assert all(b <= a + 1e-4 for a, b in zip(accepted, accepted[1:])), accepted
    assert evaluated <= ecmp_value + 1e-6
    assert evaluated == pytest.approx(res.alpha, abs=1e-6)


@pytest.mark.parametrize("seed", range(12))
def test_discrete_never_worse_than_ecmp(seed):
    rng, topo, dags, spf, pairs = random_instance(seed)
    spec = DemandSpec.discrete([DemandMatrix({p: float(rng.uniform(0.1, 2)) for p in pairs}) for _ in range(3)])
    res = optimize_discrete(topo, dags, spec, spf=spf, opts=OptimizerOptions(max_iter=15))
    ecmp = perf_ratio(topo, dags, ecmp_config(dags, spf), spec).ratio
    _check_run(res, ecmp, perf_ratio(topo, dags, res.config, spec).ratio)


@pytest.mark.parametrize("seed", range(8))
def test_box_never_worse_than_ecmp(seed):
    rng, topo, dags, spf, pairs = random_instance(seed)
    spec = random_box(rng, pairs)
    res = optimize_oblivious(topo, dags, spec, spf=spf, opts=OptimizerOptions(max_iter=8))
    ecmp = perf_ratio(topo, dags, ecmp_config(dags, spf), spec).ratio
    _check_run(res, ecmp, perf_ratio(topo, dags, res.config, spec).ratio)
