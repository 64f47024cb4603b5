"""Acceptance criteria, one test per criterion.

Every test records a one-line PASS/FAIL verdict with the measured values and
its runtime; the lines are printed together in the pytest terminal summary
(and directly when this file is run as a script).
"""
import csv
import io
import math
import time

import numpy as np
import pytest

from oblite.analysis import compare_csv, compare_table, lemma1_routing
from oblite.convex import check_derivatives
from oblite.demands import DemandMatrix, DemandSpec
from oblite.fixtures import (bipartition_gadget, bipartition_spec, golden_variant, halves_config, path_gap,
                             path_gap_spec, running_example, running_example_dags, running_example_pairs,
                             two_thirds_config, two_vertex_spec)
from oblite.lp import certificate_residuals, solve_lp
from oblite.oracles import certify_oblivious_ratio, perf_ratio, worst_case_dm
from oblite.routing import ecmp_config, load_coefficients
from oblite.splitting import OptimizerOptions, optimize_discrete, optimize_oblivious
from oblite.topology import build_dags
from oblite.translate import evaluate_quantized, virtual_link_plan

from conftest import random_box, random_config, random_instance
from test_convex import random_lse_problem
from test_lp import random_lp

GOLDEN = (math.sqrt(5) - 1) / 2

#: criterion number -> verdict line; read by the terminal-summary hook
RESULTS = {}
#: every optimizer result produced here, for the monotonicity criterion
RUNS = []


def record(n, ok, detail, elapsed):
    RESULTS[n] = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{elapsed:.2f} s]"
    return ok


def fig1_setup(topo):
    dags = running_example_dags(topo)
    _, spf = build_dags(topo, ["t"])
    return dags, spf


# -- 1 ------------------------------------------------------------------------------------------

@pytest.mark.xfail(strict=True, reason="on the 1e6-capacity variant the optimum is ratio 1 with "
                                       "phi(s1,s2)=1, phi(s2,t)=1/2; the golden split needs c(s1,s2)=1")
def test_criterion_01_golden_ratio_on_large_capacity_variant():
    start = time.perf_counter()
    topo = golden_variant()
    dags, spf = fig1_setup(topo)
    res = optimize_discrete(topo, dags, two_vertex_spec(topo), spf=spf)
    RUNS.append(res)
    elapsed = time.perf_counter() - start
    t = topo.node("t")
    a = res.config.phi(t, topo.arc("s1", "s2"))
    b = res.config.phi(t, topo.arc("s2", "t"))
    ok = abs(a - GOLDEN) <= 0.01 and abs(b - GOLDEN) <= 0.01 and abs(res.alpha - 2 * GOLDEN) <= 0.01 \
        and elapsed < 10
    record(1, ok, f"phi(s1,s2)={a:.4f} phi(s2,t)={b:.4f} alpha={res.alpha:.4f} "
                  f"(want {GOLDEN:.4f}, {GOLDEN:.4f}, {2 * GOLDEN:.4f} +- 0.01)", elapsed)
    assert ok


def test_golden_ratio_on_unit_capacity_instance():
    """Companion to criterion 1: the instance on which the golden split is optimal."""
    topo = running_example()
    dags, spf = fig1_setup(topo)
    start = time.perf_counter()
    res = optimize_discrete(topo, dags, two_vertex_spec(topo), spf=spf)
    RUNS.append(res)
    t = topo.node("t")
    assert time.perf_counter() - start < 10
    assert res.config.phi(t, topo.arc("s1", "s2")) == pytest.approx(GOLDEN, abs=0.01)
    assert res.config.phi(t, topo.arc("s2", "t")) == pytest.approx(GOLDEN, abs=0.01)
    assert res.alpha == pytest.approx(2 * GOLDEN, abs=0.01)


# -- 2 ------------------------------------------------------------------------------------------

def test_criterion_02_ecmp_baseline():
    start = time.perf_counter()
    topo = running_example()
    dags = running_example_dags(topo)
    spec = two_vertex_spec(topo)
    r_ecmp = perf_ratio(topo, dags, halves_config(dags), spec).ratio
    r_fig = perf_ratio(topo, dags, two_thirds_config(dags), spec).ratio
    elapsed = time.perf_counter() - start
    ok = abs(r_ecmp - 1.5) <= 1e-6 and abs(r_fig - 4 / 3) <= 1e-6 and elapsed < 1
    record(2, ok, f"ECMP={r_ecmp:.7f} (want 1.5) two-thirds={r_fig:.7f} (want 1.3333333)", elapsed)
    assert ok


# -- 3 ------------------------------------------------------------------------------------------

def test_criterion_03_duality_agreement():
    start = time.perf_counter()
    edge_gap = box_gap = 0.0
    instances = 0
    for seed in range(24):
        rng, topo, dags, spf, pairs = random_instance(1000 + seed)
        cfg = random_config(rng, dags)
        spec = random_box(rng, pairs)
        cert = certify_oblivious_ratio(topo, dags, cfg, spec)
        L = load_coefficients(cfg, pairs) / topo.capacity
        for e in range(topo.m):
            _, slave = worst_case_dm(topo, dags, cfg, e, spec)
            dual = cert.edges[e].ratio if e in cert.edges else 0.0
            assert not L[:, e].any() or e in cert.edges
            edge_gap = max(edge_gap, abs(slave - dual))
        brute = perf_ratio(topo, dags, cfg, spec, method="vertices").ratio
        box_gap = max(box_gap, abs(brute - cert.ratio))
        instances += 1
    elapsed = time.perf_counter() - start
    ok = instances >= 20 and edge_gap <= 1e-5 and box_gap <= 1e-4 and elapsed < 60
    record(3, ok, f"{instances} topologies, max per-edge |slave - dual|={edge_gap:.2e} (<= 1e-5), "
                  f"max |certified - vertex max|={box_gap:.2e} (<= 1e-4)", elapsed)
    assert ok


# -- 4 ------------------------------------------------------------------------------------------

def test_criterion_04_bipartition_fixture():
    start = time.perf_counter()
    ratios = {}
    for weights, part in (([1, 1], [1]), ([1, 2, 3], [3])):
        topo = bipartition_gadget(weights)
        cfg = lemma1_routing(topo, weights, part)
        ratios[tuple(weights)] = perf_ratio(topo, cfg.dags, cfg, bipartition_spec(topo, weights), "any-pd").ratio
    elapsed = time.perf_counter() - start
    ok = all(abs(r - 4 / 3) <= 1e-6 for r in ratios.values()) and elapsed < 5
    record(4, ok, " ".join(f"W={list(w)}: {r:.7f}" for w, r in ratios.items()) + " (want 1.3333333)", elapsed)
    assert ok


# -- 5 ------------------------------------------------------------------------------------------

def test_criterion_05_path_gap_fixture():
    start = time.perf_counter()
    found = []
    opts = OptimizerOptions(normalization="any-pd")
    for n in (3, 4):
        topo = path_gap(n)
        spec = path_gap_spec(topo, n)
        dags, spf = build_dags(topo, ["t"])
        res = optimize_discrete(topo, dags, spec, opts=opts, spf=spf)
        RUNS.append(res)
        for name, cfg in (("ECMP", ecmp_config(dags, spf)), ("optimized", res.config)):
            found.append((n, name, perf_ratio(topo, dags, cfg, spec, "any-pd").ratio))
    elapsed = time.perf_counter() - start
    ok = all(r >= n - 1e-3 for n, _, r in found) and elapsed < 10
    record(5, ok, " ".join(f"n={n} {name}={r:.4f}" for n, name, r in found) + " (want >= n - 1e-3)", elapsed)
    assert ok


# -- 6 ------------------------------------------------------------------------------------------

def suite_instances():
    """The random-instance suite plus the fixtures: (name, topo, dags, spf, spec)."""
    out = []
    for seed in range(10):
        rng, topo, dags, spf, pairs = random_instance(2000 + seed)
        mats = [DemandMatrix({p: float(rng.uniform(0.1, 2)) for p in pairs}) for _ in range(3)]
        out.append((f"random-{seed}-discrete", topo, dags, spf, DemandSpec.discrete(mats)))
        if seed < 5:
            out.append((f"random-{seed}-box", topo, dags, spf, random_box(rng, pairs)))
    topo = running_example()
    dags, spf = fig1_setup(topo)
    out.append(("fig1-discrete", topo, dags, spf, two_vertex_spec(topo)))
    out.append(("fig1-oblivious", topo, dags, spf, DemandSpec.unbounded(running_example_pairs(topo))))
    return out


def test_criterion_06_no_worse_than_ecmp():
    start = time.perf_counter()
    worst_excess, count = -math.inf, 0
    for name, topo, dags, spf, spec in suite_instances():
        opts = OptimizerOptions(max_iter=15)
        if spec.is_discrete:
            res = optimize_discrete(topo, dags, spec, opts=opts, spf=spf)
        else:
            res = optimize_oblivious(topo, dags, spec, opts=opts, spf=spf)
        RUNS.append(res)
        final = perf_ratio(topo, dags, res.config, spec).ratio
        ecmp = perf_ratio(topo, dags, ecmp_config(dags, spf), spec).ratio
        worst_excess = max(worst_excess, final - ecmp)
        count += 1
    elapsed = time.perf_counter() - start
    ok = worst_excess <= 1e-6
    record(6, ok, f"{count} instances, max(final - ECMP)={worst_excess:.2e} (<= 1e-6)", elapsed)
    assert ok


# -- 7 ------------------------------------------------------------------------------------------

def test_criterion_07_quantization_curve():
    start = time.perf_counter()
    parts, ok = [], True
    for label, topo in (("unit", running_example()), ("1e6", golden_variant())):
        dags, spf = fig1_setup(topo)
        spec = two_vertex_spec(topo)
        res = optimize_discrete(topo, dags, spec, spf=spf)
        RUNS.append(res)
        ideal = perf_ratio(topo, dags, res.config, spec).ratio
        q = {L: evaluate_quantized(dags, virtual_link_plan(res.config, L), spec).ratio for L in (0, 3, 10)}
        gap = q[0] - ideal
        this = (q[0] - q[3] >= 0.25 * gap) and abs(q[10] - ideal) <= 0.05 * ideal
        ok &= this
        parts.append(f"{label}: L0={q[0]:.4f} L3={q[3]:.4f} L10={q[10]:.4f} ideal={ideal:.4f}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 10
    record(7, ok, "; ".join(parts) + " (L3 closes >= 25% of the gap, L10 within 5%)", elapsed)
    assert ok


# -- 8 ------------------------------------------------------------------------------------------

def test_criterion_08_monotone_optimizer():
    start = time.perf_counter()
    runs = list(RUNS)
    if len(runs) < 5:  # run standalone: produce a suite of runs first
        for name, topo, dags, spf, spec in suite_instances():
            opt = optimize_discrete if spec.is_discrete else optimize_oblivious
            runs.append(opt(topo, dags, spec, opts=OptimizerOptions(max_iter=15), spf=spf))
    worst = 0.0
    for res in runs:
        acc = res.accepted_alphas()
        worst = max([worst] + [b - a for a, b in zip(acc, acc[1:])])
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4
    record(8, ok, f"{len(runs)} runs, largest increase between accepted iterates={worst:.2e} (<= 1e-4)",
           elapsed)
    assert ok


# -- 9 ------------------------------------------------------------------------------------------

def test_criterion_09_table_shape():
    start = time.perf_counter()
    topo = running_example()
    dags, spf = build_dags(topo, ["t"])
    base = DemandMatrix({p: 1.0 for p in running_example_pairs(topo)})
    rows = list(csv.DictReader(
        line for line in io.StringIO(compare_csv(compare_table(topo, dags, spf, base, [1.0, 2.0], "fig1a")))
        if not line.startswith("#")))
    ok = len(rows) == 2
    cells = []
    for r in rows:
        par, obl, ecmp = float(r["par.know."]), float(r["obl."]), float(r["ECMP"])
        ok &= par <= obl + 1e-6 and obl <= ecmp + 1e-6
        cells.append(f"margin {r['margin']}: par={par:.4f} obl={obl:.4f} ECMP={ecmp:.4f}")
    elapsed = time.perf_counter() - start
    record(9, ok, "; ".join(cells) + " (par <= obl <= ECMP + 1e-6)", elapsed)
    assert ok


# -- 10 -----------------------------------------------------------------------------------------

def test_criterion_10_solver_property_suites():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    lp_worst, lp_count = 0.0, 0
    while lp_count < 100:
        p = random_lp(rng, int(rng.integers(2, 9)), int(rng.integers(2, 9)))
        sol = solve_lp(p)
        if not sol.ok:
            continue
        lp_worst = max(lp_worst, max(certificate_residuals(p, sol).values()))
        lp_count += 1
    grad_worst = 0.0
    for _ in range(50):
        prob, z0 = random_lse_problem(rng)
        err = check_derivatives(prob.compile(), z0, 1.0, h=1e-6)
        grad_worst = max(grad_worst, err["gradient"], err["hessian"])
    elapsed = time.perf_counter() - start
    ok = lp_worst <= 1e-6 and grad_worst <= 1e-5
    record(10, ok, f"100 LPs max residual={lp_worst:.2e} (<= 1e-6); 50 LSE problems max relative "
                   f"derivative error={grad_worst:.2e} (<= 1e-5)", elapsed)
    assert ok


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
