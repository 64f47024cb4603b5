# %% [markdown]
# # Four routers and the golden split
#
# Two sources, s1 and s2, send traffic to t.  The only links into t are
# (s2, t) and (v, t), both of capacity one.  Nobody knows in advance which
# source will be busy, so we want splitting ratios that are good for either.

# %%
import math

from oblite.fixtures import halves_config, running_example, running_example_dags, two_thirds_config, two_vertex_spec
from oblite.oracles import perf_ratio
from oblite.splitting import optimize_discrete
from oblite.topology import build_dags
from oblite.translate import evaluate_quantized, virtual_link_plan

topo = running_example()
dags = running_example_dags(topo)
_, spf = build_dags(topo, ["t"])
spec = two_vertex_spec(topo)  # either s1 or s2 sends two units
t = topo.node("t")
print("DAG toward t:", sorted(topo.arc_label(a) for a in dags[t].edges))

# %% [markdown]
# Splitting every two-way choice in half loses a factor 3/2 against the best
# routing chosen with hindsight.  Sending two thirds of s1's traffic through
# s2 does better.

# %%
for name, cfg in (("halves", halves_config(dags)), ("two thirds", two_thirds_config(dags))):
    print(f"{name:>10}: worst ratio {perf_ratio(topo, dags, cfg, spec).ratio:.4f}")

# %% [markdown]
# The optimizer starts from an even split and repeatedly solves a convex
# subproblem in which each awkward sum of ratios is replaced by a tangent
# monomial.  It lands on the golden section: both s1 and s2 send a fraction
# (sqrt(5) - 1) / 2 along their first hop.

# %%
res = optimize_discrete(topo, dags, spec, spf=spf)
print("status:", res.status, " accepted ratios:", [round(a, 6) for a in res.accepted_alphas()])
print(f"phi(s1,s2) = {res.config.phi(t, topo.arc('s1', 's2')):.6f}")
print(f"phi(s2,t)  = {res.config.phi(t, topo.arc('s2', 't')):.6f}")
print(f"ratio      = {res.alpha:.6f}   sqrt(5) - 1 = {math.sqrt(5) - 1:.6f}")

# %% [markdown]
# Routers that only do equal-cost splitting can approximate these ratios by
# advertising a next hop several times.  More virtual links per next hop
# bring the ratio closer to the ideal.

# %%
for L in (0, 1, 2, 3, 5, 10):
    plan = virtual_link_plan(res.config, L)
    print(f"L={L:2d}  max ratio error {plan.max_error():.4f}  "
          f"worst ratio {evaluate_quantized(dags, plan, spec).ratio:.4f}")
