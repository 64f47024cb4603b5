# %% [markdown]
# # Two instances that show the limits
#
# The first is built from a partition problem.  When the weights split into
# two equal halves there is a routing within 4/3 of optimal for both extreme
# demands.  The second is a path with one unit link per node into t: any
# routing on a DAG there is n times worse than optimal for some node.

# %%
from oblite.analysis import lemma1_routing
from oblite.fixtures import bipartition_gadget, bipartition_spec, path_gap, path_gap_spec
from oblite.oracles import perf_ratio
from oblite.routing import ecmp_config
from oblite.splitting import OptimizerOptions, optimize_discrete
from oblite.topology import build_dags

for weights, part in (([1, 1], [1]), ([1, 2, 3], [3]), ([3, 1, 1, 2, 1], [1, 2])):
    topo = bipartition_gadget(weights)
    cfg = lemma1_routing(topo, weights, part)
    r = perf_ratio(topo, cfg.dags, cfg, bipartition_spec(topo, weights), "any-pd").ratio
    print(f"weights {weights}, first part {part}: ratio {r:.6f}")

# %% [markdown]
# On the path the last node in the DAG order has a single way out, so no
# choice of ratios helps, and the optimizer says so.

# %%
opts = OptimizerOptions(normalization="any-pd")
for n in (3, 4, 5):
    topo = path_gap(n)
    spec = path_gap_spec(topo, n)
    dags, spf = build_dags(topo, ["t"])
    res = optimize_discrete(topo, dags, spec, opts=opts, spf=spf)
    ecmp = perf_ratio(topo, dags, ecmp_config(dags, spf), spec, "any-pd").ratio
    print(f"n={n}: ECMP {ecmp:.3f}, optimized {res.alpha:.3f}")
