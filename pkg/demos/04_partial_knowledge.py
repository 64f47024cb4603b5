# %% [markdown]
# # How much does knowing the demands help?
#
# We compare four ways of routing on the four-router network when the
# demands lie within a factor x of one unit per source: plain ECMP, the
# routing that is optimal for the base matrix, a routing optimized for every
# possible matrix, and one optimized for the box itself.

# %%
from oblite.analysis import compare_csv, compare_table
from oblite.dagsearch import local_search_weights
from oblite.demands import DemandMatrix
from oblite.fixtures import running_example, running_example_pairs, two_vertex_spec
from oblite.topology import build_dags

topo = running_example()
dags, spf = build_dags(topo, ["t"])
base = DemandMatrix({p: 1.0 for p in running_example_pairs(topo)})
rows = compare_table(topo, dags, spf, base, [1.0, 1.5, 2.0, 4.0], "four-routers")
print(compare_csv(rows))

# %% [markdown]
# Knowledge of the box never hurts: the last column is at most the
# oblivious one, which in turn beats ECMP here.
#
# Link weights matter as well.  A small local search over integer weights
# looks for shortest paths whose equal split already does well on the
# worst demands found so far.

# %%
state = local_search_weights(topo, two_vertex_spec(topo), bound=1.6, budget=20)
print("status:", state.status, " best ratio:", round(state.best, 4))
print("weights:", dict(zip((f"{u}->{v}" for u, v in map(topo.arc_label, range(topo.m))), state.weights.tolist())))
