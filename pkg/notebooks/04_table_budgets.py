"""
Routing tables of different sizes
=================================

Nodes may keep as few as two entries per column. Lookups still reach the
root; they just take more hops.
"""

# %%
from dhtmetric import params_for
from dhtmetric.scenario import STATS_HEADER, budget_stats, random_node_ids, stats_row

params = params_for("tapestry")
nodes = random_node_ids(150, 16, seed=1)

# %%
print(STATS_HEADER)
for report in budget_stats(nodes, params, "tapestry", [2, 3, 4, 8, 15], lookups=2000, seed=1):
    print(stats_row(report))

# %%
# Mixed budgets: half the nodes are small.
from dhtmetric import TableBudget, create_overlay, verify_convergence  # noqa: E402

small = {n: TableBudget(2) for n in nodes[::2]}
overlay = create_overlay(nodes, params, "tapestry", budgets=small)
report = verify_convergence(overlay, params, range(0, 2**16, 97), budget="mixed")
print(report.csv_row())
