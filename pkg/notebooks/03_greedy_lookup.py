"""
Greedy lookup and the convergence check
=======================================

Every hop moves to a node strictly closer to the hash; the walk ends at
the node no neighbour improves on, which should be the global root.
"""

# %%
import random

from dhtmetric import create_overlay, lookup, params_for, verify_convergence
from dhtmetric.worked_example import example_nodes, example_overlay

# %%
for name in ("chord", "kademlia", "tapestry", "pastry"):
    overlay = example_overlay(name)
    print(f"{name:9s}", lookup(overlay, 0x03A6, 0x4EFA, overlay.params))

# %%
# The trace records the metric value at each hop.
overlay = example_overlay("tapestry")
print(lookup(overlay, 0x03A6, 0x4EFA, overlay.params).format())

# %%
# Sampled convergence check against the brute-force root.
params = params_for("kademlia")
overlay = create_overlay(example_nodes(), params, "kademlia")
rng = random.Random(0)
report = verify_convergence(overlay, params, [rng.getrandbits(16) for _ in range(2000)])
print(report.CSV_HEADER)
print(report.csv_row())

# %%
# Drop 4EFB from every table: lookups for its keys now stop elsewhere.
broken = {n: s.without(0x4EFB) for n, s in overlay.items()}
report = verify_convergence(broken, params, [0x4EFA, 0x4EFB])
print(len(report.mismatches), "mismatches")
