"""
One distance, four overlays
===========================

The digitwise distance with d-bit digits reduces to XOR at d=1 and to the
clockwise ring gap when a single digit spans the whole identifier.
"""

# %%
import numpy as np

from dhtmetric import MetricParams, Variant, generalized_distance, params_for, root_of_oracle
from dhtmetric.identifiers import distance_array
from dhtmetric.worked_example import example_nodes

# %%
# Hex digits (d=4): each digit is subtracted modulo 16 with no borrow.
p = MetricParams(16, 4)
print(f"{generalized_distance(0x456B, 0x4EFA, p):04X}")  # 0771
print(f"{generalized_distance(0x4EFA, 0x456B, p):04X}")  # not symmetric

# %%
# d=1 is XOR, d=16 is (R - H) mod 2^16.
for d in (1, 16):
    q = MetricParams(16, d)
    print(d, f"{generalized_distance(0x03A6, 0x4EFA, q):04X}")
print(f"{0x03A6 ^ 0x4EFA:04X}", f"{(0x03A6 - 0x4EFA) % 2**16:04X}")

# %%
# The same 18 nodes under each metric; 4EFA's root is 4EFB everywhere.
nodes = example_nodes()
for name in ("tapestry", "kademlia", "chord", "pastry"):
    print(name, root_of_oracle(0x4EFA, nodes, params_for(name)))

# %%
# Vectorised form: distance from one node to every 16-bit hash.
dist = distance_array(0x03A6, np.arange(2**16, dtype=np.uint64), p)
print("distinct distances:", len(np.unique(dist)))  # a bijection

# %%
# Pastry's symmetric variant: ties go to the node just below the hash.
ps = params_for("pastry")
print(f"{root_of_oracle(0x4EF9, [0x4EF7, 0x4EFB], ps):04X}")  # 4EF7
print(MetricParams(16, 4, Variant.PASTRY_SYMMETRIC) == ps)
