"""
Routing tables on the 18-node example
=====================================

Each overlay fills the cells of a prefix matrix; Kademlia uses one-bit
digits and Chord keeps fingers at powers of 2^m.
"""

# %%
from dhtmetric import build_state, params_for, truncate_rows, validate_table
from dhtmetric.tables import TableBudget, format_state
from dhtmetric.worked_example import example_nodes, tapestry_fixtures

nodes = example_nodes()

# %%
for name in ("tapestry", "pastry", "kademlia", "chord"):
    print(f"--- {name} table of 03A6")
    print(format_state(build_state(name, 0x03A6, nodes, params_for(name))))

# %%
# A memory budget of two entries per column keeps the clockwise and
# counter-clockwise nearest digits.
full = build_state("tapestry", 0x03A6, nodes, params_for("tapestry"))
print(format_state(truncate_rows(full, TableBudget(2))))

# %%
# Hand-written tables load as fixtures and can be validated.
params = params_for("tapestry")
for owner, state in tapestry_fixtures().items():
    print(owner, validate_table(state, owner, nodes, params) or "valid")
