"""
Joins, leaves and key placement
===============================

Keys live at their root. A join takes over only the keys it now owns; a
leave hands each of its keys to the key's next root.
"""

# %%
from dhtmetric import audit_placement, create_overlay, get, join, leave, params_for, put
from dhtmetric.overlay import random_script, run_script
from dhtmetric.worked_example import example_nodes

params = params_for("chord")
nodes = [n for n in example_nodes() if n != 0x4EFA]
overlay = create_overlay(nodes, params, "chord")

# %%
put(overlay, 0x4EFA, b"hello")
print(join(overlay, 0x4EFA).moved)
print(leave(overlay, 0x4EFA).moved)
got = get(overlay, 0x03A6, 0x4EFA)
print(got.value, "via", got.trace)
print("audit:", audit_placement(overlay) or "clean")

# %%
# A seeded random script, audited after every membership change.
script = random_script(overlay.nodes, 40, params, seed=7)
result = run_script(overlay, script, audit_every_event=True)
print("\n".join(result.log[-8:]))
print("ok" if result.ok else "FAILED")
