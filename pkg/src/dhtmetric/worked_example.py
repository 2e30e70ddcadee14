"""The 18-node, 16-bit worked example and its published tables and routes.

``reference_checks`` rebuilds everything from scratch and compares it with
the reference data shipped under ``data/reference`` and ``data/fixtures``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .identifiers import Identifier, root_of_oracle
from .lookup import lookup, next_hop_generic
from .overlay import Overlay, create_overlay
from .scenario import data_path, load_fixture_dir, read_node_file
from .tables import (
    Algorithm,
    ChordState,
    KademliaTable,
    build_chord_state,
    build_kademlia_table,
    build_pastry_state,
    build_tapestry_table,
    params_for,
    validate_table,
)

SOURCE = 0x03A6
TARGET = 0x4EFA

EXPECTED_PATHS = {
    Algorithm.CHORD: [0x03A6, 0x456B, 0x4ABC, 0x4ECD, 0x4EF7, 0x4EFB],
    Algorithm.KADEMLIA: [0x03A6, 0x456B, 0x4E56, 0x4ECD, 0x4EFD, 0x4EFB],
    Algorithm.TAPESTRY: [0x03A6, 0x456B, 0x4EAB, 0x4EFC, 0x4EFB],
}


def example_nodes() -> list[Identifier]:
    return read_node_file(data_path("example_nodes.txt"), 16)


def tapestry_fixtures(params=None) -> dict:
    params = params or params_for("tapestry")
    return load_fixture_dir(data_path("fixtures", "tapestry"), params, Algorithm.TAPESTRY)


def reference_states(algorithm: Algorithm | str, params=None) -> dict:
    algorithm = Algorithm(algorithm)
    params = params or params_for(algorithm)
    return load_fixture_dir(data_path("reference", algorithm.value), params, algorithm)


def example_overlay(algorithm: Algorithm | str, with_fixtures: bool = True, **param_overrides) -> Overlay:
    """The example overlay; Tapestry gets the published tables of its four route nodes."""
    algorithm = Algorithm(algorithm)
    params = params_for(algorithm, **param_overrides)
    overlay = create_overlay(example_nodes(), params, algorithm)
    if with_fixtures and algorithm is Algorithm.TAPESTRY:
        for owner, state in tapestry_fixtures(params).items():
            overlay.install(owner, state)
    return overlay


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}" + (f"  ({self.detail})" if self.detail else "")


def _chord_equal(got: ChordState, want: ChordState) -> tuple[bool, str]:
    if len(got.fingers) != len(want.fingers):
        return False, f"{len(got.fingers)} fingers, expected {len(want.fingers)}"
    for i, (a, b) in enumerate(zip(got.fingers, want.fingers)):
        if a != b:
            return False, f"finger {i}: {a} != {b}"
    if got.predecessor != want.predecessor or got.successor != want.successor:
        return False, f"P/S {got.predecessor}/{got.successor} != {want.predecessor}/{want.successor}"
    return True, ""


def _kademlia_equal(got: KademliaTable, want: KademliaTable, width: int) -> tuple[bool, str]:
    diffs = []
    for bucket in range(1, width + 1):
        a, b = got.buckets.get(bucket), want.buckets.get(bucket)
        if a != b:
            diffs.append(f"bucket {bucket}: {a or '-'} != {b or '-'}")
    return not diffs, "; ".join(diffs)


def reference_checks(kademlia_prefer: str = "closest", chord_m: int = 2) -> list[Check]:
    """Every published table, route and root of the worked example.

    ``kademlia_prefer`` and ``chord_m`` exist so the checks can be shown to
    fail when the construction rules are changed.
    """
    nodes = example_nodes()
    checks: list[Check] = []

    chord = params_for("chord", m=chord_m)
    for owner, want in reference_states("chord").items():
        ok, why = _chord_equal(build_chord_state(owner, nodes, chord), want)
        checks.append(Check(f"chord table {owner}", ok, why))

    kad = params_for("kademlia")
    for owner, want in reference_states("kademlia").items():
        ok, why = _kademlia_equal(build_kademlia_table(owner, nodes, kad, prefer=kademlia_prefer), want, 16)
        checks.append(Check(f"kademlia table {owner}", ok, why))

    tap = params_for("tapestry")
    for owner, want in reference_states("tapestry").items():
        got = build_tapestry_table(owner, nodes, tap)
        ok = got.matrix.cells == want.matrix.cells
        checks.append(Check(f"tapestry table {owner} (built)", ok, "" if ok else "cells differ"))
    for owner, state in tapestry_fixtures(tap).items():
        issues = validate_table(state, owner, nodes, tap)
        checks.append(Check(f"tapestry fixture {owner} valid", not issues, "; ".join(map(str, issues))))

    past = params_for("pastry")
    for owner, want in reference_states("pastry").items():
        got = build_pastry_state(owner, nodes, past)
        ok = got.matrix.cells == want.matrix.cells
        checks.append(Check(f"pastry table {owner}", ok, "" if ok else "cells differ"))
        ok = (set(got.predecessors), set(got.successors)) == (set(want.predecessors), set(want.successors))
        checks.append(Check(f"pastry leafset {owner}", ok,
                            "" if ok else f"{got.predecessors}/{got.successors}"))

    for algorithm, path in EXPECTED_PATHS.items():
        if algorithm is Algorithm.CHORD:
            overlay = create_overlay(nodes, chord, algorithm)
        elif algorithm is Algorithm.KADEMLIA:
            overlay = create_overlay(nodes, kad, algorithm)
            if kademlia_prefer != "closest":
                for n in nodes:
                    overlay.install(n, build_kademlia_table(n, nodes, kad, prefer=kademlia_prefer))
        else:
            overlay = example_overlay(algorithm)
        trace = lookup(overlay, SOURCE, TARGET, overlay.params)
        ok = trace.path == path and trace.root == path[-1]
        checks.append(Check(f"{algorithm} route 03A6 -> 4EFA", ok, "" if ok else f"got {trace}"))

    trace = lookup(example_overlay("pastry"), SOURCE, TARGET, past)
    ok = trace.path[1] == 0x456B and trace.root == 0x4EFB
    checks.append(Check("pastry route 03A6 -> 4EFA endpoints", ok, "" if ok else f"got {trace}"))

    for name in ("tapestry", "chord"):
        root = root_of_oracle(TARGET, nodes, params_for(name))
        checks.append(Check(f"{name} root of 4EFA", root == 0x4EFB, f"got {root:04X}" if root != 0x4EFB else ""))

    hop = next_hop_generic(0x4EFC, [0x4EFD, 0x4EF7, 0x4EFB], TARGET, tap)
    checks.append(Check("tapestry 4EFC level-4 hand-off", hop.node == 0x4EFB and not hop.is_root))
    return checks
