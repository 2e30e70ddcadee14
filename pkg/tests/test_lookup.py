import random

import pytest

from dhtmetric import RoutingFailure, create_overlay, lookup, params_for, verify_convergence
from dhtmetric.identifiers import distance, root_key, root_of_oracle, symmetric_distance
from dhtmetric.lookup import (
    leafset_covers,
    next_hop,
    next_hop_chord,
    next_hop_generic,
    sample_pairs,
    verify_pairs,
)
from dhtmetric.tables import ChordState, TableBudget, shared_prefix
from dhtmetric.worked_example import example_overlay
from oracles import digitwise, oracle_root


def test_generic_next_hop_examples(tapestry):
    hop = next_hop_generic(0x4EFC, [0x4EFD, 0x4EF7, 0x4EFB], 0x4EFA, tapestry)
    assert hop.forward and hop.node == 0x4EFB and hop.distance == 1
    hop = next_hop_generic(0x4EFB, [0x4EFC, 0x4EF7], 0x4EFA, tapestry)
    assert hop.is_root and hop.node == 0x4EFB


def test_pastry_hand_off(example_ids, pastry):
    overlay = create_overlay(example_ids, pastry, "pastry")
    hop = next_hop(overlay[0x4EFC], 0x4EFA, pastry)
    assert hop.node == 0x4EFB and hop.forward
    assert next_hop(overlay[0x4EFB], 0x4EFA, pastry).is_root


def test_chord_next_hop_rules(example_ids, chord):
    overlay = create_overlay(example_ids, chord, "chord")
    # the predecessor-to-owner interval makes 4EFB root
    assert next_hop_chord(0x4EFB, overlay[0x4EFB], 0x4EFA, chord).is_root
    # h between current and successor goes to the successor
    hop = next_hop_chord(0x4EF7, overlay[0x4EF7], 0x4EFA, chord)
    assert hop.node == 0x4EFB
    # otherwise the closest preceding entry
    assert next_hop_chord(0x03A6, overlay[0x03A6], 0x4EFA, chord).node == 0x456B


@pytest.mark.parametrize("name, path", [
    ("chord", [0x03A6, 0x456B, 0x4ABC, 0x4ECD, 0x4EF7, 0x4EFB]),
    ("kademlia", [0x03A6, 0x456B, 0x4E56, 0x4ECD, 0x4EFD, 0x4EFB]),
    ("tapestry", [0x03A6, 0x456B, 0x4EAB, 0x4EFC, 0x4EFB]),
])
def test_example_routes(name, path):
    overlay = example_overlay(name)
    trace = lookup(overlay, 0x03A6, 0x4EFA, overlay.params)
    assert trace.path == path
    assert trace.root == 0x4EFB


def test_pastry_route_endpoints():
    overlay = example_overlay("pastry")
    trace = lookup(overlay, 0x03A6, 0x4EFA, overlay.params)
    assert trace.path[1] == 0x456B and trace.root == 0x4EFB


def test_trace_distances_follow_the_metric():
    overlay = example_overlay("tapestry")
    trace = lookup(overlay, 0x03A6, 0x4EFA, overlay.params)
    assert [dist for _, dist in trace.hops] == [distance(n, 0x4EFA, overlay.params) for n in trace.path]
    assert trace.hops[1][1] == 0x0771
    assert trace.hops[-1][1] == 1


def test_source_is_root_gives_zero_hops(example_ids, algorithm):
    overlay = example_overlay(algorithm)
    trace = lookup(overlay, 0x4EFB, 0x4EFA, overlay.params)
    assert trace.hop_count == 0 and trace.root == 0x4EFB
    dist = distance(0x4EFB, 0x4EFA, overlay.params)
    assert trace.format() == f"0 4EFB {dist:04X}\nROOT 4EFB\n"


def test_trace_format():
    overlay = example_overlay("tapestry")
    text = lookup(overlay, 0x03A6, 0x4EFA, overlay.params).format()
    path = [0x03A6, 0x456B, 0x4EAB, 0x4EFC, 0x4EFB]
    want = [f"{i} {n:04X} {digitwise(n, 0x4EFA, 4, 4):04X}" for i, n in enumerate(path)] + ["ROOT 4EFB"]
    assert text.splitlines() == want
    assert want[1] == "1 456B 0771"


def test_unknown_source(example_ids, tapestry):
    overlay = create_overlay(example_ids, tapestry, "tapestry")
    with pytest.raises(KeyError):
        lookup(overlay, 0x1111, 0x4EFA, tapestry)


def test_fault_injection_is_detected(example_ids, algorithm):
    params = params_for(algorithm)
    overlay = create_overlay(example_ids, params, algorithm)
    broken = {n: s.without(0x4EFB) for n, s in overlay.items()}
    report = verify_convergence(broken, params, hashes=[0x4EFA, 0x4EFB], sources=[0x03A6])
    assert not report.ok
    assert all(want == 0x4EFB for _, _, _, want in report.mismatches)


def test_forward_to_unknown_node_fails(example_ids, tapestry):
    overlay = create_overlay(example_ids, tapestry, "tapestry")
    states = dict(overlay.items())
    del states[0x4EFB]
    with pytest.raises(RoutingFailure) as info:
        lookup(states, 0x03A6, 0x4EFA, tapestry)
    assert info.value.trace.path[-1] == 0x4EFB


def test_revisit_is_reported(chord):
    # 2000 has lost its predecessor, so 1800 bounces back to 1000
    states = {
        0x1000: ChordState(0x1000, (0x2000,), 0x2000, 0x2000),
        0x2000: ChordState(0x2000, (0x1000,), None, 0x1000),
    }
    with pytest.raises(RoutingFailure, match="revisited") as info:
        lookup(states, 0x1000, 0x1800, chord)
    assert info.value.trace.path == [0x1000, 0x2000, 0x1000]
    report = verify_convergence(states, chord, hashes=[0x1800])
    assert report.failures == 2 and not report.ok


def test_hop_limit(example_ids, tapestry):
    overlay = create_overlay(example_ids, tapestry, "tapestry")
    with pytest.raises(RoutingFailure, match="exceeded"):
        lookup(overlay, 0x03A6, 0x4EFA, tapestry, max_hops=1)


@pytest.mark.parametrize("seed", [0, 1])
def test_table_and_walk_methods_agree(algorithm, seed):
    rng = random.Random(seed)
    params = params_for(algorithm)
    nodes = rng.sample(range(2 ** 16), 30)
    overlay = create_overlay(nodes, params, algorithm)
    hashes = [rng.getrandbits(16) for _ in range(150)]
    a = verify_convergence(overlay, params, hashes, method="table")
    b = verify_convergence(overlay, params, hashes, method="walk")
    assert a.ok and b.ok
    assert a.hop_histogram == b.hop_histogram


def test_sampled_pairs_against_linear_oracle(algorithm):
    params = params_for(algorithm)
    nodes = random.Random(4).sample(range(2 ** 16), 80)
    overlay = create_overlay(nodes, params, algorithm)
    pairs = sample_pairs(nodes, 300, params, seed=4)
    report = verify_pairs(overlay, params, pairs)
    assert report.ok and report.lookups == 300
    for s, h in pairs[:50]:
        assert lookup(overlay, s, h, params).root == oracle_root(h, nodes, algorithm)


def test_single_prefix_ranking_is_not_enough():
    """Ranking only by (shared prefix, distance) can stall short of the root."""
    params = params_for("pastry")
    h, here, other = 0x4EFF, 0x4EF0, 0x4F00
    assert root_of_oracle(h, [here, other], params) == other
    naive = min([here, other], key=lambda n: (-shared_prefix(n, h, 16, 4), symmetric_distance(n, h, params)))
    assert naive == here
    # the overlay rule only ranks candidates strictly closer than the current node
    nodes = [0x0100, 0x4EF0, 0x4F00, 0x9000, 0xC000, 0xE000]
    overlay = create_overlay(nodes, params, "pastry")
    assert lookup(overlay, 0x9000, h, params).root == other


@pytest.mark.parametrize("name", ["tapestry", "kademlia", "pastry"])
def test_every_hop_strictly_closer(name):
    rng = random.Random(21)
    params = params_for(name)
    nodes = rng.sample(range(2 ** 16), 60)
    overlay = create_overlay(nodes, params, name)
    for _ in range(300):
        h = rng.getrandbits(16)
        trace = lookup(overlay, rng.choice(nodes), h, params)
        keys = [root_key(n, h, params) for n in trace.path]
        assert all(a > b for a, b in zip(keys, keys[1:]))


def test_chord_hops_approach_clockwise():
    rng = random.Random(22)
    params = params_for("chord")
    nodes = rng.sample(range(2 ** 16), 60)
    overlay = create_overlay(nodes, params, "chord")
    for _ in range(300):
        h = rng.getrandbits(16)
        path = lookup(overlay, rng.choice(nodes), h, params).path
        # before the last hand-off every hop shrinks the clockwise gap to h
        gaps = [(h - n) % 2 ** 16 for n in path[:-1]]
        assert all(a > b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.parametrize("x", [2, 3, 8])
def test_truncated_tapestry_converges(x):
    rng = random.Random(x)
    params = params_for("tapestry")
    nodes = rng.sample(range(2 ** 16), 120)
    overlay = create_overlay(nodes, params, "tapestry", budgets={"all": TableBudget(x)})
    hashes = [rng.getrandbits(16) for _ in range(200)]
    report = verify_convergence(overlay, params, hashes, budget=f"all={x}")
    assert report.ok and report.failures == 0


def test_exhaustive_sweep_small_overlay(algorithm):
    params = params_for(algorithm, width=8, d=2)
    nodes = random.Random(8).sample(range(256), 12)
    overlay = create_overlay(nodes, params, algorithm)
    report = verify_convergence(overlay, params)
    assert report.ok and report.lookups == 12 * 256


def _populations():
    for n in (2, 10, 50, 200):
        for seed in range(20):
            yield n, seed, random.Random(7000 + 100 * n + seed).sample(range(2 ** 16), n)


def test_greedy_equals_oracle_on_random_overlays(algorithm):
    params = params_for(algorithm)
    bad = 0
    for n, seed, nodes in _populations():
        overlay = create_overlay(nodes, params, algorithm)
        bad += len(verify_pairs(overlay, params, sample_pairs(nodes, 100, params, seed)).mismatches)
    assert bad == 0


def test_truncated_tapestry_on_random_overlays():
    params = params_for("tapestry")
    bad = 0
    for n, seed, nodes in _populations():
        pairs = sample_pairs(nodes, 60, params, seed)
        for x in (2, 4, 8, 15):
            overlay = create_overlay(nodes, params, "tapestry", budgets={"all": x})
            bad += len(verify_pairs(overlay, params, pairs, budget=f"all={x}").mismatches)
    assert bad == 0


@pytest.mark.parametrize("name, digit, bound", [("tapestry", 4, 5), ("kademlia", 1, 16)])
def test_prefix_with_root_never_shrinks(name, digit, bound):
    params = params_for(name)
    for n, seed, nodes in _populations():
        if seed % 4:
            continue
        overlay = create_overlay(nodes, params, name)
        for s, h in sample_pairs(nodes, 100, params, seed):
            trace = lookup(overlay, s, h, params)
            shared = [shared_prefix(node, trace.root, 16, digit) for node in trace.path]
            assert shared == sorted(shared), (name, trace)
            assert trace.hop_count <= bound


def test_pastry_prefix_with_hash_never_shrinks():
    # the ring root may differ from h in its leading digit (3E37 -> 416C), so
    # the monotone quantity is the prefix shared with h until leafset delivery
    params = params_for("pastry")
    for n, seed, nodes in _populations():
        if seed % 4:
            continue
        overlay = create_overlay(nodes, params, "pastry")
        for s, h in sample_pairs(nodes, 100, params, seed):
            trace = lookup(overlay, s, h, params)
            routed = [x for x in trace.path if not leafset_covers(overlay[x], h, params)]
            shared = [shared_prefix(x, h, 16, 4) for x in routed]
            assert shared == sorted(shared), trace
            assert trace.hop_count <= 5
