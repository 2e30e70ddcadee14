"""Greedy next-hop rules, hop-by-hop lookups and the convergence checker."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .identifiers import Identifier, MetricParams, distance, metric, render_id, root_key, roots_array
from .tables import (
    Algorithm,
    ChordState,
    KademliaTable,
    PastryState,
    RoutingState,
    TapestryTable,
    algorithm_of,
    shared_prefix,
)


class RoutingFailure(RuntimeError):
    """A lookup revisited a node or ran past its hop budget."""

    def __init__(self, message: str, trace: "LookupTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class HopDecision:
    node: int
    is_root: bool
    distance: int

    @property
    def forward(self) -> bool:
        return not self.is_root

    @classmethod
    def root(cls, node: int, dist: int) -> "HopDecision":
        return cls(node, True, dist)


def next_hop_generic(current: int, entries: Iterable[int], h: int, params: MetricParams) -> HopDecision:
    """Forward to the known node with the least distance to ``h``.

    Used for the digit-wise metrics (Tapestry, Kademlia). The current node
    is always a candidate, so a node that beats every entry is the root.
    """
    dist_to = metric(params)
    best = current
    best_d = dist_to(current, h)
    for e in entries:
        dist = dist_to(e, h)
        if dist < best_d:
            best, best_d = e, dist
    return HopDecision(best, best == current, best_d)


def _in_half_open(x: int, lo: int, hi: int, mod: int) -> bool:
    """``x`` in the cyclic interval ``(lo, hi]``; the full ring when ``lo == hi``."""
    if lo == hi:
        return True
    return 0 < (x - lo) % mod <= (hi - lo) % mod


def next_hop_chord(current: int, state: ChordState, h: int, params: MetricParams) -> HopDecision:
    mod = params.modulus
    pred, succ = state.predecessor, state.successor
    if pred is not None and _in_half_open(h, pred, current, mod):
        return HopDecision.root(current, distance(current, h, params))
    if succ is not None and succ != current and _in_half_open(h, current, succ, mod):
        return HopDecision(succ, False, distance(succ, h, params))
    gap = (h - current) % mod
    best, best_gap = None, gap
    for e in state.entries():
        g = (h - e) % mod
        # strictly inside (current, h): closer to h going clockwise
        if e != current and g < best_gap:
            best, best_gap = e, g
    if best is None:
        return HopDecision.root(current, distance(current, h, params))
    return HopDecision(best, False, distance(best, h, params))


def leafset_covers(state: PastryState, h: int, params: MetricParams) -> bool:
    """Whether ``h`` lies between the farthest predecessor and farthest successor."""
    pred, succ = state.predecessors, state.successors
    if not pred or not succ or set(pred) & set(succ):
        return True
    lo, hi = pred[-1], succ[-1]
    mod = params.modulus
    return (h - lo) % mod <= (hi - lo) % mod


def next_hop_pastry(current: int, state: PastryState, h: int, params: MetricParams) -> HopDecision:
    """Leafset delivery when ``h`` is in range, prefix routing otherwise.

    Prefix routing considers only nodes strictly closer to ``h`` than the
    current node (symmetric distance, ties to the predecessor of ``h``), and
    among those prefers the longest shared prefix with ``h``.
    """
    mod = params.modulus

    def key(x):
        back = (h - x) % mod
        return min(back, mod - back if back else 0), back

    here = key(current)
    if leafset_covers(state, h, params):
        best, best_key = current, here
        for e in state.leafset:
            k = key(e)
            if k < best_key:
                best, best_key = e, k
        return HopDecision(best, best == current, best_key[0])
    width, d = params.width, params.d
    best, best_rank = current, None
    for e in state.entries():
        k = key(e)
        if k >= here:
            continue
        rank = (-shared_prefix(e, h, width, d), k)
        if best_rank is None or rank < best_rank:
            best, best_rank = e, rank
    if best_rank is None:
        return HopDecision.root(current, here[0])
    return HopDecision(best, False, best_rank[1][0])


def next_hop(state: RoutingState, h: int, params: MetricParams) -> HopDecision:
    current = state.owner
    if isinstance(state, ChordState):
        return next_hop_chord(current, state, h, params)
    if isinstance(state, PastryState):
        return next_hop_pastry(current, state, h, params)
    if isinstance(state, (TapestryTable, KademliaTable)):
        return next_hop_generic(current, state.entries(), h, params)
    raise TypeError(f"unknown routing state {type(state).__name__}")


@dataclass
class LookupTrace:
    target: int
    width: int
    hops: list = field(default_factory=list)  # (node, distance) pairs
    root: Optional[int] = None

    @property
    def hop_count(self) -> int:
        return len(self.hops) - 1

    @property
    def path(self) -> list[int]:
        return [node for node, _ in self.hops]

    def format(self) -> str:
        w = self.width
        lines = [f"{i} {render_id(node, w)} {render_id(dist, w)}" for i, (node, dist) in enumerate(self.hops)]
        if self.root is not None:
            lines.append(f"ROOT {render_id(self.root, w)}")
        return "\n".join(lines) + "\n"

    def __str__(self):
        return " -> ".join(render_id(n, self.width) for n in self.path)


def lookup(states: Mapping[int, RoutingState], source: int, h: int, params: MetricParams,
           max_hops: int | None = None) -> LookupTrace:
    """Route ``h`` from ``source`` using only each visited node's own state.

    ``states`` maps node id to routing state (an ``Overlay`` works too).
    """
    if source not in states:
        raise KeyError(f"source {render_id(source, params.width)} is not in the overlay")
    limit = len(states) if max_hops is None else max_hops
    trace = LookupTrace(Identifier(h, params.width), params.width)
    seen = set()
    current = source
    trace.hops.append((current, distance(current, h, params)))
    while True:
        seen.add(current)
        decision = next_hop(states[current], h, params)
        if decision.is_root:
            trace.root = current
            return trace
        nxt = decision.node
        trace.hops.append((nxt, decision.distance))
        if nxt in seen:
            raise RoutingFailure(f"lookup for {render_id(h, params.width)} revisited "
                                 f"{render_id(nxt, params.width)}", trace)
        if nxt not in states:
            raise RoutingFailure(f"lookup forwarded to unknown node {render_id(nxt, params.width)}", trace)
        if trace.hop_count > limit:
            raise RoutingFailure(f"lookup for {render_id(h, params.width)} exceeded {limit} hops", trace)
        current = nxt


# -- convergence -------------------------------------------------------------

@dataclass
class ConvergenceReport:
    algorithm: str
    nodes: int
    budget: str
    sources: int
    hashes: int
    mismatches: list = field(default_factory=list)  # (source, h, got, expected)
    failures: int = 0
    hop_histogram: Counter = field(default_factory=Counter)

    @property
    def lookups(self) -> int:
        return sum(self.hop_histogram.values())

    @property
    def mean_hops(self) -> float:
        n = self.lookups
        return sum(h * c for h, c in self.hop_histogram.items()) / n if n else 0.0

    @property
    def max_hops(self) -> int:
        return max(self.hop_histogram, default=0)

    @property
    def ok(self) -> bool:
        return not self.mismatches

    CSV_HEADER = "algorithm,N,budget,sources,hashes,mismatches,mean_hops,max_hops"

    def csv_row(self) -> str:
        return (f"{self.algorithm},{self.nodes},{self.budget},{self.sources},{self.hashes},"
                f"{len(self.mismatches)},{self.mean_hops:.4f},{self.max_hops}")


def next_hop_matrix(states: Mapping[int, RoutingState], hashes: Sequence[int], params: MetricParams,
                    order: list[int]) -> np.ndarray:
    """``out[i, j]`` = index (in ``order``) of the node ``order[i]`` forwards ``hashes[j]`` to.

    A node that declares itself root maps to its own index; a forward to a
    node outside the overlay maps to -1.
    """
    index = {node: i for i, node in enumerate(order)}
    out = np.empty((len(order), len(hashes)), dtype=np.int32)
    for i, node in enumerate(order):
        state = states[node]
        row = out[i]
        for j, h in enumerate(hashes):
            row[j] = index.get(next_hop(state, h, params).node, -1)
    return out


def _walk(nxt: np.ndarray, source: int, limit: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Follow tabulated decisions from ``source`` for every hash column at once."""
    cols = np.arange(nxt.shape[1])
    cur = np.full(nxt.shape[1], source, dtype=np.int32)
    hops = np.zeros(nxt.shape[1], dtype=np.int64)
    failed = np.zeros(nxt.shape[1], dtype=bool)
    for _ in range(limit + 1):
        step = nxt[cur, cols]
        moving = (step != cur) & ~failed
        if not moving.any():
            break
        lost = moving & (step < 0)
        failed |= lost
        advance = moving & ~lost
        hops += advance
        cur = np.where(advance, step, cur)
    else:
        # still moving after more hops than there are nodes: a cycle
        failed |= (nxt[cur, cols] != cur)
    return cur, hops, failed


def verify_convergence(states: Mapping[int, RoutingState], params: MetricParams,
                       hashes: Iterable[int] | None = None, sources: Iterable[int] | None = None,
                       budget: str = "full", method: str = "table") -> ConvergenceReport:
    """Compare greedy lookup roots with the brute-force oracle root.

    ``hashes=None`` means every W-bit hash (exhaustive). ``method="table"``
    tabulates each node's next-hop decision once per hash and then follows
    those decisions for every source; ``method="walk"`` calls ``lookup``
    per pair. Both apply the same per-node rule.
    """
    order = sorted(states)
    sources = order if sources is None else sorted(sources)
    if hashes is None:
        hashes = range(params.modulus)
    hashes = list(hashes)
    algorithm = str(algorithm_of(params))
    report = ConvergenceReport(algorithm, len(order), budget, len(sources), len(hashes))
    if not hashes or not sources:
        return report
    if params.width <= 64:
        roots = roots_array(np.asarray(hashes, dtype=np.uint64), order, params)
        expected = [int(x) for x in roots]
    else:
        from .identifiers import root_of_oracle
        expected = [root_of_oracle(h, order, params) for h in hashes]

    if method == "walk":
        for s in sources:
            for h, want in zip(hashes, expected):
                try:
                    trace = lookup(states, s, h, params)
                except RoutingFailure as exc:
                    report.failures += 1
                    report.mismatches.append((s, h, None, want))
                    report.hop_histogram[exc.trace.hop_count] += 1
                    continue
                report.hop_histogram[trace.hop_count] += 1
                if trace.root != want:
                    report.mismatches.append((s, h, trace.root, want))
        return report

    nxt = next_hop_matrix(states, hashes, params, order)
    index = {node: i for i, node in enumerate(order)}
    want_idx = np.array([index[w] for w in expected], dtype=np.int32)
    for s in sources:
        end, hops, failed = _walk(nxt, index[s], len(order))
        report.failures += int(failed.sum())
        report.hop_histogram.update(Counter(hops.tolist()))
        for j in np.flatnonzero((end != want_idx) | failed):
            got = None if failed[j] else order[end[j]]
            report.mismatches.append((s, hashes[j], got, expected[j]))
    return report


def sample_pairs(nodes: Sequence[int], count: int, params: MetricParams, seed: int) -> list[tuple[int, int]]:
    rng = random.Random(seed)
    nodes = sorted(nodes)
    return [(rng.choice(nodes), rng.getrandbits(params.width)) for _ in range(count)]


def verify_pairs(states: Mapping[int, RoutingState], params: MetricParams, pairs: Iterable[tuple[int, int]],
                 budget: str = "full") -> ConvergenceReport:
    """Convergence check over explicit (source, hash) pairs."""
    from .identifiers import root_of_oracle

    pairs = list(pairs)
    order = sorted(states)
    report = ConvergenceReport(str(algorithm_of(params)), len(order), budget,
                               len({s for s, _ in pairs}), len({h for _, h in pairs}))
    for s, h in pairs:
        want = root_of_oracle(h, order, params)
        try:
            trace = lookup(states, s, h, params)
        except RoutingFailure as exc:
            report.failures += 1
            report.mismatches.append((s, h, None, want))
            report.hop_histogram[exc.trace.hop_count] += 1
            continue
        report.hop_histogram[trace.hop_count] += 1
        if trace.root != want:
            report.mismatches.append((s, h, trace.root, want))
    return report
