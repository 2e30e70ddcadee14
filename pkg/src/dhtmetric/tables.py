"""Routing state for the four overlays, built from a node population.

All four structures are derived from the same prefix idea: a column per
digit position, one cell per foreign digit value. Tapestry keeps the full
matrix, Pastry adds its own identifier on the diagonal plus a leafset,
Kademlia is the d=1 case with one cell per level, and Chord collapses the
identifier to a single digit and keeps logarithmically spaced fingers.
"""
from __future__ import annotations

import bisect
import enum
from functools import cached_property
from dataclasses import dataclass, field, replace
from collections.abc import Mapping
from typing import Callable, Iterable, Optional, Union

from .identifiers import (
    Identifier,
    MetricParams,
    ParseError,
    Variant,
    digitwise_distance,
    parse_id,
    render_id,
    root_of_oracle,
    symmetric_distance,
)


class Algorithm(str, enum.Enum):
    CHORD = "chord"
    PASTRY = "pastry"
    TAPESTRY = "tapestry"
    KADEMLIA = "kademlia"

    def __str__(self):
        return self.value


def params_for(algorithm: Algorithm | str, width: int = 16, d: int = 4, m: int = 2,
               leafset_size: int = 4) -> MetricParams:
    """Metric parameters for one of the four named overlays."""
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.TAPESTRY:
        return MetricParams(width, d, Variant.DIGITWISE, m, leafset_size)
    if algorithm is Algorithm.KADEMLIA:
        return MetricParams(width, 1, Variant.DIGITWISE, m, leafset_size)
    if algorithm is Algorithm.CHORD:
        return MetricParams(width, width, Variant.CHORD_ONE_WAY, m, 2)
    return MetricParams(width, d, Variant.PASTRY_SYMMETRIC, m, leafset_size)


def algorithm_of(params: MetricParams) -> Algorithm:
    if params.variant is Variant.CHORD_ONE_WAY:
        return Algorithm.CHORD
    if params.variant is Variant.PASTRY_SYMMETRIC:
        return Algorithm.PASTRY
    return Algorithm.KADEMLIA if params.d == 1 else Algorithm.TAPESTRY


# -- digit helpers (columns are 1-indexed from the most significant digit) --

def digit_at(value: int, column: int, width: int, d: int) -> int:
    return (value >> (width - d * column)) & ((1 << d) - 1)


def shared_prefix(a: int, b: int, width: int, d: int) -> int:
    """Number of leading d-bit digits shared by ``a`` and ``b``."""
    x = a ^ b
    if not x:
        return width // d
    return (width - x.bit_length()) // d


def ring_gap(a: int, b: int, width: int) -> int:
    """Clockwise distance from ``a`` to ``b``."""
    return (b - a) % (1 << width)


@dataclass(frozen=True)
class TableBudget:
    """Maximum number of occupied foreign cells kept per column."""

    rows: int

    def __post_init__(self):
        if self.rows < 2:
            raise ValueError(f"table budget must keep at least two entries per column, got {self.rows}")


# -- state types -----------------------------------------------------------

@dataclass(frozen=True)
class PrefixTable:
    """Prefix-routing matrix: ``cells[(column, digit)] -> node``.

    Only foreign cells are stored. With ``self_diagonal`` the owner's own
    digit in every column reads back as the owner (Pastry layout).
    """

    owner: Identifier
    width: int
    d: int
    cells: dict = field(default_factory=dict)
    self_diagonal: bool = False

    @property
    def k(self) -> int:
        return self.width // self.d

    def own_digit(self, column: int) -> int:
        return digit_at(self.owner, column, self.width, self.d)

    def cell(self, column: int, digit: int) -> Optional[Identifier]:
        if self.self_diagonal and digit == self.own_digit(column):
            return self.owner
        return self.cells.get((column, digit))

    def column(self, column: int) -> dict[int, Identifier]:
        return {dg: node for (c, dg), node in self.cells.items() if c == column}

    @cached_property
    def _entries(self) -> tuple:
        return tuple(sorted(set(self.cells.values())))

    def entries(self) -> tuple:
        return self._entries

    def without(self, node: int) -> "PrefixTable":
        return replace(self, cells={key: v for key, v in self.cells.items() if v != node})


@dataclass(frozen=True)
class TapestryTable:
    owner: Identifier
    matrix: PrefixTable

    def entries(self) -> tuple:
        return self.matrix.entries()

    def without(self, node: int) -> "TapestryTable":
        return replace(self, matrix=self.matrix.without(node))


@dataclass(frozen=True)
class KademliaTable:
    """One contact per level; ``buckets[i]`` (1-indexed) shares exactly i-1 leading bits."""

    owner: Identifier
    buckets: dict = field(default_factory=dict)

    @cached_property
    def _entries(self) -> tuple:
        return tuple(sorted(set(self.buckets.values())))

    def entries(self) -> tuple:
        return self._entries

    def without(self, node: int) -> "KademliaTable":
        return replace(self, buckets={i: v for i, v in self.buckets.items() if v != node})


@dataclass(frozen=True)
class ChordState:
    owner: Identifier
    fingers: tuple
    predecessor: Optional[Identifier]
    successor: Optional[Identifier]

    @cached_property
    def _entries(self) -> tuple:
        known = [f for f in self.fingers if f is not None]
        known += [n for n in (self.predecessor, self.successor) if n is not None]
        return tuple(sorted(set(known)))

    def entries(self) -> tuple:
        return self._entries

    def without(self, node: int) -> "ChordState":
        def drop(x):
            return None if x == node else x

        return ChordState(self.owner, tuple(drop(f) for f in self.fingers),
                          drop(self.predecessor), drop(self.successor))


@dataclass(frozen=True)
class PastryState:
    owner: Identifier
    matrix: PrefixTable
    predecessors: tuple = ()  # nearest first
    successors: tuple = ()

    @cached_property
    def leafset(self) -> tuple:
        return tuple(sorted(set(self.predecessors) | set(self.successors)))

    @cached_property
    def _entries(self) -> tuple:
        return tuple(sorted(set(self.matrix.entries()) | set(self.leafset)))

    def entries(self) -> tuple:
        return self._entries

    def without(self, node: int) -> "PastryState":
        return PastryState(self.owner, self.matrix.without(node),
                           tuple(n for n in self.predecessors if n != node),
                           tuple(n for n in self.successors if n != node))


RoutingState = Union[TapestryTable, KademliaTable, ChordState, PastryState]


# -- builders --------------------------------------------------------------

Policy = Union[str, Callable[[int, int, MetricParams], object]]


def _policy_key(policy: Policy, algorithm: Algorithm) -> Callable[[int, int, MetricParams], object]:
    """Sort key ``key(candidate, owner, params)``; the minimum wins a contested cell."""
    if callable(policy):
        return policy
    if policy == "closest":
        if algorithm is Algorithm.PASTRY:
            # nearest on the ring, tie to the node preceding the owner
            return lambda c, o, p: (symmetric_distance(c, o, p), (o - c) % p.modulus)
        return lambda c, o, p: digitwise_distance(c, o, p.width, p.d)
    if policy == "ring":
        return lambda c, o, p: (c - o) % p.modulus
    raise ValueError(f"unknown representative policy {policy!r}")


def _build_prefix(owner: Identifier, nodes: Iterable[int], params: MetricParams, key,
                  self_diagonal: bool) -> PrefixTable:
    width, d = params.width, params.d
    best: dict[tuple[int, int], tuple[object, int]] = {}
    for node in nodes:
        if node == owner:
            continue
        column = shared_prefix(owner, node, width, d) + 1
        cell = (column, digit_at(node, column, width, d))
        score = key(node, owner, params)
        held = best.get(cell)
        if held is None or score < held[0]:
            best[cell] = (score, node)
    cells = {cell: Identifier(node, width) for cell, (_, node) in best.items()}
    return PrefixTable(owner, width, d, cells, self_diagonal)


def build_tapestry_table(owner: int, nodes: Iterable[int], params: MetricParams,
                         policy: Policy = "closest", budget: TableBudget | None = None) -> TapestryTable:
    owner = Identifier(owner, params.width)
    matrix = _build_prefix(owner, nodes, params, _policy_key(policy, Algorithm.TAPESTRY), False)
    table = TapestryTable(owner, matrix)
    return truncate_rows(table, budget) if budget is not None else table


def _ring_neighbours(owner: int, ring: list[int], count: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """``count`` nearest predecessors and successors of ``owner`` on a sorted ring."""
    n = len(ring)
    count = min(count, n - 1)
    pos = bisect.bisect_left(ring, owner)
    if pos == n or ring[pos] != owner:
        raise ValueError("owner is not a member of the ring")
    succ = tuple(ring[(pos + i) % n] for i in range(1, count + 1))
    pred = tuple(ring[(pos - i) % n] for i in range(1, count + 1))
    return pred, succ


def build_pastry_state(owner: int, nodes: Iterable[int], params: MetricParams,
                       policy: Policy = "closest", budget: TableBudget | None = None) -> PastryState:
    nodes = list(nodes)
    owner = Identifier(owner, params.width)
    matrix = _build_prefix(owner, nodes, params, _policy_key(policy, Algorithm.PASTRY), True)
    if budget is not None:
        matrix = _truncate_matrix(matrix, budget)
    pred, succ = _ring_neighbours(owner, sorted(set(nodes)), params.leafset_size // 2)
    w = params.width
    return PastryState(owner, matrix, tuple(Identifier(x, w) for x in pred),
                       tuple(Identifier(x, w) for x in succ))


def build_kademlia_table(owner: int, nodes: Iterable[int], params: MetricParams,
                         prefer: str = "closest") -> KademliaTable:
    """Bucket i holds the qualifier with the smallest XOR distance from the owner.

    ``prefer="farthest"`` inverts the selection; it exists only to show that
    the reference tables pin down the choice.
    """
    width = params.width
    sign = {"closest": 1, "farthest": -1}[prefer]
    best: dict[int, tuple[int, int]] = {}
    for node in nodes:
        x = node ^ owner
        if not x:
            continue
        bucket = width - x.bit_length() + 1
        held = best.get(bucket)
        if held is None or sign * x < held[0]:
            best[bucket] = (sign * x, node)
    return KademliaTable(Identifier(owner, width),
                         {b: Identifier(node, width) for b, (_, node) in best.items()})


def kademlia_symmetry(states: Mapping, params: MetricParams | None = None) -> float:
    """Fraction of table links a -> b for which b also lists a.

    XOR is symmetric, but bucket choice is made from each owner's side, so
    links are reciprocal only some of the time. Returns 1.0 for no links.
    """
    links = [(a, b) for a, s in states.items() for b in s.entries()]
    if not links:
        return 1.0
    back = sum(1 for a, b in links if b in states and a in states[b].entries())
    return back / len(links)


def finger_targets(owner: int, params: MetricParams) -> list[int]:
    return [(owner + (1 << (params.m * i))) % params.modulus for i in range(params.width // params.m)]


def build_chord_state(owner: int, nodes: Iterable[int], params: MetricParams) -> ChordState:
    width = params.width
    ring = sorted(set(nodes))
    owner = Identifier(owner, width)

    def successor_of(point: int) -> Identifier:
        pos = bisect.bisect_left(ring, point)
        return Identifier(ring[pos % len(ring)], width)

    fingers = tuple(successor_of(t) for t in finger_targets(owner, params))
    pred, succ = _ring_neighbours(owner, ring, 1)
    p = Identifier(pred[0], width) if pred else owner
    s = Identifier(succ[0], width) if succ else owner
    return ChordState(owner, fingers, p, s)


def build_state(algorithm: Algorithm | str, owner: int, nodes: Iterable[int], params: MetricParams,
                budget: TableBudget | None = None, policy: Policy = "closest") -> RoutingState:
    algorithm = Algorithm(algorithm)
    if algorithm is Algorithm.CHORD:
        return build_chord_state(owner, nodes, params)
    if algorithm is Algorithm.KADEMLIA:
        return build_kademlia_table(owner, nodes, params)
    if algorithm is Algorithm.PASTRY:
        return build_pastry_state(owner, nodes, params, policy, budget)
    return build_tapestry_table(owner, nodes, params, policy, budget)


# -- variable table sizes --------------------------------------------------

def keep_order(own_digit: int, occupied: Iterable[int], d: int) -> list[int]:
    """Occupied digits in retention order for a size-limited column.

    First the nearest occupied digit clockwise from the owner's digit, then
    the nearest counter-clockwise, then alternating outward.
    """
    base = 1 << d
    occupied = [x for x in occupied if x != own_digit]
    cw = sorted(occupied, key=lambda x: (x - own_digit) % base)
    ccw = sorted(occupied, key=lambda x: (own_digit - x) % base)
    order: list[int] = []
    for a, b in zip(cw, ccw):
        for x in (a, b):
            if x not in order:
                order.append(x)
    return order


def _truncate_matrix(matrix: PrefixTable, budget: TableBudget) -> PrefixTable:
    cells = {}
    for column in range(1, matrix.k + 1):
        col = matrix.column(column)
        for digit in keep_order(matrix.own_digit(column), col, matrix.d)[:budget.rows]:
            cells[(column, digit)] = col[digit]
    return replace(matrix, cells=cells)


def truncate_rows(table, budget: TableBudget):
    """Keep at most ``budget.rows`` occupied cells per column.

    The clockwise- and counter-clockwise-nearest occupied digits always
    survive; those two entries are what keeps greedy routing correct.
    """
    if not isinstance(budget, TableBudget):
        budget = TableBudget(budget)
    if isinstance(table, TapestryTable):
        return replace(table, matrix=_truncate_matrix(table.matrix, budget))
    if isinstance(table, PastryState):
        return replace(table, matrix=_truncate_matrix(table.matrix, budget))
    if isinstance(table, PrefixTable):
        return _truncate_matrix(table, budget)
    raise TypeError(f"cannot truncate {type(table).__name__}")


# -- validation ------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    kind: str
    where: str
    detail: str

    def __str__(self):
        return f"{self.kind} at {self.where}: {self.detail}"


def _validate_matrix(matrix: PrefixTable, nodes: set[int], full: bool) -> list[Violation]:
    out = []
    width, d, owner = matrix.width, matrix.d, matrix.owner
    expected: dict[tuple[int, int], list[int]] = {}
    for node in nodes:
        if node == owner:
            continue
        column = shared_prefix(owner, node, width, d) + 1
        expected.setdefault((column, digit_at(node, column, width, d)), []).append(node)
    for (column, digit), node in sorted(matrix.cells.items()):
        where = f"column {column} digit {digit:X}"
        if node not in nodes:
            out.append(Violation("unknown-node", where, f"{render_id(node, width)} is not in the network"))
        if digit == matrix.own_digit(column):
            out.append(Violation("own-digit", where, f"{render_id(node, width)} sits in the owner's own digit row"))
            continue
        if shared_prefix(owner, node, width, d) < column - 1:
            out.append(Violation("prefix-mismatch", where,
                                 f"{render_id(node, width)} does not share {column - 1} leading digits "
                                 f"with {render_id(owner, width)}"))
        elif digit_at(node, column, width, d) != digit:
            out.append(Violation("digit-mismatch", where,
                                 f"{render_id(node, width)} has digit {digit_at(node, column, width, d):X}"))
    if full:
        for cell in sorted(expected):
            if cell not in matrix.cells:
                out.append(Violation("missing-entry", f"column {cell[0]} digit {cell[1]:X}",
                                     f"{len(expected[cell])} qualifying node(s) but cell is empty"))
    return out


def _validate_leafset(owner: int, nodes: set[int], params: MetricParams, pred, succ, count) -> list[Violation]:
    want_pred, want_succ = _ring_neighbours(owner, sorted(nodes), count)
    out = []
    w = params.width
    if tuple(pred) != want_pred:
        out.append(Violation("leafset", "predecessors", f"{[render_id(x, w) for x in pred]} != "
                                                        f"{[render_id(x, w) for x in want_pred]}"))
    if tuple(succ) != want_succ:
        out.append(Violation("leafset", "successors", f"{[render_id(x, w) for x in succ]} != "
                                                      f"{[render_id(x, w) for x in want_succ]}"))
    return out


def validate_table(state: RoutingState, owner: int, nodes: Iterable[int], params: MetricParams,
                   full: bool = True) -> list[Violation]:
    """Check a routing state against the population it claims to describe.

    Returns every violated pattern; an empty list means the state is valid.
    ``full=False`` skips the wrongly-empty checks (size-limited tables).
    """
    nodes = set(nodes)
    width = params.width
    out: list[Violation] = []
    if owner not in nodes:
        out.append(Violation("unknown-owner", "owner", f"{render_id(owner, width)} is not in the network"))
        return out
    if isinstance(state, TapestryTable):
        return _validate_matrix(state.matrix, nodes, full)
    if isinstance(state, PastryState):
        out = _validate_matrix(state.matrix, nodes, full)
        return out + _validate_leafset(owner, nodes, params, state.predecessors, state.successors,
                                       params.leafset_size // 2)
    if isinstance(state, KademliaTable):
        for bucket, node in sorted(state.buckets.items()):
            where = f"bucket {bucket}"
            if node not in nodes:
                out.append(Violation("unknown-node", where, f"{render_id(node, width)} is not in the network"))
            x = node ^ owner
            if not x or width - x.bit_length() + 1 != bucket:
                out.append(Violation("prefix-mismatch", where,
                                     f"{render_id(node, width)} does not share exactly {bucket - 1} leading bits"))
        if full:
            ref = build_kademlia_table(owner, nodes, params)
            for bucket in range(1, width + 1):
                got, want = state.buckets.get(bucket), ref.buckets.get(bucket)
                if want is not None and got is None:
                    out.append(Violation("missing-entry", f"bucket {bucket}", "qualifying node exists"))
                elif want is not None and got != want:
                    out.append(Violation("not-closest", f"bucket {bucket}",
                                         f"{render_id(got, width)} is not the min-XOR qualifier "
                                         f"{render_id(want, width)}"))
        return out
    if isinstance(state, ChordState):
        for i, target in enumerate(finger_targets(owner, params)):
            want = root_of_oracle(target, nodes, replace(params, variant=Variant.CHORD_ONE_WAY))
            got = state.fingers[i] if i < len(state.fingers) else None
            if got != want:
                shown = "empty" if got is None else render_id(got, width)
                out.append(Violation("finger", f"finger {i}",
                                     f"{shown} != root of {render_id(target, width)} ({render_id(want, width)})"))
        if len(state.fingers) != len(finger_targets(owner, params)):
            out.append(Violation("finger", "count", f"{len(state.fingers)} fingers, expected "
                                                    f"{width // params.m}"))
        pred, succ = _ring_neighbours(owner, sorted(nodes), 1)
        want_p = pred[0] if pred else owner
        want_s = succ[0] if succ else owner
        if state.predecessor != want_p:
            out.append(Violation("leafset", "P", f"expected {render_id(want_p, width)}"))
        if state.successor != want_s:
            out.append(Violation("leafset", "S", f"expected {render_id(want_s, width)}"))
        return out
    raise TypeError(f"unknown routing state {type(state).__name__}")


# -- fixture files ---------------------------------------------------------

def load_fixture(text: str, owner: int, params: MetricParams, algorithm: Algorithm | str) -> RoutingState:
    """Parse a per-node fixture file; omitted lines are empty cells.

    Line forms: ``column digit node`` (Tapestry/Pastry matrix),
    ``finger i node`` and ``leafset P|S node`` (Chord, Pastry leafset),
    ``bucket i node`` (Kademlia). ``#`` starts a comment.
    """
    algorithm = Algorithm(algorithm)
    width = params.width
    owner = Identifier(owner, width)
    cells, buckets, fingers, pred, succ = {}, {}, {}, [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ParseError(f"line {lineno}: expected 3 fields, got {len(parts)}")
        tag, index, node_text = parts
        node = parse_id(node_text, width)
        if tag == "finger":
            fingers[int(index)] = node
        elif tag == "bucket":
            buckets[int(index)] = node
        elif tag == "leafset":
            if index.upper() == "P":
                pred.append(node)
            elif index.upper() == "S":
                succ.append(node)
            else:
                raise ParseError(f"line {lineno}: leafset side must be P or S")
        else:
            try:
                cells[(int(tag), int(index, 16))] = node
            except ValueError:
                raise ParseError(f"line {lineno}: unknown entry {tag!r}") from None
    if algorithm is Algorithm.TAPESTRY:
        return TapestryTable(owner, PrefixTable(owner, width, params.d, cells, False))
    if algorithm is Algorithm.PASTRY:
        # own-digit cells are implicit
        cells = {c: n for c, n in cells.items() if n != owner}
        return PastryState(owner, PrefixTable(owner, width, params.d, cells, True), tuple(pred), tuple(succ))
    if algorithm is Algorithm.KADEMLIA:
        return KademliaTable(owner, buckets)
    count = max(fingers) + 1 if fingers else 0
    return ChordState(owner, tuple(fingers.get(i) for i in range(count)),
                      pred[0] if pred else None, succ[0] if succ else None)


def dump_fixture(state: RoutingState) -> str:
    lines = []
    if isinstance(state, (TapestryTable, PastryState)):
        m = state.matrix
        for (column, digit), node in sorted(m.cells.items()):
            lines.append(f"{column} {digit:X} {node}")
    if isinstance(state, PastryState):
        lines += [f"leafset P {n}" for n in state.predecessors]
        lines += [f"leafset S {n}" for n in state.successors]
    if isinstance(state, KademliaTable):
        lines += [f"bucket {b} {n}" for b, n in sorted(state.buckets.items())]
    if isinstance(state, ChordState):
        lines += [f"finger {i} {n}" for i, n in enumerate(state.fingers) if n is not None]
        if state.predecessor is not None:
            lines.append(f"leafset P {state.predecessor}")
        if state.successor is not None:
            lines.append(f"leafset S {state.successor}")
    return "\n".join(lines) + "\n"


# -- rendering -------------------------------------------------------------

def format_state(state: RoutingState) -> str:
    """Plain-text layout of a routing state, one table row per line."""
    lines = []
    if isinstance(state, TapestryTable):
        m = state.matrix
        cols = [[str(n) for _, n in sorted(m.column(c).items())] for c in range(1, m.k + 1)]
        lines.append("  ".join(f"L{c:<4}" for c in range(1, m.k + 1)).rstrip())
        for row in range(max((len(c) for c in cols), default=0)):
            lines.append("  ".join(f"{c[row] if row < len(c) else '-':<5}" for c in cols).rstrip())
    elif isinstance(state, PastryState):
        m = state.matrix
        blank = "-" * (m.width // 4)
        for digit in range(1 << m.d):
            row = [str(m.cell(c, digit) or blank) for c in range(1, m.k + 1)]
            lines.append(f"{digit:X}  " + "  ".join(row))
        lines.append("leafset P " + " ".join(str(n) for n in state.predecessors))
        lines.append("leafset S " + " ".join(str(n) for n in state.successors))
    elif isinstance(state, KademliaTable):
        width = state.owner.width
        for bucket in range(1, width + 1):
            node = state.buckets.get(bucket)
            lines.append(f"{bucket:>3}  {node if node is not None else '-'}")
    elif isinstance(state, ChordState):
        for i, node in enumerate(state.fingers):
            lines.append(f"{i:>3}  {node if node is not None else '-'}")
        lines.append(f"  P  {state.predecessor if state.predecessor is not None else '-'}")
        lines.append(f"  S  {state.successor if state.successor is not None else '-'}")
    else:
        raise TypeError(f"unknown routing state {type(state).__name__}")
    return "\n".join(lines) + "\n"
