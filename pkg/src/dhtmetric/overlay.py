"""Node population, key placement at root nodes, and churn."""
from __future__ import annotations

import random
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .identifiers import Identifier, MetricParams, ParseError, parse_id, render_id, root_of_oracle
from .lookup import LookupTrace, RoutingFailure, lookup
from .tables import Algorithm, RoutingState, TableBudget, Violation, build_state, validate_table


class OverlayError(ValueError):
    pass


def _coerce_id(value, params: MetricParams) -> Identifier:
    if isinstance(value, str):
        return parse_id(value, params)
    if not isinstance(value, int) or not 0 <= value < params.modulus:
        raise OverlayError(f"malformed identifier {value!r}")
    return Identifier(value, params.width)


@dataclass
class ChurnEvent:
    kind: str  # "join" | "leave"
    node: Identifier
    moved: list = field(default_factory=list)  # (key_hash, from_node, to_node)
    affected_nodes: set = field(default_factory=set)

    @property
    def keys_moved(self) -> int:
        return len(self.moved)


@dataclass
class Placement:
    key_hash: Identifier
    root: Identifier
    trace: Optional[LookupTrace] = None


@dataclass
class GetResult:
    value: Optional[bytes]
    trace: LookupTrace

    @property
    def found(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class PlacementViolation:
    key_hash: int
    holder: int
    root: int


class Overlay(Mapping):
    """Membership, per-node routing state and per-node key/value stores.

    Reads as a mapping from node id to routing state, so it can be passed
    straight to :func:`lookup`. Membership changes rebuild every routing
    state synchronously and bump ``version``.
    """

    def __init__(self, params: MetricParams, algorithm: Algorithm | str,
                 budgets: dict | None = None, policy="closest"):
        self.params = params
        self.algorithm = Algorithm(algorithm)
        self.budgets: dict[int, TableBudget] = {
            key: b if isinstance(b, TableBudget) else TableBudget(b) for key, b in (budgets or {}).items()}
        self.default_budget: Optional[TableBudget] = self.budgets.pop("all", None)
        self.policy = policy
        self.states: dict[int, RoutingState] = {}
        self.stores: dict[int, dict[int, bytes]] = {}
        self.version = 0

    # Mapping protocol
    def __getitem__(self, node: int) -> RoutingState:
        return self.states[node]

    def __iter__(self):
        return iter(sorted(self.states))

    def __len__(self) -> int:
        return len(self.states)

    @property
    def nodes(self) -> list[Identifier]:
        return sorted(self.states)

    def budget_of(self, node: int) -> Optional[TableBudget]:
        return self.budgets.get(node, self.default_budget)

    def root_of(self, key_hash: int) -> Identifier:
        return root_of_oracle(key_hash, self.states, self.params)

    def rebuild(self, members: Iterable[int]) -> set[int]:
        """Rebuild every routing state for ``members``; returns nodes whose state changed."""
        members = sorted(members)
        fresh = {node: build_state(self.algorithm, node, members, self.params,
                                   self.budget_of(node), self.policy)
                 for node in members}
        changed = {n for n in fresh if self.states.get(n) != fresh[n]}
        changed |= set(self.states) - set(fresh)
        self.states = fresh
        self.version += 1
        return changed

    def install(self, node: int, state: RoutingState) -> None:
        """Replace one node's routing state (fixtures, fault injection)."""
        if node not in self.states:
            raise OverlayError(f"{render_id(node, self.params.width)} is not in the overlay")
        self.states[node] = state

    def validate(self) -> dict[int, list[Violation]]:
        """Per-node violations; nodes with a size budget are checked without the fullness rule."""
        report = {}
        members = list(self.states)
        for node, state in self.states.items():
            issues = validate_table(state, node, members, self.params, full=self.budget_of(node) is None)
            if issues:
                report[node] = issues
        return report

    def stored_pairs(self) -> list[tuple[int, int, bytes]]:
        return [(key, node, value) for node in sorted(self.stores)
                for key, value in sorted(self.stores[node].items())]


def create_overlay(node_ids: Iterable, params: MetricParams, algorithm: Algorithm | str,
                   budgets: dict | None = None, policy="closest") -> Overlay:
    ids = [_coerce_id(x, params) for x in node_ids]
    if not ids:
        raise OverlayError("an overlay needs at least one node")
    if len(set(ids)) != len(ids):
        dupes = sorted({x for x in ids if ids.count(x) > 1})
        raise OverlayError("duplicate node ids: " + ", ".join(render_id(x, params.width) for x in dupes))
    overlay = Overlay(params, algorithm, budgets, policy)
    overlay.rebuild(ids)
    overlay.stores = {node: {} for node in ids}
    return overlay


def join(overlay: Overlay, new_id) -> ChurnEvent:
    """Add a node; it takes over exactly the pairs it is now root for."""
    node = _coerce_id(new_id, overlay.params)
    if node in overlay.states:
        raise OverlayError(f"{node} is already a member")
    members = overlay.nodes + [node]
    event = ChurnEvent("join", node)
    event.affected_nodes = overlay.rebuild(members)
    overlay.stores[node] = {}
    for holder in list(overlay.stores):
        if holder == node:
            continue
        store = overlay.stores[holder]
        for key in sorted(store):
            if overlay.root_of(key) == node:
                overlay.stores[node][key] = store.pop(key)
                event.moved.append((key, holder, node))
    return event


def leave(overlay: Overlay, node_id) -> ChurnEvent:
    """Remove a node; its pairs move to each key's new root."""
    node = _coerce_id(node_id, overlay.params)
    if node not in overlay.states:
        raise OverlayError(f"{node} is not a member")
    if len(overlay.states) == 1:
        raise OverlayError("cannot remove the last node")
    members = [n for n in overlay.nodes if n != node]
    event = ChurnEvent("leave", node)
    event.affected_nodes = overlay.rebuild(members)
    orphans = overlay.stores.pop(node)
    overlay.budgets.pop(node, None)
    for key in sorted(orphans):
        root = overlay.root_of(key)
        overlay.stores[root][key] = orphans[key]
        event.moved.append((key, node, root))
    return event


def put(overlay: Overlay, key_hash, value: bytes, source=None) -> Placement:
    key = _coerce_id(key_hash, overlay.params)
    root = overlay.root_of(key)
    trace = None
    if source is not None:
        trace = lookup(overlay, _coerce_id(source, overlay.params), key, overlay.params)
    overlay.stores[root][key] = value
    return Placement(key, root, trace)


def get(overlay: Overlay, source, key_hash) -> GetResult:
    key = _coerce_id(key_hash, overlay.params)
    trace = lookup(overlay, _coerce_id(source, overlay.params), key, overlay.params)
    return GetResult(overlay.stores[trace.root].get(key), trace)


def audit_placement(overlay: Overlay) -> list[PlacementViolation]:
    out = []
    for key, holder, _ in overlay.stored_pairs():
        root = overlay.root_of(key)
        if root != holder:
            out.append(PlacementViolation(key, holder, root))
    return out


# -- churn scripts ---------------------------------------------------------

@dataclass
class ScriptResult:
    log: list = field(default_factory=list)
    events: list = field(default_factory=list)
    audit_failures: int = 0
    routing_failures: int = 0

    @property
    def ok(self) -> bool:
        return not self.audit_failures and not self.routing_failures


def run_script(overlay: Overlay, lines: Iterable[str], audit_every_event: bool = False) -> ScriptResult:
    """Apply ``JOIN``/``LEAVE``/``PUT``/``GET``/``AUDIT`` lines in order.

    Every membership change is a settle point; with ``audit_every_event``
    placement is audited after each one in addition to explicit ``AUDIT``.
    """
    result = ScriptResult()
    w = overlay.params.width

    def audit(tag):
        violations = audit_placement(overlay)
        if violations:
            result.audit_failures += 1
            for v in violations:
                result.log.append(f"{tag} VIOLATION key={render_id(v.key_hash, w)} "
                                  f"holder={render_id(v.holder, w)} root={render_id(v.root, w)}")
        else:
            result.log.append(f"{tag} ok pairs={len(overlay.stored_pairs())}")

    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        op, *args = line.split()
        op = op.upper()
        try:
            if op == "JOIN" and len(args) == 1:
                ev = join(overlay, args[0])
                result.events.append(ev)
                result.log.append(f"JOIN {ev.node} moved={ev.keys_moved} affected={len(ev.affected_nodes)}")
            elif op == "LEAVE" and len(args) == 1:
                ev = leave(overlay, args[0])
                result.events.append(ev)
                result.log.append(f"LEAVE {ev.node} moved={ev.keys_moved} affected={len(ev.affected_nodes)}")
            elif op == "PUT" and len(args) == 2:
                placed = put(overlay, args[0], args[1].encode())
                result.log.append(f"PUT {placed.key_hash} at {render_id(placed.root, w)}")
            elif op == "GET" and len(args) == 2:
                got = get(overlay, args[0], args[1])
                shown = got.value.decode(errors="replace") if got.found else "-"
                result.log.append(f"GET {render_id(got.trace.target, w)} from {args[0].upper()} "
                                  f"root={render_id(got.trace.root, w)} hops={got.trace.hop_count} value={shown}")
            elif op == "AUDIT" and not args:
                audit("AUDIT")
                continue
            else:
                raise ParseError(f"line {lineno}: cannot parse {line!r}")
        except RoutingFailure as exc:
            result.routing_failures += 1
            result.log.append(f"GET FAILED {exc}")
        except (OverlayError, ParseError) as exc:
            raise type(exc)(f"line {lineno}: {exc}") from None
        if audit_every_event and op in ("JOIN", "LEAVE"):
            audit("SETTLE")
    return result


def random_script(initial: Iterable[int], events: int, params: MetricParams, seed: int) -> list[str]:
    """A seeded mix of JOIN/LEAVE/PUT/GET lines valid against ``initial``."""
    rng = random.Random(seed)
    w = params.width
    members = set(initial)
    keys: list[int] = []
    lines = []
    for i in range(events):
        roll = rng.random()
        if roll < 0.25:
            node = rng.getrandbits(w)
            while node in members:
                node = rng.getrandbits(w)
            members.add(node)
            lines.append(f"JOIN {render_id(node, w)}")
        elif roll < 0.45 and len(members) > 2:
            node = rng.choice(sorted(members))
            members.discard(node)
            lines.append(f"LEAVE {render_id(node, w)}")
        elif roll < 0.75 or not keys:
            key = rng.getrandbits(w)
            keys.append(key)
            lines.append(f"PUT {render_id(key, w)} v{i}")
        else:
            source = rng.choice(sorted(members))
            lines.append(f"GET {render_id(source, w)} {render_id(rng.choice(keys), w)}")
    return lines
