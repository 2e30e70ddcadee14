"""Scenario configuration, node/fixture files and hop-count statistics."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

from .identifiers import Identifier, MetricParams, ParseError, parse_id, render_id
from .lookup import ConvergenceReport, sample_pairs, verify_pairs
from .overlay import Overlay, create_overlay
from .tables import Algorithm, TableBudget, load_fixture, params_for


class ScenarioError(ValueError):
    pass


def data_path(*parts: str) -> Path:
    return Path(str(resources.files("dhtmetric").joinpath("data", *parts)))


def parse_node_lines(lines: Iterable[str], width: int) -> list[Identifier]:
    out = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_id(line, width))
        except ParseError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    return out


def read_node_file(path: str | Path, width: int) -> list[Identifier]:
    with open(path) as fh:
        return parse_node_lines(fh, width)


def random_node_ids(count: int, width: int, seed: int) -> list[Identifier]:
    rng = random.Random(seed)
    ids: set[int] = set()
    while len(ids) < count:
        ids.add(rng.getrandbits(width))
    return [Identifier(x, width) for x in sorted(ids)]


def load_fixture_dir(directory: str | Path, params: MetricParams, algorithm: Algorithm | str) -> dict:
    """Fixture states keyed by owner; files are named ``<HEX>.txt``."""
    states = {}
    for path in sorted(Path(directory).glob("*.txt")):
        owner = parse_id(path.stem, params)
        states[owner] = load_fixture(path.read_text(), owner, params, algorithm)
    return states


def parse_budget_spec(text: str, width: int) -> dict:
    """``"all=4"`` or ``"03A6=2,456B=15"`` into a budget mapping."""
    budgets: dict = {}
    for item in filter(None, (x.strip() for x in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise ScenarioError(f"budget {item!r} is not of the form node=X")
        try:
            rows = int(value)
        except ValueError:
            raise ScenarioError(f"budget {item!r}: X must be an integer") from None
        key = "all" if name.strip().lower() == "all" else parse_id(name, width)
        budgets[key] = rows
    return budgets


@dataclass
class Scenario:
    algorithm: Algorithm
    d: int = 4
    k: int = 4
    m: int = 2
    leafset_size: int = 4
    nodes_path: Optional[Path] = None
    fixtures_dir: Optional[Path] = None
    budgets: dict = field(default_factory=dict)
    seed: int = 0
    random_nodes: Optional[int] = None

    def __post_init__(self):
        self.algorithm = Algorithm(self.algorithm)
        try:
            self.params = params_for(self.algorithm, self.d * self.k, self.d, self.m, self.leafset_size)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        if self.budgets and self.algorithm in (Algorithm.CHORD, Algorithm.KADEMLIA):
            raise ScenarioError("table budgets apply to tapestry and pastry only")
        top = (1 << self.d) - 1
        for node, rows in self.budgets.items():
            if not 2 <= rows <= top:
                raise ScenarioError(f"budget {rows} for {node} outside [2, {top}]")

    @property
    def width(self) -> int:
        return self.d * self.k

    def node_ids(self) -> list[Identifier]:
        if self.random_nodes is not None:
            return random_node_ids(self.random_nodes, self.width, self.seed)
        path = self.nodes_path or data_path("example_nodes.txt")
        return read_node_file(path, self.width)

    def table_budgets(self) -> dict:
        return {key: TableBudget(rows) for key, rows in self.budgets.items()}

    def build(self) -> Overlay:
        overlay = create_overlay(self.node_ids(), self.params, self.algorithm, self.table_budgets())
        if self.fixtures_dir is not None:
            for owner, state in load_fixture_dir(self.fixtures_dir, self.params, self.algorithm).items():
                overlay.install(owner, state)
        return overlay


STATS_HEADER = "budget,lookups,mean_hops,max_hops,mismatches"


def budget_stats(node_ids: list[int], params: MetricParams, algorithm: Algorithm | str,
                 budgets: Iterable[int], lookups: int, seed: int) -> list[ConvergenceReport]:
    """One convergence report per uniform table budget, same lookups for each."""
    reports = []
    pairs = sample_pairs(node_ids, lookups, params, seed)
    for rows in budgets:
        overlay = create_overlay(node_ids, params, algorithm, {"all": TableBudget(rows)})
        reports.append(verify_pairs(overlay, params, pairs, budget=str(rows)))
    return reports


def stats_row(report: ConvergenceReport) -> str:
    return f"{report.budget},{report.lookups},{report.mean_hops:.4f},{report.max_hops},{len(report.mismatches)}"
