"""Command-line driver.

Exit codes: 0 success, 2 usage or configuration error, 3 routing failure,
4 verification failure.
"""
from __future__ import annotations

import argparse
import random
import sys
from pathlib import Path

from .identifiers import ParseError, hash_key, parse_id
from .lookup import ConvergenceReport, RoutingFailure, lookup, verify_convergence
from .overlay import OverlayError, run_script
from .scenario import STATS_HEADER, Scenario, ScenarioError, budget_stats, parse_budget_spec, stats_row
from .tables import format_state, validate_table
from .worked_example import reference_checks

EXIT_OK, EXIT_USAGE, EXIT_ROUTING, EXIT_VERIFY = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _scenario_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--algorithm", choices=["chord", "pastry", "tapestry", "kademlia"], default="tapestry")
    p.add_argument("--d", type=int, default=4, help="bits per digit")
    p.add_argument("--k", type=int, default=4, help="digits per identifier")
    p.add_argument("--m", type=int, default=2, help="chord finger stride in bits")
    p.add_argument("--leafset", type=int, default=4, help="pastry leafset size")
    p.add_argument("--nodes", type=Path, help="node file, one hex id per line (default: built-in example)")
    p.add_argument("--random-nodes", type=int, metavar="N", help="use N seeded uniform random ids instead")
    p.add_argument("--fixtures", type=Path, help="directory of <HEX>.txt routing-table fixtures")
    p.add_argument("--budget", default="", help="node=X,... or all=X (tapestry/pastry rows per column)")
    p.add_argument("--seed", type=int, default=0)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _scenario_parser()
    parser = argparse.ArgumentParser(prog="dhtmetric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tables", parents=[common], help="print a node's routing state")
    p.add_argument("node")
    p.add_argument("--validate", action="store_true")

    p = sub.add_parser("lookup", parents=[common], help="route one hash from a source node")
    p.add_argument("source")
    p.add_argument("hash")

    p = sub.add_parser("sweep", parents=[common], help="greedy root vs brute-force root")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--exhaustive", action="store_true", help="every W-bit hash (default)")
    mode.add_argument("--sample", type=int, metavar="N", help="N seeded random hashes")
    p.add_argument("--validate", action="store_true", help="validate all tables first")
    p.add_argument("--csv", type=Path)

    p = sub.add_parser("churn", parents=[common], help="run a JOIN/LEAVE/PUT/GET/AUDIT script")
    p.add_argument("script", type=Path)

    p = sub.add_parser("stats", parents=[common], help="hop counts per table budget")
    p.add_argument("--budgets", required=True, help="comma-separated X values")
    p.add_argument("--lookups", type=int, default=1000)
    p.add_argument("--csv", type=Path)

    p = sub.add_parser("hash", parents=[common], help="W-bit SHA-1 identifier of a key string")
    p.add_argument("key")

    p = sub.add_parser("worked-example", parents=[common], help="check the built-in 18-node example")
    p.add_argument("--invert-kademlia-tie", action="store_true", help=argparse.SUPPRESS)
    return parser


def _scenario(args) -> Scenario:
    budgets = parse_budget_spec(args.budget, args.d * args.k) if args.budget else {}
    return Scenario(args.algorithm, args.d, args.k, args.m, args.leafset, args.nodes, args.fixtures,
                    budgets, args.seed, args.random_nodes)


def _emit_csv(lines: list[str], path: Path | None, out) -> None:
    text = "\n".join(lines) + "\n"
    out.write(text)
    if path is not None:
        path.write_text(text)


def cmd_tables(args, out) -> int:
    sc = _scenario(args)
    overlay = sc.build()
    node = parse_id(args.node, sc.width)
    if node not in overlay:
        raise UsageError(f"unknown node {node}")
    state = overlay[node]
    out.write(format_state(state))
    if args.validate:
        issues = validate_table(state, node, overlay.nodes, sc.params, full=overlay.budget_of(node) is None)
        out.write("valid\n" if not issues else "".join(f"{v}\n" for v in issues))
        return EXIT_VERIFY if issues else EXIT_OK
    return EXIT_OK


def cmd_lookup(args, out) -> int:
    sc = _scenario(args)
    overlay = sc.build()
    source = parse_id(args.source, sc.width)
    if source not in overlay:
        raise UsageError(f"unknown source node {source}")
    try:
        trace = lookup(overlay, source, parse_id(args.hash, sc.width), sc.params)
    except RoutingFailure as exc:
        out.write(exc.trace.format())
        print(f"routing failure: {exc}", file=sys.stderr)
        return EXIT_ROUTING
    out.write(trace.format())
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    sc = _scenario(args)
    overlay = sc.build()
    if args.validate:
        problems = overlay.validate()
        if problems:
            for node, issues in sorted(problems.items()):
                for v in issues:
                    print(f"{node}: {v}", file=sys.stderr)
            return EXIT_VERIFY
    hashes = None
    if args.sample is not None:
        rng = random.Random(sc.seed)
        hashes = [rng.getrandbits(sc.width) for _ in range(args.sample)]
    budget = args.budget or "full"
    report: ConvergenceReport = verify_convergence(overlay, sc.params, hashes, budget=budget.replace(",", ";"))
    _emit_csv([ConvergenceReport.CSV_HEADER, report.csv_row()], args.csv, out)
    for s, h, got, want in report.mismatches[:20]:
        shown = "FAILED" if got is None else f"{got:0{sc.width // 4}X}"
        print(f"mismatch source={s:0{sc.width // 4}X} hash={h:0{sc.width // 4}X} "
              f"greedy={shown} oracle={want:0{sc.width // 4}X}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_VERIFY


def cmd_churn(args, out) -> int:
    sc = _scenario(args)
    overlay = sc.build()
    result = run_script(overlay, args.script.read_text().splitlines(), audit_every_event=True)
    out.write("".join(line + "\n" for line in result.log))
    if result.routing_failures:
        return EXIT_ROUTING
    return EXIT_VERIFY if result.audit_failures else EXIT_OK


def cmd_stats(args, out) -> int:
    sc = _scenario(args)
    try:
        budgets = [int(x) for x in args.budgets.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--budgets must be comma-separated integers, got {args.budgets!r}") from None
    top = (1 << sc.d) - 1
    for x in budgets:
        if not 2 <= x <= top:
            raise UsageError(f"budget {x} outside [2, {top}]")
    if args.lookups < 0:
        raise UsageError("--lookups must be >= 0")
    lines = [STATS_HEADER]
    bad = 0
    if args.lookups:
        for report in budget_stats(sc.node_ids(), sc.params, sc.algorithm, budgets, args.lookups, sc.seed):
            lines.append(stats_row(report))
            bad += len(report.mismatches)
    _emit_csv(lines, args.csv, out)
    return EXIT_VERIFY if bad else EXIT_OK


def cmd_hash(args, out) -> int:
    out.write(f"{hash_key(args.key, args.d * args.k)}\n")
    return EXIT_OK


def cmd_worked_example(args, out) -> int:
    checks = reference_checks(kademlia_prefer="farthest" if args.invert_kademlia_tie else "closest",
                              chord_m=args.m)
    for c in checks:
        out.write(c.line() + "\n")
    failed = sum(not c.passed for c in checks)
    out.write(f"{len(checks) - failed}/{len(checks)} checks passed\n")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "tables": cmd_tables,
    "lookup": cmd_lookup,
    "sweep": cmd_sweep,
    "churn": cmd_churn,
    "stats": cmd_stats,
    "hash": cmd_hash,
    "worked-example": cmd_worked_example,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return COMMANDS[args.command](args, out)
    except (UsageError, ScenarioError, ParseError, OverlayError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
