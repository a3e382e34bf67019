"""Command-line front end: ``micmarket <command> ...``.

Exit codes: 0 success, 1 oracle mismatch, 2 invalid input, 3 infeasible clearing.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction

from . import milp, oracle, strategy
from .documents import (
    BidSetError,
    ValidationFailed,
    approx,
    emit_curves,
    emit_result,
    load_bidset,
    parse_rational,
    result_document,
)
from .market import Objective

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID, EXIT_INFEASIBLE = 0, 1, 2, 3

OBJECTIVES = {"hourly": Objective.HOURLY, "mic": Objective.MIC_COST}


class UsageError(Exception):
    pass


def _objective(name: str) -> Objective:
    return OBJECTIVES[name]


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text, "argument")
    except BidSetError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _exact(x) -> str:
    return f"{Fraction(x)} (~{approx(Fraction(x))})"


# --------------------------------------------------------------------------
# commands


def cmd_clear(args, out) -> int:
    instance = load_bidset(args.file)
    variant = _objective(args.objective)
    result = milp.clear(instance, variant)
    out.write(emit_result(result, instance, args.format))
    status = EXIT_OK if result.optimal else EXIT_INFEASIBLE
    if args.oracle_check:
        report = oracle.oracle_check(instance)
        for (name, what), delta in sorted(report.deltas.items()):
            out.write(f"oracle {name} {what} delta: {delta}\n")
        for name, same in sorted(report.identical.items()):
            out.write(f"oracle {name} identical solution: {'yes' if same else 'no'}\n")
        for name, problems in sorted(report.violations.items()):
            for p in problems:
                out.write(f"oracle {name} violation: {p}\n")
        out.write(f"oracle check: {'pass' if report.ok else 'FAIL'}\n")
        if not report.ok and status == EXIT_OK:
            status = EXIT_MISMATCH
    return status


def _window_row(w) -> dict:
    o = w.outcome
    return {
        "window": str(w),
        "feasible": o.feasible,
        "activation": dict(o.activation),
        "mcp": [str(x) for x in o.mcp],
        "profit": None if o.profit is None else str(o.profit),
    }


def cmd_sweep(args, out) -> int:
    instance = load_bidset(args.file)
    try:
        instance.order(args.order)
    except KeyError:
        raise UsageError(f"no MIC order with id {args.order!r}") from None
    report = strategy.ft_sweep(instance, args.order, args.lo, args.hi, _objective(args.objective))
    if args.format == "json":
        doc = {
            "order": report.order_id,
            "parameter": report.parameter,
            "range": [str(report.lo), str(report.hi)],
            "breakpoints": [str(b) for b in report.breakpoints],
            "windows": [_window_row(w) for w in report.windows],
        }
        out.write(json.dumps(doc, indent=2) + "\n")
        return EXIT_OK
    out.write(f"sweep of {report.order_id}.fixed_term over [{report.lo}, {report.hi}]\n")
    out.write("breakpoints: " + (", ".join(map(str, report.breakpoints)) or "none") + "\n")
    for w in report.windows:
        o = w.outcome
        if not o.feasible:
            out.write(f"  {w}: infeasible\n")
            continue
        active = " ".join(f"{k}={v}" for k, v in o.activation)
        mcp = ", ".join(map(str, o.mcp))
        out.write(f"  {w}: {active}; MCP ({mcp}); profit {o.profit}\n")
    return EXIT_OK


def _scenario_list(name: str) -> list:
    scenarios = {s.name: s for s in strategy.builtin_scenarios()}
    if name == "all":
        return [scenarios[k] for k in sorted(scenarios)]
    if name not in scenarios:
        raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(sorted(scenarios))} or all")
    return [scenarios[name]]


def _analysis_document(analysis) -> dict:
    return {
        "paradoxically_rejected": list(analysis.paradoxical),
        "orders": {
            o.order_id: {
                "active": o.active,
                "income": str(o.income),
                "cost": str(o.cost),
                "mic_slack": str(o.slack),
                "real_profit": str(o.real_profit),
                "paradoxical": o.paradoxical,
            }
            for o in analysis.orders
        },
        "tsw_hourly": None if analysis.tsw_hourly is None else str(analysis.tsw_hourly),
        "tsw_mic": None if analysis.tsw_mic is None else str(analysis.tsw_mic),
    }


def cmd_scenarios(args, out) -> int:
    runs = [(s, *strategy.run_scenario(s)) for s in _scenario_list(args.name)]
    if args.format == "json":
        doc = {
            s.name: {
                "variant": s.variant.value,
                "notes": s.notes,
                "result": result_document(r, s.instance),
                "analysis": _analysis_document(a),
            }
            for s, r, a in runs
        }
        out.write(json.dumps(doc, indent=2) + "\n")
    elif args.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["scenario", "kind", "entity", "value", "decimal"])
        for s, r, a in runs:
            body = emit_result(r, s.instance, "csv").splitlines()[1:]
            for row in csv.reader(body):
                writer.writerow([s.name, *row])
            for flagged in a.paradoxical:
                writer.writerow([s.name, "paradoxical", flagged, "1", ""])
        out.write(buf.getvalue())
    else:
        for s, r, a in runs:
            out.write(f"== {s.name} ({s.variant.value}): {s.notes}\n")
            out.write(emit_result(r, s.instance, "human"))
            if a.paradoxical:
                out.write(f"paradoxically rejected: {', '.join(a.paradoxical)} ({a.note})\n")
            out.write("\n")
    return EXIT_OK


def cmd_optima(args, out) -> int:
    instance = load_bidset(args.file)
    variant = _objective(args.objective)
    vectors = strategy.enumerate_optimal_activations(instance, variant)
    if not vectors:
        out.write("infeasible\n")
        return EXIT_INFEASIBLE
    best = oracle.enumerate_clearings(instance, variant)
    ids = [o.id for o in instance.mic_orders]
    out.write(f"optimal {variant.value}: {_exact(best.objective_value)}\n")
    out.write(f"{len(vectors)} optimal activation vector(s) over ({', '.join(ids)}):\n")
    for v in vectors:
        out.write("  (" + ", ".join(map(str, v)) + ")\n")
    return EXIT_OK


def cmd_curves(args, out) -> int:
    instance = load_bidset(args.file)
    if not 1 <= args.period <= instance.period_count:
        raise UsageError(f"period {args.period} outside [1, {instance.period_count}]")
    result = None
    if args.with_result:
        result = milp.clear(instance, _objective(args.objective))
        if not result.optimal:
            out.write("status: Infeasible\n")
            return EXIT_INFEASIBLE
    out.write(emit_curves(instance, args.period, result))
    return EXIT_OK


def cmd_compare(args, out) -> int:
    instance = load_bidset(args.file)
    cmp = strategy.compare_objectives(instance)
    if not (cmp.hourly.optimal and cmp.mic_cost.optimal):
        out.write(f"HourlyTSW: {cmp.hourly.status.value}; MicCostTSW: {cmp.mic_cost.status.value}\n")
        return EXIT_INFEASIBLE
    out.write("identical clearings\n" if cmp.identical else "clearings differ\n")
    for r in (cmp.hourly, cmp.mic_cost):
        v = r.objective_variant.value
        act = " ".join(f"{o.id}={r.activation[o.id]}" for o in instance.mic_orders)
        mcp = ", ".join(str(r.mcp[t]) for t in instance.periods)
        out.write(f"{v}: MCP ({mcp}); {act or 'no MIC orders'}\n")
        for acc in Objective:
            out.write(f"  evaluated with {acc.value}: {_exact(cmp.tsw[(v, acc.value)])}\n")
    if cmp.activation_differs:
        out.write("activation differs: " + ", ".join(cmp.activation_differs) + "\n")
    if cmp.mcp_differs:
        out.write("MCP differs in periods: " + ", ".join(map(str, cmp.mcp_differs)) + "\n")
    for oid, delta in cmp.profit_delta.items():
        out.write(f"profit delta {oid} (MicCostTSW - HourlyTSW): {delta}\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="micmarket", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def objective_option(p):
        p.add_argument("--objective", choices=sorted(OBJECTIVES), default="hourly")

    p = sub.add_parser("clear", help="clear a bid set")
    p.add_argument("file")
    objective_option(p)
    p.add_argument("--format", choices=["human", "csv", "json"], default="human")
    p.add_argument("--oracle-check", action="store_true",
                   help="also run the enumeration oracle under both objectives and compare")
    p.set_defaults(func=cmd_clear)

    p = sub.add_parser("sweep-ft", help="sweep one order's submitted fixed term")
    p.add_argument("file")
    p.add_argument("--order", required=True)
    p.add_argument("--from", dest="lo", type=_rational, required=True)
    p.add_argument("--to", dest="hi", type=_rational, required=True)
    objective_option(p)
    p.add_argument("--format", choices=["human", "json"], default="human")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("scenarios", help="built-in strategic-bidding scenarios")
    ssub = p.add_subparsers(dest="action", required=True)
    r = ssub.add_parser("run", help="run one scenario or all of them")
    r.add_argument("name")
    r.add_argument("--format", choices=["human", "csv", "json"], default="human")
    r.set_defaults(func=cmd_scenarios)

    p = sub.add_parser("optima", help="list every optimal activation vector")
    p.add_argument("file")
    objective_option(p)
    p.set_defaults(func=cmd_optima)

    p = sub.add_parser("curves", help="cumulative supply and demand curves of one period")
    p.add_argument("file")
    p.add_argument("--period", type=int, required=True)
    p.add_argument("--with-result", action="store_true",
                   help="drop hourly bids of orders the clearing deactivates")
    objective_option(p)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("compare", help="clear under both objectives side by side")
    p.add_argument("file")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (BidSetError, ValidationFailed, UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except oracle.OracleLimitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
