"""Bid-set documents, result reports and curve exports.

A bid set is a JSON document.  Every number is either a JSON integer or a
string holding an exact decimal or fraction ("5.5", "11/2"); JSON floats
are rejected so nothing ever passes through binary floating point.
"""

from __future__ import annotations

import csv
import io
import json
from decimal import Decimal, localcontext
from fractions import Fraction
from importlib import resources

from .market import (
    ClearingResult,
    MarketInstance,
    MicHourlyBid,
    MicOrder,
    Side,
    SimpleBid,
    build_curves,
    mic_slack,
    order_cost,
    order_income,
    real_profit,
    validate_instance,
)

__all__ = [
    "SCHEMA_VERSION",
    "BidSetError",
    "ValidationFailed",
    "parse_rational",
    "format_rational",
    "approx",
    "parse_bidset",
    "load_bidset",
    "serialize_bidset",
    "shipped_bidset",
    "schema",
    "emit_result",
    "parse_result_csv",
    "emit_curves",
]

SCHEMA_VERSION = 1
FORMATS = ("human", "csv", "json")


class BidSetError(ValueError):
    """The document is malformed; the message names the line or field."""


class ValidationFailed(ValueError):
    """The document parsed but describes an invalid market."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(map(str, self.violations)))


def parse_rational(value, where: str = "value") -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        kind = "floating-point number" if isinstance(value, Decimal) else type(value).__name__
        raise BidSetError(f"{where}: expected an integer or a numeric string, got {kind}")
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise BidSetError(f"{where}: {value!r} is not an exact decimal or fraction") from None


def format_rational(x: Fraction) -> str:
    """Shortest exact text: a terminating decimal when there is one, else ``a/b``."""
    x = Fraction(x)
    d = x.denominator
    for p in (2, 5):
        while d % p == 0:
            d //= p
    if d != 1:
        return f"{x.numerator}/{x.denominator}"
    if x.denominator == 1:
        return str(x.numerator)
    with localcontext() as ctx:
        ctx.prec = 100
        text = format(Decimal(x.numerator) / Decimal(x.denominator), "f")
    return text


def approx(x: Fraction, places: int = 6) -> str:
    with localcontext() as ctx:
        ctx.prec = 60
        value = Decimal(x.numerator) / Decimal(x.denominator)
        return str(value.quantize(Decimal(1).scaleb(-places)))


def _exact(x: Fraction) -> str:
    return str(Fraction(x))


# --------------------------------------------------------------------------
# bid sets


def _field(obj, key, where, required=True):
    if not isinstance(obj, dict):
        raise BidSetError(f"{where}: expected an object")
    if key not in obj:
        if required:
            raise BidSetError(f"{where}: missing field {key!r}")
        return None
    return obj[key]


def _integer(value, where) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise BidSetError(f"{where}: expected an integer, got {value!r}")
    return value


def _identifier(value, where) -> str:
    if not isinstance(value, str) or not value:
        raise BidSetError(f"{where}: expected a non-empty string id")
    return value


def _list(value, where) -> list:
    if not isinstance(value, list):
        raise BidSetError(f"{where}: expected a list")
    return value


def parse_bidset(text: str) -> MarketInstance:
    """Parse and validate a bid-set document."""
    try:
        doc = json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise BidSetError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise BidSetError("document: expected a JSON object")
    version = _field(doc, "schema_version", "document")
    if version != SCHEMA_VERSION:
        raise BidSetError(f"schema_version: unsupported version {version!r}")
    known = {"schema_version", "period_count", "mcp_upper_bound", "simple_bids", "mic_orders"}
    extra = sorted(set(doc) - known)
    if extra:
        raise BidSetError(f"document: unknown field {extra[0]!r}")
    periods = _integer(_field(doc, "period_count", "document"), "period_count")

    simple = []
    for k, row in enumerate(_list(doc.get("simple_bids", []), "simple_bids")):
        where = f"simple_bids[{k}]"
        side = _field(row, "side", where)
        if side not in ("supply", "demand"):
            raise BidSetError(f"{where}.side: expected 'supply' or 'demand', got {side!r}")
        simple.append(SimpleBid(
            _identifier(_field(row, "id", where), f"{where}.id"),
            Side(side),
            _integer(_field(row, "period", where), f"{where}.period"),
            parse_rational(_field(row, "quantity", where), f"{where}.quantity"),
            parse_rational(_field(row, "price", where), f"{where}.price"),
        ))

    orders = []
    for k, row in enumerate(_list(doc.get("mic_orders", []), "mic_orders")):
        where = f"mic_orders[{k}]"
        oid = _identifier(_field(row, "id", where), f"{where}.id")
        bids = []
        for j, hb in enumerate(_list(_field(row, "hourly_bids", where), f"{where}.hourly_bids")):
            hw = f"{where}.hourly_bids[{j}]"
            period = _integer(_field(hb, "period", hw), f"{hw}.period")
            bid_id = _field(hb, "id", hw, required=False)
            bids.append(MicHourlyBid(
                _identifier(bid_id, f"{hw}.id") if bid_id is not None else f"{oid}_{period}",
                oid,
                period,
                parse_rational(_field(hb, "quantity", hw), f"{hw}.quantity"),
                parse_rational(_field(hb, "price", hw), f"{hw}.price"),
            ))
        true_ft = _field(row, "true_ft", where, required=False)
        true_vt = _field(row, "true_vt", where, required=False)
        orders.append(MicOrder(
            oid,
            parse_rational(_field(row, "ft", where), f"{where}.ft"),
            parse_rational(_field(row, "vt", where), f"{where}.vt"),
            tuple(bids),
            None if true_ft is None else parse_rational(true_ft, f"{where}.true_ft"),
            None if true_vt is None else parse_rational(true_vt, f"{where}.true_vt"),
        ))

    upper = doc.get("mcp_upper_bound")
    instance = MarketInstance(
        periods,
        tuple(simple),
        tuple(orders),
        None if upper is None else parse_rational(upper, "mcp_upper_bound"),
    )
    problems = validate_instance(instance)
    if problems:
        raise ValidationFailed(problems)
    return instance


def load_bidset(path) -> MarketInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_bidset(fh.read())


def serialize_bidset(instance: MarketInstance) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "period_count": instance.period_count}
    if instance.mcp_upper_bound is not None:
        doc["mcp_upper_bound"] = format_rational(instance.mcp_upper_bound)
    doc["simple_bids"] = [
        {
            "id": b.id,
            "side": b.side.value,
            "period": b.period,
            "quantity": format_rational(b.quantity),
            "price": format_rational(b.price),
        }
        for b in instance.simple_bids
    ]
    orders = []
    for o in instance.mic_orders:
        row = {"id": o.id, "ft": format_rational(o.fixed_term), "vt": format_rational(o.variable_term)}
        if o.true_fixed_term is not None:
            row["true_ft"] = format_rational(o.true_fixed_term)
        if o.true_variable_term is not None:
            row["true_vt"] = format_rational(o.true_variable_term)
        row["hourly_bids"] = [
            {
                "id": b.id,
                "period": b.period,
                "quantity": format_rational(b.quantity),
                "price": format_rational(b.price),
            }
            for b in o.hourly_bids
        ]
        orders.append(row)
    doc["mic_orders"] = orders
    return json.dumps(doc, indent=2) + "\n"


def shipped_bidset(name: str) -> MarketInstance:
    """Load one of the bid sets bundled with the package, e.g. ``table1``."""
    text = resources.files("micmarket").joinpath("data", f"{name}.bidset").read_text("utf-8")
    return parse_bidset(text)


def schema() -> dict:
    text = resources.files("micmarket").joinpath("data", "bidset.schema.json").read_text("utf-8")
    return json.loads(text)


# --------------------------------------------------------------------------
# results


def _result_rows(result: ClearingResult, instance: MarketInstance) -> list:
    """(kind, entity, value) rows in a fixed order."""
    rows = [("status", "", result.status.value), ("variant", "", result.objective_variant.value)]
    if not result.optimal:
        return rows
    rows.append(("objective", "", result.objective_value))
    for t in instance.periods:
        lo, hi = result.mcp_interval[t]
        rows += [("mcp", str(t), result.mcp[t]), ("mcp_lo", str(t), lo), ("mcp_hi", str(t), hi)]
    for b in instance.all_bids():
        rows.append(("acceptance", b.id, result.acceptance[b.id]))
    for b in instance.mic_bids():
        rows.append(("bid_income", b.id, result.bid_income[b.id]))
    for o in instance.mic_orders:
        rows += [
            ("activation", o.id, Fraction(result.activation[o.id])),
            ("order_income", o.id, order_income(o, result)),
            ("order_cost", o.id, order_cost(o, result)),
            ("mic_slack", o.id, mic_slack(o, result)),
            ("real_profit", o.id, real_profit(o, result)),
        ]
    return rows


def _human(result: ClearingResult, instance: MarketInstance) -> str:
    if not result.optimal:
        return f"status: {result.status.value}\n"

    def show(x):
        return f"{_exact(x)} (~{approx(x)})"

    out = [
        f"status: {result.status.value}",
        f"objective ({result.objective_variant.value}): {show(result.objective_value)}",
        "",
        "period  MCP                      interval",
    ]
    for t in instance.periods:
        lo, hi = result.mcp_interval[t]
        out.append(f"{t:<7} {show(result.mcp[t]):<24} [{_exact(lo)}, {_exact(hi)}]")
    out += ["", "bid    side    t  q       p       accepted"]
    for b in instance.all_bids():
        out.append(
            f"{b.id:<6} {b.side.value:<7} {b.period:<2} {_exact(b.quantity):<7} "
            f"{_exact(b.price):<7} {show(result.acceptance[b.id])}"
        )
    if instance.mic_orders:
        out += ["", "order  active  income  cost    slack   real profit"]
        for o in instance.mic_orders:
            out.append(
                f"{o.id:<6} {result.activation[o.id]:<7} {_exact(order_income(o, result)):<7} "
                f"{_exact(order_cost(o, result)):<7} {_exact(mic_slack(o, result)):<7} "
                f"{_exact(real_profit(o, result))}"
            )
    return "\n".join(out) + "\n"


def emit_result(result: ClearingResult, instance: MarketInstance, fmt: str = "human") -> str:
    """Render a clearing as a human table, CSV rows or a JSON object."""
    if fmt == "human":
        return _human(result, instance)
    rows = _result_rows(result, instance)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["kind", "entity", "value", "decimal"])
        for kind, entity, value in rows:
            if isinstance(value, Fraction):
                writer.writerow([kind, entity, _exact(value), approx(value)])
            else:
                writer.writerow([kind, entity, value, ""])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps(result_document(result, instance), indent=2) + "\n"
    raise ValueError(f"unknown format {fmt!r}; choose from {', '.join(FORMATS)}")


def result_document(result: ClearingResult, instance: MarketInstance) -> dict:
    doc: dict = {}
    for kind, entity, value in _result_rows(result, instance):
        if isinstance(value, Fraction):
            value = {"exact": _exact(value), "decimal": approx(value)}
        if entity:
            doc.setdefault(kind, {})[entity] = value
        else:
            doc[kind] = value
    return doc


def parse_result_csv(text: str) -> dict:
    """Read :func:`emit_result` CSV back into ``{(kind, entity): value}``."""
    reader = csv.DictReader(io.StringIO(text))
    out = {}
    for row in reader:
        value = row["value"]
        out[(row["kind"], row["entity"])] = Fraction(value) if row["decimal"] else value
    return out


def emit_curves(instance: MarketInstance, period: int, result: ClearingResult | None = None) -> str:
    """Cumulative supply (ascending) and demand (descending) breakpoints as CSV."""
    supply, demand = build_curves(instance, period, result)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "cumulative_quantity", "price", "bid_id"])
    for name, series in (("supply", supply), ("demand", demand)):
        for point in series:
            writer.writerow([name, _exact(point.cumulative_quantity), _exact(point.price), point.bid_id])
    return buf.getvalue()
