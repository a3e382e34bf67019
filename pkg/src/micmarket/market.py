"""Domain types and solver-independent economics of the two-sided auction.

Every number is a :class:`fractions.Fraction`.  Demand quantities are
stored as positive magnitudes together with a side tag; the signed
convention (demand negative) only appears inside the formulas below.
"""

from __future__ import annotations

import enum
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence

ZERO = Fraction(0)
ONE = Fraction(1)

Rational = Fraction


class Side(str, enum.Enum):
    SUPPLY = "supply"
    DEMAND = "demand"


class Objective(str, enum.Enum):
    """Which welfare accounting the clearing maximises."""

    HOURLY = "HourlyTSW"  # every hourly bid priced at its bid price
    MIC_COST = "MicCostTSW"  # MIC hourly bids replaced by their FT/VT cost


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


class ClearingDataError(ValueError):
    """A clearing result lacks an entry that a computation needs."""


@dataclass(frozen=True)
class SimpleBid:
    id: str
    side: Side
    period: int
    quantity: Fraction
    price: Fraction

    @property
    def signed_quantity(self) -> Fraction:
        return self.quantity if self.side is Side.SUPPLY else -self.quantity


@dataclass(frozen=True)
class MicHourlyBid:
    id: str
    order_id: str
    period: int
    quantity: Fraction
    price: Fraction

    side = Side.SUPPLY


@dataclass(frozen=True)
class MicOrder:
    id: str
    fixed_term: Fraction
    variable_term: Fraction
    hourly_bids: tuple
    true_fixed_term: Optional[Fraction] = None
    true_variable_term: Optional[Fraction] = None

    @property
    def real_fixed_term(self) -> Fraction:
        return self.fixed_term if self.true_fixed_term is None else self.true_fixed_term

    @property
    def real_variable_term(self) -> Fraction:
        if self.true_variable_term is None:
            return self.variable_term
        return self.true_variable_term


@dataclass(frozen=True)
class MarketInstance:
    period_count: int
    simple_bids: tuple = ()
    mic_orders: tuple = ()
    mcp_upper_bound: Optional[Fraction] = None

    @property
    def periods(self) -> range:
        return range(1, self.period_count + 1)

    def mic_bids(self) -> Iterator[MicHourlyBid]:
        for order in self.mic_orders:
            yield from order.hourly_bids

    def all_bids(self) -> list:
        """Simple bids then MIC hourly bids; this order is canonical everywhere."""
        return [*self.simple_bids, *self.mic_bids()]

    def bids_in_period(self, t: int) -> list:
        return [b for b in self.all_bids() if b.period == t]

    def order(self, order_id: str) -> MicOrder:
        for o in self.mic_orders:
            if o.id == order_id:
                return o
        raise KeyError(order_id)

    def replace_order(self, order_id: str, **changes) -> "MarketInstance":
        orders = tuple(
            replace(o, **changes) if o.id == order_id else o for o in self.mic_orders
        )
        return replace(self, mic_orders=orders)

    def max_price(self) -> Fraction:
        return max((b.price for b in self.all_bids()), default=ZERO)


@dataclass(frozen=True)
class ClearingResult:
    status: Status
    objective_variant: Objective
    mcp: Mapping[int, Fraction] = field(default_factory=dict)
    mcp_interval: Mapping[int, tuple] = field(default_factory=dict)
    acceptance: Mapping[str, Fraction] = field(default_factory=dict)
    activation: Mapping[str, int] = field(default_factory=dict)
    bid_income: Mapping[str, Fraction] = field(default_factory=dict)
    order_income: Mapping[str, Fraction] = field(default_factory=dict)
    objective_value: Optional[Fraction] = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL

    def canonical_key(self) -> tuple:
        """Everything that identifies the clearing, in a comparable form."""
        return (
            self.status.value,
            self.objective_value,
            tuple(sorted(self.mcp.items())),
            tuple(sorted(self.mcp_interval.items())),
            tuple(sorted(self.acceptance.items())),
            tuple(sorted(self.activation.items())),
            tuple(sorted(self.bid_income.items())),
            tuple(sorted(self.order_income.items())),
        )


@dataclass(frozen=True)
class CurvePoint:
    cumulative_quantity: Fraction
    price: Fraction
    bid_id: str = ""


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    detail: str = ""

    def __str__(self) -> str:
        return f"{self.entity}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


# --------------------------------------------------------------------------
# validation


def validate_instance(instance: MarketInstance) -> list:
    """Return every broken invariant of ``instance``; an empty list means valid."""
    out = []
    T = instance.period_count
    if not isinstance(T, int) or T < 1:
        out.append(Violation("instance", "period_count must be an integer >= 1", str(T)))
        T = 0

    def check_bid(bid, kind):
        if not 1 <= bid.period <= T:
            out.append(Violation(bid.id, "period out of range", f"{bid.period} not in [1, {T}]"))
        if bid.quantity <= 0:
            out.append(Violation(bid.id, "quantity must be positive", str(bid.quantity)))
        if bid.price < 0:
            out.append(Violation(bid.id, "price must be non-negative", str(bid.price)))
        if kind == "simple" and not isinstance(bid.side, Side):
            out.append(Violation(bid.id, "side must be supply or demand", str(bid.side)))

    for bid in instance.simple_bids:
        check_bid(bid, "simple")
    for order in instance.mic_orders:
        if not order.hourly_bids:
            out.append(Violation(order.id, "MIC order needs at least one hourly bid"))
        if order.fixed_term < 0:
            out.append(Violation(order.id, "fixed term must be non-negative"))
        if order.variable_term < 0:
            out.append(Violation(order.id, "variable term must be non-negative"))
        for name in ("true_fixed_term", "true_variable_term"):
            v = getattr(order, name)
            if v is not None and v < 0:
                out.append(Violation(order.id, f"{name.replace('_', ' ')} must be non-negative"))
        seen_periods = Counter()
        for bid in order.hourly_bids:
            check_bid(bid, "mic")
            if bid.order_id != order.id:
                out.append(
                    Violation(bid.id, "hourly bid references another order", bid.order_id)
                )
            seen_periods[bid.period] += 1
        for t, k in sorted(seen_periods.items()):
            if k > 1:
                out.append(
                    Violation(order.id, "more than one hourly bid in a period", f"period {t}")
                )

    bid_ids = Counter(b.id for b in instance.all_bids())
    for bid_id, k in bid_ids.items():
        if k > 1:
            out.append(Violation(bid_id, "duplicate bid id"))
    order_ids = Counter(o.id for o in instance.mic_orders)
    for order_id, k in order_ids.items():
        if k > 1:
            out.append(Violation(order_id, "duplicate order id"))
    if instance.mcp_upper_bound is not None and instance.mcp_upper_bound < 0:
        out.append(Violation("instance", "mcp upper bound must be non-negative"))
    return out


# --------------------------------------------------------------------------
# welfare


def _y(result: ClearingResult, bid_id: str) -> Fraction:
    try:
        return result.acceptance[bid_id]
    except KeyError:
        raise ClearingDataError(f"no acceptance entry for bid {bid_id!r}") from None


def _u(result: ClearingResult, order_id: str) -> int:
    try:
        return result.activation[order_id]
    except KeyError:
        raise ClearingDataError(f"no activation entry for order {order_id!r}") from None


def _simple_welfare(instance, result) -> Fraction:
    # -sum y q p with signed quantities
    return sum(
        (-_y(result, b.id) * b.signed_quantity * b.price for b in instance.simple_bids), ZERO
    )


def tsw_hourly(instance: MarketInstance, result: ClearingResult) -> Fraction:
    """Total social welfare with MIC hourly bids valued at their bid prices."""
    total = _simple_welfare(instance, result)
    for bid in instance.mic_bids():
        total -= _y(result, bid.id) * bid.quantity * bid.price
    return total


def tsw_mic(instance: MarketInstance, result: ClearingResult) -> Fraction:
    """Total social welfare with MIC orders valued by their submitted FT/VT cost."""
    total = _simple_welfare(instance, result)
    for order in instance.mic_orders:
        total -= _u(result, order.id) * order.fixed_term
        for bid in order.hourly_bids:
            total -= _y(result, bid.id) * bid.quantity * order.variable_term
    return total


def welfare(instance: MarketInstance, result: ClearingResult, variant: Objective) -> Fraction:
    if variant is Objective.HOURLY:
        return tsw_hourly(instance, result)
    return tsw_mic(instance, result)


def traded_volume(instance: MarketInstance, result: ClearingResult) -> Fraction:
    return sum(
        (result.acceptance[b.id] * b.quantity for b in instance.all_bids() if b.side is Side.SUPPLY),
        ZERO,
    )


def canonical_vector(instance: MarketInstance, result: ClearingResult, variant: Objective) -> tuple:
    """Sort key of the canonical tie-break; larger is better.

    Objective first, then traded volume, then lexicographically smaller
    MCPs, then the smaller activation vector, then larger acceptances in
    canonical bid order.
    """
    return (
        welfare(instance, result, variant),
        traded_volume(instance, result),
        *(-result.mcp[t] for t in instance.periods),
        *(-result.activation[o.id] for o in instance.mic_orders),
        *(result.acceptance[b.id] for b in instance.all_bids()),
    )


def surpluses(instance: MarketInstance, result: ClearingResult) -> tuple:
    """Consumer and producer surplus at the cleared prices.

    Consumer surplus carries a leading minus so that it is non-negative
    with negative demand quantities; then ``CS + PS`` equals
    :func:`tsw_hourly` whenever every period balances.
    """
    cs = ps = ZERO
    for bid in instance.all_bids():
        y = result.acceptance.get(bid.id, ZERO)
        if not y:
            continue
        mcp = result.mcp[bid.period]
        if bid.side is Side.DEMAND:
            cs += -y * (-bid.quantity) * (bid.price - mcp)
        else:
            ps += y * bid.quantity * (mcp - bid.price)
    return cs, ps


def accepted_volume(order: MicOrder, result: ClearingResult) -> Fraction:
    return sum((result.acceptance.get(b.id, ZERO) * b.quantity for b in order.hourly_bids), ZERO)


def _active(order: MicOrder, result: ClearingResult) -> bool:
    if order.id in result.activation:
        return bool(result.activation[order.id])
    return any(result.acceptance.get(b.id, ZERO) > 0 for b in order.hourly_bids)


def order_cost(order: MicOrder, result: ClearingResult) -> Fraction:
    """Submitted cost ``FT + VT * volume``; zero for a deactivated order."""
    if not _active(order, result):
        return ZERO
    return order.fixed_term + order.variable_term * accepted_volume(order, result)


def order_income(order: MicOrder, result: ClearingResult) -> Fraction:
    if order.id in result.order_income:
        return result.order_income[order.id]
    return sum((result.bid_income.get(b.id, ZERO) for b in order.hourly_bids), ZERO)


def mic_slack(order: MicOrder, result: ClearingResult) -> Fraction:
    return order_income(order, result) - order_cost(order, result)


def mic_satisfied(order: MicOrder, result: ClearingResult) -> bool:
    if not any(result.acceptance.get(b.id, ZERO) > 0 for b in order.hourly_bids):
        return True
    return order_income(order, result) >= order_cost(order, result)


def real_profit(order: MicOrder, result: ClearingResult) -> Fraction:
    """Income minus the true (not the submitted) production cost."""
    if not _active(order, result):
        return ZERO
    cost = order.real_fixed_term + order.real_variable_term * accepted_volume(order, result)
    return order_income(order, result) - cost


def bid_income(bid: MicHourlyBid, y: Fraction, mcp: Fraction) -> Fraction:
    """Income of a MIC hourly bid under the three acceptance cases."""
    if y == 0:
        return ZERO
    if y == 1:
        return bid.quantity * mcp
    return y * bid.quantity * bid.price


# --------------------------------------------------------------------------
# verification


def verify_clearing(
    instance: MarketInstance, result: ClearingResult, variant: Optional[Objective] = None
) -> list:
    """Check ``result`` against every clearing rule, exactly.

    Returns a list of :class:`Violation`; empty means the clearing is valid.
    """
    out = []
    if not result.optimal:
        return [Violation("result", "status is not Optimal", result.status.value)]
    upper = instance.mcp_upper_bound
    for t in instance.periods:
        if t not in result.mcp:
            out.append(Violation(f"period {t}", "missing MCP"))
            continue
        if result.mcp[t] < 0:
            out.append(Violation(f"period {t}", "negative MCP", str(result.mcp[t])))
        if upper is not None and result.mcp[t] > upper:
            out.append(Violation(f"period {t}", "MCP above upper bound", str(result.mcp[t])))
    if out:
        return out

    for bid in instance.all_bids():
        if bid.id not in result.acceptance:
            out.append(Violation(bid.id, "missing acceptance"))
        elif not ZERO <= result.acceptance[bid.id] <= ONE:
            out.append(Violation(bid.id, "acceptance outside [0, 1]", str(result.acceptance[bid.id])))
    if out:
        return out

    acc = result.acceptance
    for t in instance.periods:
        net = sum((acc[b.id] * b.quantity * (1 if b.side is Side.SUPPLY else -1)
                   for b in instance.bids_in_period(t)), ZERO)
        if net:
            out.append(Violation(f"period {t}", "power balance", f"net supply {net}"))

    for bid in instance.simple_bids:
        y, p, mcp = acc[bid.id], bid.price, result.mcp[bid.period]
        if bid.side is Side.SUPPLY:
            if y > 0 and not p <= mcp:
                out.append(Violation(bid.id, "accepted supply priced above MCP", f"{p} > {mcp}"))
            if y < 1 and not mcp <= p:
                out.append(Violation(bid.id, "rejected supply priced below MCP", f"{p} < {mcp}"))
        else:
            if y > 0 and not mcp <= p:
                out.append(Violation(bid.id, "accepted demand priced below MCP", f"{p} < {mcp}"))
            if y < 1 and not p <= mcp:
                out.append(Violation(bid.id, "rejected demand priced above MCP", f"{p} > {mcp}"))

    for order in instance.mic_orders:
        if order.id not in result.activation:
            out.append(Violation(order.id, "missing activation"))
            continue
        u = result.activation[order.id]
        ys = [acc[b.id] for b in order.hourly_bids]
        if u not in (0, 1):
            out.append(Violation(order.id, "activation not binary", str(u)))
        if u == 0 and any(ys):
            out.append(Violation(order.id, "deactivated order has accepted bids"))
        if u == 1 and not any(ys):
            out.append(Violation(order.id, "activated order has no accepted volume"))
        total = ZERO
        for bid in order.hourly_bids:
            y, p, mcp = acc[bid.id], bid.price, result.mcp[bid.period]
            inc = result.bid_income.get(bid.id)
            if inc is None:
                out.append(Violation(bid.id, "missing income"))
                continue
            total += inc
            if y > 0 and not p <= mcp:
                out.append(Violation(bid.id, "accepted MIC bid priced above MCP", f"{p} > {mcp}"))
            if u == 1 and y < 1 and not mcp <= p:
                out.append(
                    Violation(bid.id, "active MIC bid not fully accepted below MCP", f"{p} < {mcp}")
                )
            q = bid.quantity
            if y > 0 and inc != y * q * p + q * mcp - q * p:
                out.append(Violation(bid.id, "income rule for accepted bid", f"income {inc}"))
            if y < 1 and inc != y * q * p:
                out.append(Violation(bid.id, "income rule for not fully accepted bid", f"income {inc}"))
        if result.order_income.get(order.id) != total:
            out.append(
                Violation(order.id, "order income differs from sum of bid incomes",
                          f"{result.order_income.get(order.id)} != {total}")
            )
        if any(y > 0 for y in ys):
            cost = order.fixed_term + order.variable_term * accepted_volume(order, result)
            if total < cost:
                out.append(
                    Violation(order.id, "minimum income condition", f"income {total} < cost {cost}")
                )

    if variant is not None and result.objective_value is not None and not out:
        value = welfare(instance, result, variant)
        if value != result.objective_value:
            out.append(
                Violation("result", "objective value mismatch",
                          f"reported {result.objective_value}, recomputed {value}")
            )
    return out


# --------------------------------------------------------------------------
# prices and curves


def price_interval(instance: MarketInstance, result: ClearingResult, period: int) -> tuple:
    """Closed interval of MCPs for ``period`` compatible with the fixed acceptances.

    Acceptances, activations and the other periods' prices are held at
    their values in ``result``.  Returns ``(lo, hi)``; ``lo > hi`` signals
    an empty interval.
    """
    upper = instance.mcp_upper_bound
    if upper is None:
        upper = instance.max_price()
    lo, hi = ZERO, upper
    acc = result.acceptance
    for bid in instance.simple_bids:
        if bid.period != period:
            continue
        y, p = acc[bid.id], bid.price
        if bid.side is Side.SUPPLY:
            if y > 0:
                lo = max(lo, p)
            if y < 1:
                hi = min(hi, p)
        else:
            if y > 0:
                hi = min(hi, p)
            if y < 1:
                lo = max(lo, p)
    for order in instance.mic_orders:
        if not result.activation.get(order.id):
            continue
        full_here = ZERO
        rest = ZERO
        for bid in order.hourly_bids:
            y, p = acc[bid.id], bid.price
            if bid.period == period:
                if y > 0:
                    lo = max(lo, p)
                if y < 1:
                    hi = min(hi, p)
                if y == 1:
                    full_here += bid.quantity
                else:
                    rest += bid_income(bid, y, p)
            else:
                rest += bid_income(bid, y, result.mcp[bid.period])
        if full_here:
            cost = order.fixed_term + order.variable_term * accepted_volume(order, result)
            lo = max(lo, (cost - rest) / full_here)
    return lo, hi


def build_curves(
    instance: MarketInstance, period: int, result: Optional[ClearingResult] = None
) -> tuple:
    """Cumulative step curves of one period: (supply ascending, demand descending).

    With a result, hourly bids of deactivated MIC orders are left out.
    """
    if not 1 <= period <= instance.period_count:
        raise ValueError(f"period {period} outside [1, {instance.period_count}]")
    skip = set()
    if result is not None:
        for order in instance.mic_orders:
            if not result.activation.get(order.id):
                skip.update(b.id for b in order.hourly_bids)
    bids = [b for b in instance.bids_in_period(period) if b.id not in skip]
    supply = sorted((b for b in bids if b.side is Side.SUPPLY), key=lambda b: b.price)
    demand = sorted((b for b in bids if b.side is Side.DEMAND), key=lambda b: -b.price)

    def cumulate(seq: Sequence) -> list:
        q = ZERO
        points = []
        for b in seq:
            q += b.quantity
            points.append(CurvePoint(q, b.price, b.id))
        return points

    return cumulate(supply), cumulate(demand)
