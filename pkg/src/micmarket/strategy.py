"""Strategic-bidding experiments on the two-period example market.

One MIC order is treated as the strategic player.  The helpers here
clear the built-in scenarios, sweep the player's submitted fixed term,
flag paradoxically rejected orders and compare the two objective
variants.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

from .market import (
    ZERO,
    ClearingResult,
    MarketInstance,
    MicHourlyBid,
    MicOrder,
    Objective,
    Side,
    SimpleBid,
    accepted_volume,
    mic_slack,
    order_cost,
    order_income,
    real_profit,
    welfare,
)
from . import milp, oracle

__all__ = [
    "Scenario",
    "OrderAnalysis",
    "ScenarioAnalysis",
    "OutcomeSummary",
    "Window",
    "SweepReport",
    "ObjectiveComparison",
    "ContinuousOutcomeError",
    "example_instance",
    "builtin_scenarios",
    "run_scenario",
    "ft_sweep",
    "detect_paradoxical_rejection",
    "enumerate_optimal_activations",
    "compare_objectives",
]

F = Fraction


@dataclass(frozen=True)
class Scenario:
    name: str
    instance: MarketInstance
    variant: Objective
    notes: str = ""


def example_instance(ft1=F(10), mic1_price=F(1)) -> MarketInstance:
    """The two-period example: four simple sellers, two buyers, two MIC orders.

    Both MIC orders truly cost FT 10 and VT 2; ``ft1`` is what the first
    one submits and ``mic1_price`` is the price of its hourly bids.
    """
    S, D = Side.SUPPLY, Side.DEMAND
    simple = (
        SimpleBid("S1", S, 1, F(2), F(5)),
        SimpleBid("S2", S, 1, F(2), F(6)),
        SimpleBid("S3", S, 2, F(2), F(5)),
        SimpleBid("S4", S, 2, F(2), F(6)),
        SimpleBid("D1", D, 1, F(5), F(10)),
        SimpleBid("D2", D, 2, F(5), F(10)),
    )
    c1 = MicOrder(
        "c1", F(ft1), F(2),
        (MicHourlyBid("S5", "c1", 1, F(2), F(mic1_price)),
         MicHourlyBid("S6", "c1", 2, F(2), F(mic1_price))),
        F(10), F(2),
    )
    c2 = MicOrder(
        "c2", F(10), F(2),
        (MicHourlyBid("S7", "c2", 1, F(2), F(4)), MicHourlyBid("S8", "c2", 2, F(2), F(4))),
        F(10), F(2),
    )
    return MarketInstance(2, simple, (c1, c2))


def builtin_scenarios() -> list:
    truthful = example_instance()
    inflated = example_instance(ft1=F(14))
    repriced = example_instance(mic1_price=F(11, 2))
    return [
        Scenario("case1", truthful, Objective.HOURLY, "truthful bidding"),
        Scenario("case2", inflated, Objective.HOURLY, "player 1 submits FT 14"),
        Scenario("case1_mod", truthful, Objective.MIC_COST, "truthful bidding, cost-based objective"),
        Scenario("case2_mod", inflated, Objective.MIC_COST, "FT 14, cost-based objective"),
        Scenario("case3", repriced, Objective.MIC_COST, "player 1 prices its hourly bids at 5.5"),
    ]


@dataclass(frozen=True)
class OrderAnalysis:
    order_id: str
    active: bool
    income: Fraction
    cost: Fraction
    slack: Fraction
    real_profit: Fraction
    paradoxical: bool


@dataclass(frozen=True)
class ScenarioAnalysis:
    orders: tuple
    paradoxical: tuple
    tsw_hourly: Optional[Fraction]
    tsw_mic: Optional[Fraction]
    note: str = ""

    def order(self, order_id: str) -> OrderAnalysis:
        for o in self.orders:
            if o.order_id == order_id:
                return o
        raise KeyError(order_id)


PARADOX_NOTE = (
    "flagged orders only look acceptable at the cleared prices; accepting them "
    "may still break price consistency or optimality"
)


def analyse(instance: MarketInstance, result: ClearingResult) -> ScenarioAnalysis:
    if not result.optimal:
        return ScenarioAnalysis((), (), None, None, "infeasible")
    flagged = tuple(detect_paradoxical_rejection(instance, result))
    orders = tuple(
        OrderAnalysis(
            o.id,
            bool(result.activation[o.id]),
            order_income(o, result),
            order_cost(o, result),
            mic_slack(o, result),
            real_profit(o, result),
            o.id in flagged,
        )
        for o in instance.mic_orders
    )
    return ScenarioAnalysis(
        orders,
        flagged,
        welfare(instance, result, Objective.HOURLY),
        welfare(instance, result, Objective.MIC_COST),
        PARADOX_NOTE if flagged else "",
    )


def run_scenario(scenario: Scenario) -> tuple:
    result = milp.clear(scenario.instance, scenario.variant)
    return result, analyse(scenario.instance, result)


def detect_paradoxical_rejection(instance: MarketInstance, result: ClearingResult) -> list:
    """Deactivated orders whose bids all look in the money and whose MIC would hold.

    This is an appearance test at the cleared prices, not a proof that the
    order could have been accepted.
    """
    flagged = []
    for order in instance.mic_orders:
        if result.activation.get(order.id):
            continue
        if not all(b.price <= result.mcp[b.period] for b in order.hourly_bids):
            continue
        income = sum((b.quantity * result.mcp[b.period] for b in order.hourly_bids), ZERO)
        volume = sum((b.quantity for b in order.hourly_bids), ZERO)
        if income >= order.fixed_term + order.variable_term * volume:
            flagged.append(order.id)
    return flagged


def enumerate_optimal_activations(instance: MarketInstance, variant: Objective) -> list:
    """Activation vectors (0/1 tuples in order-list order) that reach the optimum."""
    return oracle.optimal_activations(instance, variant)


# --------------------------------------------------------------------------
# fixed-term sweep


class ContinuousOutcomeError(RuntimeError):
    """The outcome keeps changing on ever smaller intervals (for example an
    MCP that moves with the fixed term), so no finite window list exists."""


@dataclass(frozen=True)
class OutcomeSummary:
    feasible: bool
    activation: tuple
    mcp: tuple
    profit: Optional[Fraction]


@dataclass(frozen=True)
class Window:
    lo: Fraction
    hi: Fraction
    lo_closed: bool
    hi_closed: bool
    outcome: OutcomeSummary

    def contains(self, x: Fraction) -> bool:
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def __str__(self) -> str:
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{self.lo}, {self.hi}{right}"


@dataclass
class SweepReport:
    order_id: str
    parameter: str
    lo: Fraction
    hi: Fraction
    breakpoints: list = field(default_factory=list)
    windows: list = field(default_factory=list)
    clears: int = 0

    def outcome_at(self, x: Fraction) -> OutcomeSummary:
        for w in self.windows:
            if w.contains(x):
                return w.outcome
        raise ValueError(f"{x} outside the swept range")


def _summary(instance: MarketInstance, order_id: str, result: ClearingResult) -> OutcomeSummary:
    if not result.optimal:
        return OutcomeSummary(False, (), (), None)
    return OutcomeSummary(
        True,
        tuple((o.id, int(result.activation[o.id])) for o in instance.mic_orders),
        tuple(result.mcp[t] for t in instance.periods),
        real_profit(instance.order(order_id), result),
    )


def _regime_candidates(instance: MarketInstance, order: MicOrder) -> set:
    """Fixed terms at which the order's MIC is tight for some price regime.

    For every MCP choice among the period's bid prices (and the bounds)
    and every set of fully accepted hourly bids, income minus variable
    cost is a value where the MIC constraint switches.
    """
    upper = instance.mcp_upper_bound if instance.mcp_upper_bound is not None else instance.max_price()
    levels = {
        t: sorted({b.price for b in instance.bids_in_period(t)} | {ZERO, F(upper)})
        for t in {b.period for b in order.hourly_bids}
    }
    periods = sorted(levels)
    out = set()
    for prices in itertools.product(*(levels[t] for t in periods)):
        mcp = dict(zip(periods, prices))
        eligible = [b for b in order.hourly_bids if b.price <= mcp[b.period]]
        for k in range(len(eligible) + 1):
            for subset in itertools.combinations(eligible, k):
                out.add(sum((b.quantity * (mcp[b.period] - order.variable_term) for b in subset), ZERO))
    return out


def ft_sweep(
    instance: MarketInstance,
    order_id: str,
    lo,
    hi,
    variant: Objective = Objective.HOURLY,
    solver: Optional[Callable] = None,
    max_depth: int = 40,
) -> SweepReport:
    """Exact outcome windows of the order's submitted fixed term over ``[lo, hi]``.

    Outcomes are bracketed by bisection over candidate fixed terms (values
    where some MIC becomes tight, plus the exact end of feasibility and the
    objective crossings of the outcomes seen so far).  Each breakpoint is
    itself cleared to decide which side it belongs to.  Between two
    evaluated points with the same outcome the outcome is taken as
    constant.  The true cost terms are frozen at their pre-sweep values so
    the profit refers to the real cost.
    """
    lo, hi = F(lo), F(hi)
    if lo < 0 or hi < lo:
        raise ValueError(f"bad sweep range [{lo}, {hi}]")
    base = instance.order(order_id)  # KeyError for unknown orders
    instance = instance.replace_order(
        order_id,
        true_fixed_term=base.real_fixed_term,
        true_variable_term=base.real_variable_term,
    )
    solve = solver or milp.clear
    report = SweepReport(order_id, "fixed_term", lo, hi)
    results: dict = {}
    summary: dict = {}

    def evaluate(x):
        if x not in results:
            r = solve(instance.replace_order(order_id, fixed_term=x), variant)
            report.clears += 1
            results[x] = r
            summary[x] = _summary(instance, order_id, r)
        return summary[x]

    candidates = {c for c in _regime_candidates(instance, base) if lo < c < hi}

    def tight_point(x):
        # the fixed term at which this clearing stops satisfying the MIC
        r = results[x]
        if not r.optimal or not r.activation[order_id]:
            return None
        order = instance.order(order_id)
        return order_income(order, r) - order.variable_term * accepted_volume(order, r)

    def objective_line(x):
        r = results[x]
        slope = -r.activation[order_id] if variant is Objective.MIC_COST else 0
        return r.objective_value - slope * x, slope

    def dynamic(a, b):
        out = {tight_point(a), tight_point(b)}
        if results[a].optimal and results[b].optimal:
            (ca, sa), (cb, sb) = objective_line(a), objective_line(b)
            if sa != sb:
                out.add((cb - ca) / (sa - sb))
        return {c for c in out if c is not None and a < c < b}

    interiors = []  # (a, b, summary) facts about open gaps with differing ends

    def refine(a, b, depth):
        inside = sorted((candidates | dynamic(a, b)) - results.keys())
        inside = [c for c in inside if a < c < b]
        if inside:
            c = inside[len(inside) // 2]
            evaluate(c)
            for x, y in ((a, c), (c, b)):
                if summary[x] != summary[y]:
                    refine(x, y, depth)
            return
        m = (a + b) / 2
        sm = evaluate(m)
        if sm == summary[a] and not dynamic(m, b):
            interiors.append((m, b, sm))
            return
        if sm == summary[b] and not dynamic(a, m):
            interiors.append((a, m, sm))
            return
        if depth >= max_depth:
            raise ContinuousOutcomeError(
                f"outcome still changing within [{a}, {b}] after {depth} bisections"
            )
        for x, y in ((a, m), (m, b)):
            if summary[x] != summary[y]:
                refine(x, y, depth + 1)

    evaluate(lo)
    evaluate(hi)
    if lo < hi:
        if summary[lo] != summary[hi]:
            refine(lo, hi, 0)
        else:
            # an equal pair of endpoints can still hide a change in between
            for c in sorted(candidates):
                evaluate(c)
            points = sorted(results)
            for x, y in zip(points, points[1:]):
                if summary[x] != summary[y]:
                    refine(x, y, 0)

    report.windows = _windows(sorted(results), summary, interiors)
    report.breakpoints = [w.lo for w in report.windows[1:]]
    return report


def _windows(points, summary, interiors) -> list:
    atoms = []  # (lo, hi, lo_closed, hi_closed, summary)
    for k, x in enumerate(points):
        atoms.append((x, x, True, True, summary[x]))
        if k + 1 == len(points):
            break
        y = points[k + 1]
        if summary[x] == summary[y]:
            gap = summary[x]
        else:
            gap = next(s for a, b, s in interiors if a <= x and y <= b)
        atoms.append((x, y, False, False, gap))
    windows = []
    for lo, hi, lc, hc, s in atoms:
        if windows and windows[-1].outcome == s:
            w = windows[-1]
            windows[-1] = Window(w.lo, hi, w.lo_closed, hc, s)
        else:
            windows.append(Window(lo, hi, lc, hc, s))
    return windows


# --------------------------------------------------------------------------
# objective comparison


@dataclass(frozen=True)
class ObjectiveComparison:
    hourly: ClearingResult
    mic_cost: ClearingResult
    activation_differs: tuple
    mcp_differs: tuple
    tsw: dict
    profit_delta: dict

    @property
    def identical(self) -> bool:
        return (
            self.hourly.acceptance == self.mic_cost.acceptance
            and not self.activation_differs
            and not self.mcp_differs
        )


def compare_objectives(instance: MarketInstance, solver: Optional[Callable] = None) -> ObjectiveComparison:
    """Clear under both objectives and line the results up.

    ``tsw`` maps (cleared under, evaluated with) to the welfare value;
    ``profit_delta`` is the real profit under the cost-based objective
    minus the one under the hourly objective.
    """
    solve = solver or milp.clear
    a = solve(instance, Objective.HOURLY)
    b = solve(instance, Objective.MIC_COST)
    if not (a.optimal and b.optimal):
        return ObjectiveComparison(a, b, (), (), {}, {})
    tsw = {
        (r.objective_variant.value, acc.value): welfare(instance, r, acc)
        for r in (a, b)
        for acc in Objective
    }
    return ObjectiveComparison(
        a,
        b,
        tuple(o.id for o in instance.mic_orders if a.activation[o.id] != b.activation[o.id]),
        tuple(t for t in instance.periods if a.mcp[t] != b.mcp[t]),
        tsw,
        {o.id: real_profit(o, b) - real_profit(o, a) for o in instance.mic_orders},
    )
