"""MILP encoding of the clearing problem and its branch-and-bound solver.

Every logical implication ``premise -> consequence`` is written as the
disjunction ``not premise or consequence`` and linearised with an
auxiliary binary ``z``: ``z = 1`` cancels the consequence and forces the
premise false.  Implications on the same bid with the same premise
(``y > 0`` or ``y < 1``) share their indicator, so every bid carries two.
MIC orders get an explicit activation binary ``u``.

Among equally good clearings the solver returns a canonical one: the
objective is maximised first, then traded volume, then the MCP vector is
minimised lexicographically, then the activation vector, and finally
acceptances are maximised in canonical bid order.  All of this is one
lexicographic objective handed to :func:`micmarket.lp.solve_lp`.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Mapping

from .lp import Constraint, LinearProgram, LpStatus, Relation, Variable, solve_lp
from .market import (
    ZERO,
    ClearingResult,
    MarketInstance,
    Objective,
    Side,
    Status,
    price_interval,
    validate_instance,
)

__all__ = [
    "BigMBounds",
    "MilpProblem",
    "BnbStats",
    "BigMError",
    "compute_big_m",
    "encode",
    "solve_milp",
    "clear",
    "mcp_interval",
]

ONE = Fraction(1)


class BigMError(ValueError):
    """The requested MCP upper bound would cut off valid clearings."""


@dataclass(frozen=True)
class BigMBounds:
    mcp_upper: Mapping[int, Fraction]
    income_bound: Mapping[str, Fraction]


@dataclass(frozen=True)
class MilpProblem:
    base: LinearProgram
    binaries: tuple
    entity_map: Mapping[str, tuple]
    instance: MarketInstance
    variant: Objective
    bounds: BigMBounds

    def variables_by_role(self, role: str) -> list:
        return [v for v, (r, _) in self.entity_map.items() if r == role]


@dataclass
class BnbStats:
    nodes_explored: int = 0
    lp_solves: int = 0
    best_bound_trace: list = field(default_factory=list)


def compute_big_m(instance: MarketInstance) -> BigMBounds:
    highest = instance.max_price()
    if instance.mcp_upper_bound is not None:
        upper = Fraction(instance.mcp_upper_bound)
        if upper < highest:
            raise BigMError(
                f"MCP upper bound {upper} is below the highest bid price {highest}"
            )
    else:
        upper = highest
    mcp_upper = {t: upper for t in instance.periods}
    income = {b.id: b.quantity * upper for b in instance.mic_bids()}
    return BigMBounds(mcp_upper, income)


class _Builder:
    def __init__(self):
        self.variables = []
        self.constraints = []
        self.entity_map = {}
        self.binaries = []

    def var(self, name, role, entity, lower=ZERO, upper=None, binary=False):
        self.variables.append(Variable(name, lower, upper))
        self.entity_map[name] = (role, entity)
        if binary:
            self.binaries.append(name)
        return name

    def add(self, coeffs, relation, rhs, name=""):
        coeffs = {k: Fraction(v) for k, v in coeffs.items() if v}
        self.constraints.append(Constraint(coeffs, relation, Fraction(rhs), name))


def encode(
    instance: MarketInstance, variant: Objective, bounds: BigMBounds | None = None
) -> MilpProblem:
    """Build the clearing MILP for ``instance`` under objective ``variant``."""
    problems = validate_instance(instance)
    if problems:
        raise ValueError("invalid instance: " + "; ".join(map(str, problems)))
    if bounds is None:
        bounds = compute_big_m(instance)
    b = _Builder()
    LE, GE, EQ = Relation.LE, Relation.GE, Relation.EQ

    mcp = {}
    for t in instance.periods:
        mcp[t] = b.var(f"mcp[{t}]", "mcp", t, ZERO, bounds.mcp_upper[t])
    y = {}
    for bid in instance.all_bids():
        y[bid.id] = b.var(f"y[{bid.id}]", "acceptance", bid.id, ZERO, ONE)
    inc = {}
    for bid in instance.mic_bids():
        inc[bid.id] = b.var(f"inc[{bid.id}]", "income", bid.id, ZERO, bounds.income_bound[bid.id])
    u = {}
    for order in instance.mic_orders:
        u[order.id] = b.var(f"u[{order.id}]", "activation", order.id, ZERO, ONE, binary=True)

    def z(tag, bid_id):
        return b.var(f"z[{bid_id}:{tag}]", "aux", bid_id, ZERO, ONE, binary=True)

    for t in instance.periods:
        b.add(
            {y[x.id]: x.quantity if x.side is Side.SUPPLY else -x.quantity
             for x in instance.bids_in_period(t)},
            EQ, 0, f"balance[{t}]",
        )

    for bid in instance.simple_bids:
        p, M, m, yy = bid.price, bounds.mcp_upper[bid.period], mcp[bid.period], y[bid.id]
        za, zb = z("accept", bid.id), z("reject", bid.id)
        if bid.side is Side.SUPPLY:
            # y > 0 -> p <= MCP
            b.add({m: 1, za: p}, GE, p)
            b.add({yy: 1, za: 1}, LE, 1)
            # y < 1 -> MCP <= p
            b.add({m: 1, zb: -(M - p)}, LE, p)
            b.add({yy: 1, zb: -1}, GE, 0)
        else:
            # y > 0 -> MCP <= p
            b.add({m: 1, za: -(M - p)}, LE, p)
            b.add({yy: 1, za: 1}, LE, 1)
            # y < 1 -> p <= MCP
            b.add({m: 1, zb: p}, GE, p)
            b.add({yy: 1, zb: -1}, GE, 0)

    for order in instance.mic_orders:
        uc = u[order.id]
        for bid in order.hourly_bids:
            p, q = bid.price, bid.quantity
            M, m, yy, ii = bounds.mcp_upper[bid.period], mcp[bid.period], y[bid.id], inc[bid.id]
            B = bounds.income_bound[bid.id]
            # implications with the same premise share one indicator
            za, zr = z("accept", bid.id), z("reject", bid.id)
            # y > 0 -> p <= MCP  and  I = y q p + q MCP - q p
            b.add({yy: 1, za: 1}, LE, 1)
            b.add({m: 1, za: p}, GE, p)
            b.add({ii: 1, yy: -q * p, m: -q, za: -B}, LE, -q * p)
            b.add({ii: -1, yy: q * p, m: q, za: -B}, LE, q * p)
            # y < 1 -> I = y q p  and, when activated, MCP <= p
            b.add({yy: 1, zr: -1}, GE, 0)
            b.add({ii: 1, yy: -q * p, zr: -B}, LE, 0)
            b.add({ii: -1, yy: q * p, zr: -B}, LE, 0)
            b.add({m: 1, zr: -(M - p), uc: M - p}, LE, M)
            # no acceptance without activation
            b.add({yy: 1, uc: -1}, LE, 0)
        # activated -> FT + VT * volume <= income
        volume_cap = sum((x.quantity for x in order.hourly_bids), ZERO)
        big = order.fixed_term + order.variable_term * volume_cap
        coeffs = {y[x.id]: order.variable_term * x.quantity for x in order.hourly_bids}
        for x in order.hourly_bids:
            coeffs[inc[x.id]] = -ONE
        coeffs[uc] = big
        b.add(coeffs, LE, order.variable_term * volume_cap, f"mic[{order.id}]")

    objective = {}
    for bid in instance.simple_bids:
        sign = 1 if bid.side is Side.DEMAND else -1
        objective[y[bid.id]] = sign * bid.quantity * bid.price
    for order in instance.mic_orders:
        if variant is Objective.HOURLY:
            for bid in order.hourly_bids:
                objective[y[bid.id]] = -bid.quantity * bid.price
        else:
            objective[u[order.id]] = -order.fixed_term
            for bid in order.hourly_bids:
                objective[y[bid.id]] = -bid.quantity * order.variable_term

    volume = {y[x.id]: x.quantity for x in instance.all_bids() if x.side is Side.SUPPLY}
    tiebreak = [volume]
    tiebreak += [{mcp[t]: -ONE} for t in instance.periods]
    tiebreak += [{u[o.id]: -ONE} for o in instance.mic_orders]
    tiebreak += [{y[x.id]: ONE} for x in instance.all_bids()]

    base = LinearProgram(tuple(b.variables), tuple(b.constraints), objective, tuple(tiebreak))
    base.check()
    return MilpProblem(base, tuple(b.binaries), b.entity_map, instance, variant, bounds)


def _with_fixings(base: LinearProgram, fixings: dict) -> LinearProgram:
    if not fixings:
        return base
    variables = tuple(
        replace(v, lower=fixings[v.name], upper=fixings[v.name]) if v.name in fixings else v
        for v in base.variables
    )
    return replace(base, variables=variables)


def solve_milp(problem: MilpProblem) -> tuple:
    """Best-bound branch and bound over the binaries; returns (result, stats).

    Branching always picks the fractional binary declared first, and
    open nodes with equal bounds are processed in creation order, so the
    search and its statistics are reproducible.
    """
    stats = BnbStats()
    counter = itertools.count()
    order = {name: k for k, name in enumerate(problem.binaries)}

    def relax(fixings):
        stats.lp_solves += 1
        return solve_lp(_with_fixings(problem.base, fixings))

    incumbent = None
    incumbent_key = None
    heap = []
    root = relax({})
    if root.status is LpStatus.OPTIMAL:
        heapq.heappush(heap, (tuple(-v for v in root.objectives), next(counter), {}, root))
    elif root.status is LpStatus.UNBOUNDED:
        raise RuntimeError("clearing relaxation is unbounded")

    while heap:
        key, _, fixings, outcome = heapq.heappop(heap)
        if incumbent_key is not None and key >= incumbent_key:
            # bound cannot beat the incumbent; nothing better remains
            break
        stats.nodes_explored += 1
        stats.best_bound_trace.append(outcome.objectives[0])
        fractional = [
            v for v in problem.binaries if outcome.values[v] not in (ZERO, ONE)
        ]
        if not fractional:
            incumbent, incumbent_key = outcome, key
            continue
        branch = min(fractional, key=order.__getitem__)
        for value in (ZERO, ONE):
            child_fix = {**fixings, branch: value}
            child = relax(child_fix)
            if child.status is not LpStatus.OPTIMAL:
                continue
            child_key = tuple(-v for v in child.objectives)
            if incumbent_key is not None and child_key >= incumbent_key:
                continue
            heapq.heappush(heap, (child_key, next(counter), child_fix, child))

    if incumbent is None:
        return ClearingResult(Status.INFEASIBLE, problem.variant), stats
    return _decode(problem, incumbent), stats


def _decode(problem: MilpProblem, outcome) -> ClearingResult:
    inst = problem.instance
    values = outcome.values
    mcp, acceptance, activation, bid_income = {}, {}, {}, {}
    for name, (role, entity) in problem.entity_map.items():
        if role == "mcp":
            mcp[entity] = values[name]
        elif role == "acceptance":
            acceptance[entity] = values[name]
        elif role == "income":
            bid_income[entity] = values[name]
        elif role == "activation":
            activation[entity] = int(values[name])
    order_income = {
        o.id: sum((bid_income[x.id] for x in o.hourly_bids), ZERO) for o in inst.mic_orders
    }
    partial = ClearingResult(
        Status.OPTIMAL, problem.variant, mcp, {}, acceptance, activation, bid_income,
        order_income, outcome.objective,
    )
    return replace(partial, mcp_interval=mcp_interval(inst, partial))


def mcp_interval(instance: MarketInstance, result: ClearingResult) -> dict:
    """Per-period closed MCP interval at the result's fixed acceptances and activations."""
    return {t: price_interval(instance, result, t) for t in instance.periods}


def clear(instance: MarketInstance, variant: Objective = Objective.HOURLY) -> ClearingResult:
    """Encode and solve in one step."""
    result, _ = solve_milp(encode(instance, variant))
    return result
