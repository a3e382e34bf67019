"""Independent clearing by enumeration of activations and price regimes.

Once the activation vector and the position of every MCP relative to
the participating bid prices are fixed, each acceptance is either forced
to 0 or 1 or (for bids priced exactly at the MCP) free in ``[0, 1]``,
and every income becomes linear.  What remains is a small LP.  The
oracle walks all these regimes, solves each residual LP over the closure
of the regime and keeps the best clearing under the same canonical
ordering the MILP uses.  It shares nothing with the MILP encoding apart
from the LP solver and the domain model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .lp import Constraint, LinearProgram, LpStatus, Relation, Variable, solve_lp
from .market import (
    ONE,
    ZERO,
    ClearingResult,
    MarketInstance,
    Objective,
    Side,
    Status,
    bid_income,
    canonical_vector,
    price_interval,
    validate_instance,
    verify_clearing,
    welfare,
)

__all__ = [
    "OracleLimitError",
    "OracleStats",
    "OracleReport",
    "regime_bound",
    "enumerate_clearings",
    "enumerate_clearings_with_stats",
    "clear_with_activation",
    "optimal_activations",
    "oracle_check",
]

MAX_ORDERS = 12
MAX_PRICES = 20


class OracleLimitError(ValueError):
    """The instance is too large for exhaustive enumeration."""


@dataclass
class OracleStats:
    lp_solves: int = 0
    regimes_skipped: int = 0
    bound: int = 0


@dataclass(frozen=True)
class _Regime:
    lo: Fraction
    hi: Fraction

    @property
    def point(self) -> bool:
        return self.lo == self.hi


def _upper(instance: MarketInstance) -> Fraction:
    top = instance.max_price()
    if instance.mcp_upper_bound is None:
        return top
    if instance.mcp_upper_bound < top:
        raise ValueError(f"MCP upper bound {instance.mcp_upper_bound} is below bid price {top}")
    return Fraction(instance.mcp_upper_bound)


def _distinct_prices(bids) -> list:
    return sorted({b.price for b in bids})


def regime_bound(instance: MarketInstance) -> int:
    """Upper bound on residual LPs: ``2^C`` times ``2k_t + 2`` per period."""
    total = 2 ** len(instance.mic_orders)
    for t in instance.periods:
        total *= 2 * len(_distinct_prices(instance.bids_in_period(t))) + 2
    return total


def _regimes(prices: Sequence[Fraction], upper: Fraction) -> list:
    if not prices:
        return [_Regime(ZERO, upper)]
    out = []
    if prices[0] > 0:
        out.append(_Regime(ZERO, prices[0]))
    for k, p in enumerate(prices):
        out.append(_Regime(p, p))
        nxt = prices[k + 1] if k + 1 < len(prices) else upper
        if nxt > p:
            out.append(_Regime(p, nxt))
    return out


def _status(bid, regime: _Regime):
    """1 or 0 for a forced acceptance, None for a free one."""
    p = bid.price
    if regime.point and p == regime.lo:
        return None
    below = p <= regime.lo  # price strictly below every MCP of the open regime
    if bid.side is Side.SUPPLY:
        return ONE if below else ZERO
    return ZERO if below else ONE


def _period_feasible(bids, status) -> bool:
    forced = ZERO
    free_supply = free_demand = ZERO
    for b in bids:
        s = status[b.id]
        sign = 1 if b.side is Side.SUPPLY else -1
        if s is None:
            if sign > 0:
                free_supply += b.quantity
            else:
                free_demand += b.quantity
        else:
            forced += sign * s * b.quantity
    return -free_supply <= forced <= free_demand


class _Search:
    def __init__(self, instance: MarketInstance, variant: Objective):
        problems = validate_instance(instance)
        if problems:
            raise ValueError("invalid instance: " + "; ".join(map(str, problems)))
        if len(instance.mic_orders) > MAX_ORDERS:
            raise OracleLimitError(f"{len(instance.mic_orders)} MIC orders exceed {MAX_ORDERS}")
        for t in instance.periods:
            k = len(_distinct_prices(instance.bids_in_period(t)))
            if k > MAX_PRICES:
                raise OracleLimitError(f"period {t} has {k} distinct prices, limit {MAX_PRICES}")
        self.instance = instance
        self.variant = variant
        self.upper = _upper(instance)
        self.stats = OracleStats(bound=regime_bound(instance))

    def participating(self, activation: dict, t: int) -> list:
        return [
            b for b in self.instance.bids_in_period(t)
            if not hasattr(b, "order_id") or activation[b.order_id]
        ]

    def branches(self, activation: dict):
        """Yield (status map, regimes) for every balance-feasible regime combination."""
        per_period = []
        for t in self.instance.periods:
            bids = self.participating(activation, t)
            options = []
            for regime in _regimes(_distinct_prices(bids), self.upper):
                status = {b.id: _status(b, regime) for b in bids}
                if _period_feasible(bids, status):
                    options.append((regime, status))
                else:
                    self.stats.regimes_skipped += 1
            per_period.append(options)
        for combo in itertools.product(*per_period):
            status = {}
            for _, s in combo:
                status.update(s)
            for order in self.instance.mic_orders:
                if not activation[order.id]:
                    for b in order.hourly_bids:
                        status[b.id] = ZERO
            yield status, {t: combo[k][0] for k, t in enumerate(self.instance.periods)}

    def residual(self, activation: dict, status: dict, regimes: dict, extra=()):
        """The LP left once acceptances outside the free set are fixed."""
        inst = self.instance
        variables = [Variable(f"p{t}", regimes[t].lo, regimes[t].hi) for t in inst.periods]
        free = [b for b in inst.all_bids() if status[b.id] is None]
        variables += [Variable(b.id, ZERO, ONE) for b in free]
        constraints = []
        for t in inst.periods:
            coeffs, rhs = {}, ZERO
            for b in inst.bids_in_period(t):
                sign = 1 if b.side is Side.SUPPLY else -1
                if status[b.id] is None:
                    coeffs[b.id] = sign * b.quantity
                else:
                    rhs -= sign * status[b.id] * b.quantity
            if coeffs:
                constraints.append(Constraint(coeffs, Relation.EQ, rhs))
            elif rhs != 0:
                return None
        for order in inst.mic_orders:
            if not activation[order.id]:
                continue
            vt = order.variable_term
            coeffs, rhs = {}, order.fixed_term
            for b in order.hourly_bids:
                s = status[b.id]
                if s is None:
                    coeffs[b.id] = b.quantity * (b.price - vt)
                elif s == 1:
                    key = f"p{b.period}"
                    coeffs[key] = coeffs.get(key, ZERO) + b.quantity
                    rhs += vt * b.quantity
            coeffs = {k: v for k, v in coeffs.items() if v}
            if coeffs:
                constraints.append(Constraint(coeffs, Relation.GE, rhs))
            elif rhs > 0:
                return None
        objective = {}
        for b in free:
            if hasattr(b, "order_id"):
                cost = b.price if self.variant is Objective.HOURLY else inst.order(b.order_id).variable_term
                objective[b.id] = -b.quantity * cost
            elif b.side is Side.DEMAND:
                objective[b.id] = b.quantity * b.price
            else:
                objective[b.id] = -b.quantity * b.price
        objective = {k: v for k, v in objective.items() if v}
        volume = {b.id: b.quantity for b in free if b.side is Side.SUPPLY}
        tiebreak = [volume] + [{f"p{t}": -ONE} for t in inst.periods]
        tiebreak += [{b.id: ONE} for b in free]
        constraints.extend(extra)
        return LinearProgram(tuple(variables), tuple(constraints), objective, tuple(tiebreak))

    def solve(self, lp: LinearProgram):
        self.stats.lp_solves += 1
        return solve_lp(lp)

    def decode(self, activation: dict, status: dict, values: dict) -> ClearingResult:
        inst = self.instance
        mcp = {t: values[f"p{t}"] for t in inst.periods}
        acceptance = {
            b.id: values[b.id] if status[b.id] is None else status[b.id] for b in inst.all_bids()
        }
        incomes = {b.id: bid_income(b, acceptance[b.id], mcp[b.period]) for b in inst.mic_bids()}
        order_income = {
            o.id: sum((incomes[b.id] for b in o.hourly_bids), ZERO) for o in inst.mic_orders
        }
        result = ClearingResult(
            Status.OPTIMAL, self.variant, mcp, {}, acceptance, dict(activation), incomes,
            order_income,
        )
        return replace(
            result,
            objective_value=welfare(inst, result, self.variant),
            mcp_interval={t: price_interval(inst, result, t) for t in inst.periods},
        )


def _vectors(instance: MarketInstance):
    ids = [o.id for o in instance.mic_orders]
    for bits in itertools.product((0, 1), repeat=len(ids)):
        yield dict(zip(ids, bits))


def _actual(instance: MarketInstance, result: ClearingResult) -> ClearingResult:
    activation = {
        o.id: int(any(result.acceptance[b.id] > 0 for b in o.hourly_bids))
        for o in instance.mic_orders
    }
    if activation == dict(result.activation):
        return result
    moved = replace(result, activation=activation)
    return replace(
        moved,
        objective_value=welfare(instance, moved, result.objective_variant),
        mcp_interval={t: price_interval(instance, moved, t) for t in instance.periods},
    )


def _run(instance, variant, vectors, keep_forced: bool):
    search = _Search(instance, variant)
    best, best_key = None, None
    for activation in vectors:
        for status, regimes in search.branches(activation):
            lp = search.residual(activation, status, regimes)
            if lp is None:
                continue
            outcome = search.solve(lp)
            if outcome.status is not LpStatus.OPTIMAL:
                continue
            result = search.decode(activation, status, outcome.values)
            if not keep_forced:
                result = _actual(instance, result)
            key = canonical_vector(instance, result, variant)
            if best_key is None or key > best_key:
                best, best_key = result, key
    if search.stats.lp_solves > search.stats.bound:
        raise AssertionError("regime enumeration exceeded its own bound")
    if best is None:
        best = ClearingResult(Status.INFEASIBLE, variant)
    return best, search.stats


def enumerate_clearings_with_stats(
    instance: MarketInstance, variant: Objective = Objective.HOURLY
) -> tuple:
    """Canonical optimal clearing plus the enumeration statistics."""
    return _run(instance, variant, _vectors(instance), keep_forced=False)


def enumerate_clearings(
    instance: MarketInstance, variant: Objective = Objective.HOURLY
) -> ClearingResult:
    """Canonical optimal clearing found by exhaustive regime enumeration."""
    return enumerate_clearings_with_stats(instance, variant)[0]


def clear_with_activation(
    instance: MarketInstance, variant: Objective, activation: dict
) -> ClearingResult:
    """Best clearing with the activation vector imposed.

    An imposed activation still allows an order to end up with nothing
    accepted; its bids are then bound by the active-order rules anyway.
    """
    missing = {o.id for o in instance.mic_orders} - set(activation)
    if missing:
        raise ValueError(f"activation missing for orders {sorted(missing)}")
    vector = {o.id: int(activation[o.id]) for o in instance.mic_orders}
    return _run(instance, variant, [vector], keep_forced=True)[0]


def optimal_activations(instance: MarketInstance, variant: Objective) -> list:
    """Every activation vector that attains the optimal objective exactly.

    A vector qualifies when some regime reaches the optimum with every
    order it activates accepting a positive volume.  Vectors come back as
    tuples of 0/1 in order-list order, sorted.
    """
    best = enumerate_clearings(instance, variant)
    if not best.optimal:
        return []
    target = best.objective_value
    search = _Search(instance, variant)
    found = []
    for activation in _vectors(instance):
        if _attains(search, activation, target):
            found.append(tuple(activation[o.id] for o in instance.mic_orders))
    return sorted(found)


def _attains(search: _Search, activation: dict, target: Fraction) -> bool:
    inst = search.instance
    for status, regimes in search.branches(activation):
        lp = search.residual(activation, status, regimes)
        if lp is None:
            continue
        outcome = search.solve(lp)
        if outcome.status is not LpStatus.OPTIMAL:
            continue
        result = search.decode(activation, status, outcome.values)
        if welfare(inst, result, search.variant) != target:
            continue
        primary = Constraint(dict(lp.objective), Relation.GE, outcome.objectives[0])
        ok = True
        for order in inst.mic_orders:
            if not activation[order.id]:
                continue
            if any(status[b.id] == 1 for b in order.hourly_bids):
                continue
            free = {b.id: b.quantity for b in order.hourly_bids if status[b.id] is None}
            if not free:
                ok = False
                break
            probe = replace(lp, constraints=lp.constraints + (primary,), objective=free, tiebreak=())
            check = search.solve(probe)
            if check.status is not LpStatus.OPTIMAL or check.objective <= 0:
                ok = False
                break
        if ok:
            return True
    return False


@dataclass
class OracleReport:
    """Side-by-side comparison of the MILP and the oracle on one instance.

    ``deltas`` holds, per variant, the MILP minus oracle difference of the
    optimised objective and of the other accounting evaluated on each
    solution.
    """

    deltas: dict = field(default_factory=dict)
    identical: dict = field(default_factory=dict)
    violations: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return (
            all(d == 0 for d in self.deltas.values())
            and all(self.identical.values())
            and not any(self.violations.values())
        )


def oracle_check(instance: MarketInstance, milp_clear=None) -> OracleReport:
    """Run the MILP and the oracle under both variants and compare."""
    if milp_clear is None:
        from .milp import clear as milp_clear
    report = OracleReport()
    for variant in Objective:
        other = Objective.MIC_COST if variant is Objective.HOURLY else Objective.HOURLY
        a = milp_clear(instance, variant)
        b = enumerate_clearings(instance, variant)
        name = variant.value
        if a.optimal != b.optimal:
            report.identical[name] = False
            continue
        if not a.optimal:
            report.identical[name] = True
            continue
        report.deltas[(name, "objective")] = a.objective_value - b.objective_value
        report.deltas[(name, other.value)] = welfare(instance, a, other) - welfare(instance, b, other)
        report.identical[name] = a.canonical_key() == b.canonical_key()
        report.violations[name] = [
            *map(str, verify_clearing(instance, a, variant)),
            *map(str, verify_clearing(instance, b, variant)),
        ]
    return report
