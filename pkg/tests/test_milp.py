from collections import Counter
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from micmarket import milp
from micmarket.lp import LinearProgram, Variable, Constraint, Relation, solve_lp
from micmarket.market import MarketInstance, MicOrder, Objective, Side, tsw_hourly
from micmarket.strategy import example_instance

from instances import curve_example, random_instance


def test_encoding_sizes():
    problem = milp.encode(example_instance(), Objective.HOURLY)
    roles = Counter(role for role, _ in problem.entity_map.values())
    assert roles == {"mcp": 2, "acceptance": 10, "income": 4, "activation": 2, "aux": 20}
    assert len(problem.binaries) == 22
    assert problem.variables_by_role("activation") == ["u[c1]", "u[c2]"]


def test_big_m_must_cover_prices():
    inst = example_instance()
    with pytest.raises(milp.BigMError):
        milp.encode(MarketInstance(2, inst.simple_bids, inst.mic_orders, F(9)), Objective.HOURLY)
    bounds = milp.compute_big_m(inst)
    assert set(bounds.mcp_upper.values()) == {F(10)}
    assert bounds.income_bound["S5"] == 20


def test_marginal_buyer_sets_price():
    res = milp.clear(curve_example())
    assert res.acceptance["D2"] == F(3, 7)
    assert res.mcp[1] == 5
    assert res.acceptance["S3"] == 0 and res.acceptance["D3"] == 0


@pytest.mark.parametrize("variant", list(Objective))
def test_larger_big_m_changes_nothing(variant):
    inst = example_instance(ft1=F(14))
    loose = MarketInstance(2, inst.simple_bids, inst.mic_orders, F(1000))
    a, b = milp.clear(inst, variant), milp.clear(loose, variant)
    assert (a.mcp, a.acceptance, a.activation, a.objective_value) == (
        b.mcp, b.acceptance, b.activation, b.objective_value)


def _welfare_lp(instance):
    """Welfare maximisation without any price constraints (simple bids only)."""
    bids = instance.simple_bids
    variables = tuple(Variable(b.id, F(0), F(1)) for b in bids)
    rows = tuple(
        Constraint({b.id: b.signed_quantity for b in bids if b.period == t}, Relation.EQ, F(0))
        for t in instance.periods
        if any(b.period == t for b in bids)
    )
    objective = {b.id: (1 if b.side is Side.DEMAND else -1) * b.quantity * b.price for b in bids}
    return solve_lp(LinearProgram(variables, rows, objective)).objective


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_without_mic_orders_prices_support_welfare_optimum(seed):
    inst = random_instance(seed, max_orders=0)
    res = milp.clear(inst)
    assert res.optimal
    assert res.objective_value == _welfare_lp(inst)


def _scaled(instance, k):
    simple = tuple(b.__class__(b.id, b.side, b.period, b.quantity, b.price * k) for b in instance.simple_bids)
    orders = tuple(
        MicOrder(o.id, o.fixed_term * k, o.variable_term * k,
                 tuple(h.__class__(h.id, h.order_id, h.period, h.quantity, h.price * k)
                       for h in o.hourly_bids))
        for o in instance.mic_orders
    )
    return MarketInstance(instance.period_count, simple, orders)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.sampled_from([F(3), F(1, 2)]),
       variant=st.sampled_from(list(Objective)))
def test_price_scaling_scales_the_clearing(seed, k, variant):
    inst = random_instance(seed)
    a, b = milp.clear(inst, variant), milp.clear(_scaled(inst, k), variant)
    assert a.status == b.status
    if a.optimal:
        assert b.objective_value == k * a.objective_value
        assert b.mcp == {t: k * v for t, v in a.mcp.items()}
        assert b.acceptance == a.acceptance and b.activation == a.activation


def test_intervals_contain_the_price():
    for variant in Objective:
        for ft in (10, 14):
            res = milp.clear(example_instance(ft1=F(ft)), variant)
            for t, (lo, hi) in res.mcp_interval.items():
                assert lo == res.mcp[t] <= hi


def test_branch_and_bound_is_reproducible():
    problem = milp.encode(example_instance(ft1=F(14)), Objective.HOURLY)
    (r1, s1), (r2, s2) = milp.solve_milp(problem), milp.solve_milp(problem)
    assert r1 == r2
    assert (s1.nodes_explored, s1.lp_solves, s1.best_bound_trace) == (
        s2.nodes_explored, s2.lp_solves, s2.best_bound_trace)
    # the bound trace never rises above the first relaxation
    assert max(s1.best_bound_trace) == s1.best_bound_trace[0]


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_a_clearing_always_exists(seed):
    # deactivating every MIC order leaves a simple market, which always clears
    inst = random_instance(seed)
    res = milp.clear(inst, Objective.MIC_COST)
    assert res.optimal
    assert tsw_hourly(inst, res) >= 0
