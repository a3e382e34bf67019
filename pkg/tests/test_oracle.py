from fractions import Fraction as F

import pytest

from micmarket import oracle
from micmarket.market import MarketInstance, MicHourlyBid, MicOrder, Objective, SimpleBid, Side
from micmarket.strategy import example_instance

from instances import random_instance


CASES = [
    (F(10), F(1), Objective.HOURLY, {"c1": 1, "c2": 1}, F(70)),
    (F(14), F(1), Objective.HOURLY, {"c1": 1, "c2": 0}, F(64)),
    (F(14), F(1), Objective.MIC_COST, {"c1": 0, "c2": 1}, F(50)),
    (F(10), F(11, 2), Objective.MIC_COST, {"c1": 0, "c2": 1}, F(50)),
]


@pytest.mark.parametrize("ft1, price, variant, activation, value", CASES)
def test_example_market(ft1, price, variant, activation, value):
    res, stats = oracle.enumerate_clearings_with_stats(example_instance(ft1, price), variant)
    assert res.activation == activation
    assert res.objective_value == value
    assert 0 < stats.lp_solves <= stats.bound == 4 * 12 * 12


@pytest.mark.parametrize("seed", range(40))
def test_agrees_with_milp(seed):
    report = oracle.oracle_check(random_instance(seed + 1000))
    assert report.ok, report


def test_forcing_both_orders_on_is_infeasible():
    inst = example_instance(mic1_price=F(11, 2))
    forced = oracle.clear_with_activation(inst, Objective.MIC_COST, {"c1": 1, "c2": 1})
    assert not forced.optimal
    single = oracle.clear_with_activation(inst, Objective.MIC_COST, {"c1": 1, "c2": 0})
    assert single.objective_value == 50 and single.mcp == {1: 6, 2: 6}
    with pytest.raises(ValueError):
        oracle.clear_with_activation(inst, Objective.MIC_COST, {"c1": 1})


def test_optimal_activations():
    assert oracle.optimal_activations(example_instance(), Objective.HOURLY) == [(1, 1)]
    repriced = example_instance(mic1_price=F(11, 2))
    assert oracle.optimal_activations(repriced, Objective.MIC_COST) == [(0, 1), (1, 0)]


def test_guard_rails():
    many = tuple(
        MicOrder(f"o{k}", F(1), F(0), (MicHourlyBid(f"h{k}", f"o{k}", 1, F(1), F(1)),))
        for k in range(13)
    )
    with pytest.raises(oracle.OracleLimitError):
        oracle.enumerate_clearings(MarketInstance(1, (), many))
    prices = tuple(SimpleBid(f"s{k}", Side.SUPPLY, 1, F(1), F(k)) for k in range(21))
    with pytest.raises(oracle.OracleLimitError):
        oracle.enumerate_clearings(MarketInstance(1, prices))


def test_report_on_example_market():
    report = oracle.oracle_check(example_instance())
    assert len(report.deltas) == 4
    assert set(report.deltas.values()) == {0}
    assert report.ok
