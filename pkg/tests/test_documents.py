import json
from fractions import Fraction as F

import jsonschema
import pytest
from hypothesis import given, settings, strategies as st

from micmarket import milp
from micmarket.documents import (
    BidSetError,
    ValidationFailed,
    emit_curves,
    emit_result,
    format_rational,
    parse_bidset,
    parse_result_csv,
    schema,
    serialize_bidset,
    shipped_bidset,
)
from micmarket.market import ClearingResult, MarketInstance, Objective, Status
from micmarket.strategy import example_instance

from instances import random_instance

MINIMAL = """{
  "schema_version": 1,
  "period_count": 1,
  "simple_bids": [
    {"id": "S", "side": "supply", "period": 1, "quantity": "2", "price": "3/7"},
    {"id": "D", "side": "demand", "period": 1, "quantity": 1, "price": "5.5"}
  ]
}"""


def test_shipped_bid_sets():
    assert shipped_bidset("table1") == example_instance()
    assert shipped_bidset("table2") == example_instance(mic1_price=F(11, 2))


def test_shipped_files_follow_the_schema():
    for name in ("table1", "table2"):
        doc = json.loads(serialize_bidset(shipped_bidset(name)))
        jsonschema.validate(doc, schema())


def test_exact_numbers():
    inst = parse_bidset(MINIMAL)
    assert inst.simple_bids[0].price == F(3, 7)
    assert inst.simple_bids[1].price == F(11, 2)
    assert inst.simple_bids[1].quantity == 1


@pytest.mark.parametrize("edit, fragment", [
    (lambda d: d["simple_bids"][0].update(side="buy"), "simple_bids[0].side"),
    (lambda d: d["simple_bids"][1].pop("price"), "simple_bids[1]: missing field 'price'"),
    (lambda d: d["simple_bids"][0].update(quantity="two"), "simple_bids[0].quantity"),
    (lambda d: d.update(schema_version=2), "schema_version"),
    (lambda d: d.update(extra=1), "unknown field 'extra'"),
])
def test_parse_errors_name_the_field(edit, fragment):
    doc = json.loads(MINIMAL)
    edit(doc)
    with pytest.raises(BidSetError, match=fragment.replace("[", r"\[").replace("]", r"\]")):
        parse_bidset(json.dumps(doc))


def test_floats_are_rejected():
    with pytest.raises(BidSetError, match="price.*floating-point"):
        parse_bidset(MINIMAL.replace('"5.5"', "5.5"))


def test_syntax_error_reports_line():
    with pytest.raises(BidSetError, match="line 5, column"):
        parse_bidset(MINIMAL.replace('"supply",', '"supply"'))


def test_validation_errors_pass_through():
    with pytest.raises(ValidationFailed, match="period"):
        parse_bidset(MINIMAL.replace('"period": 1, "quantity": 1', '"period": 2, "quantity": 1'))


def test_rational_text():
    assert format_rational(F(11, 2)) == "5.5"
    assert format_rational(F(3, 7)) == "3/7"
    assert format_rational(F(-4)) == "-4"
    assert format_rational(F(1, 40)) == "0.025"


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 100_000), upper=st.booleans())
def test_round_trip(seed, upper):
    inst = random_instance(seed)
    if upper:
        inst = MarketInstance(inst.period_count, inst.simple_bids, inst.mic_orders, F(21, 2))
    inst = inst.replace_order(inst.mic_orders[0].id, true_fixed_term=F(1, 3)) if inst.mic_orders else inst
    assert parse_bidset(serialize_bidset(inst)) == inst


def test_human_report_of_truthful_case():
    inst = example_instance()
    text = emit_result(milp.clear(inst), inst, "human")
    assert "1       5 (~5.000000)" in text
    assert "S1     supply  1  2       5       1/2 (~0.500000)" in text
    assert "c1     1       20      18      2       2" in text


def test_infeasible_report_is_one_line():
    res = ClearingResult(Status.INFEASIBLE, Objective.HOURLY)
    assert emit_result(res, example_instance(), "human") == "status: Infeasible\n"
    assert json.loads(emit_result(res, example_instance(), "json"))["status"] == "Infeasible"


def test_csv_reparses():
    inst = example_instance(ft1=F(14))
    res = milp.clear(inst)
    rows = parse_result_csv(emit_result(res, inst, "csv"))
    assert rows[("status", "")] == "Optimal"
    assert rows[("mcp", "1")] == 6
    for bid_id, y in res.acceptance.items():
        assert rows[("acceptance", bid_id)] == y
    assert rows[("order_income", "c1")] == 24


def test_json_report_fields():
    inst = example_instance()
    doc = json.loads(emit_result(milp.clear(inst), inst, "json"))
    assert doc["acceptance"]["S1"] == {"exact": "1/2", "decimal": "0.500000"}
    assert doc["real_profit"]["c1"]["exact"] == "2"
    with pytest.raises(ValueError):
        emit_result(milp.clear(inst), inst, "xml")


def test_curves_csv():
    inst = example_instance(ft1=F(14))
    text = emit_curves(inst, 1, milp.clear(inst))
    assert "S7" not in text
    lines = emit_curves(example_instance(), 1).splitlines()
    assert lines[0] == "series,cumulative_quantity,price,bid_id"
    assert [l.split(",")[1] for l in lines[1:] if l.startswith("supply")] == ["2", "4", "6", "8"]
    empty = MarketInstance(2, example_instance().simple_bids[:2])
    assert emit_curves(empty, 2) == "series,cumulative_quantity,price,bid_id\n"
