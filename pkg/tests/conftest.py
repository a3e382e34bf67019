"""Every optimal clearing produced during a test is checked afterwards."""

import pytest

from micmarket import market, milp, oracle

_produced = []


def _record(fn, pick):
    def wrapper(*args, **kwargs):
        out = fn(*args, **kwargs)
        instance, variant, result = pick(args, kwargs, out)
        _produced.append((instance, variant, result))
        return out

    wrapper.__wrapped__ = fn
    return wrapper


def _milp_pick(args, kwargs, out):
    problem = args[0] if args else kwargs["problem"]
    return problem.instance, problem.variant, out[0]


def _oracle_pick(args, kwargs, out):
    instance = args[0] if args else kwargs["instance"]
    variant = args[1] if len(args) > 1 else kwargs.get("variant", market.Objective.HOURLY)
    return instance, variant, out[0]


milp.solve_milp = _record(milp.solve_milp, _milp_pick)
oracle.enumerate_clearings_with_stats = _record(oracle.enumerate_clearings_with_stats, _oracle_pick)

CHECKED = {"results": 0}
ACCEPTANCE_LINES = []


@pytest.fixture(autouse=True)
def verify_every_result():
    start = len(_produced)
    yield
    for instance, variant, result in _produced[start:]:
        if not result.optimal:
            continue
        problems = market.verify_clearing(instance, result, variant)
        assert not problems, f"solver produced an invalid clearing: {problems}"
        cs, ps = market.surpluses(instance, result)
        assert cs + ps == market.tsw_hourly(instance, result)
        CHECKED["results"] += 1


@pytest.fixture
def acceptance_line():
    def emit(number, passed, detail):
        line = f"CRITERION {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
    terminalreporter.write_line(f"optimal clearings verified after their tests: {CHECKED['results']}")
