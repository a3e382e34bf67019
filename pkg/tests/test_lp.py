import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from micmarket.lp import (
    Constraint,
    LinearProgram,
    LpStatus,
    MalformedProgramError,
    Relation,
    Variable,
    solve_lp,
)

LE, GE, EQ = Relation.LE, Relation.GE, Relation.EQ


def test_single_variable_box():
    lp = LinearProgram((Variable("x", F(0), F(3)),), (), {"x": F(2)})
    out = solve_lp(lp)
    assert out.status is LpStatus.OPTIMAL
    assert out.values["x"] == 3 and out.objective == 6


def test_marginal_buyer_gets_fraction():
    # welfare maximisation over the one-period step curves
    sellers = {"S1": (2, 1), "S2": (4, 2), "S3": (3, 8)}
    buyers = {"D1": (3, 10), "D2": (7, 5), "D3": (2, 3)}
    variables = tuple(Variable(k, F(0), F(1)) for k in [*sellers, *buyers])
    balance = {k: F(q) for k, (q, _) in sellers.items()}
    balance.update({k: F(-q) for k, (q, _) in buyers.items()})
    objective = {k: F(-q * p) for k, (q, p) in sellers.items()}
    objective.update({k: F(q * p) for k, (q, p) in buyers.items()})
    out = solve_lp(LinearProgram(variables, (Constraint(balance, EQ, F(0)),), objective))
    assert out.values["D2"] == F(3, 7)
    assert out.values["S1"] == out.values["S2"] == 1 and out.values["S3"] == 0
    assert out.objective == 30 + 15 - 2 - 8


def test_infeasible_and_unbounded():
    x = Variable("x", F(0), F(1))
    infeasible = LinearProgram((x,), (Constraint({"x": F(1)}, GE, F(2)),), {"x": F(1)})
    assert solve_lp(infeasible).status is LpStatus.INFEASIBLE
    free = LinearProgram((Variable("y", F(0), None),), (), {"y": F(1)})
    assert solve_lp(free).status is LpStatus.UNBOUNDED


def test_malformed_programs_rejected():
    with pytest.raises(MalformedProgramError):
        solve_lp(LinearProgram((Variable("x", F(2), F(1)),), (), {}))
    with pytest.raises(MalformedProgramError):
        solve_lp(LinearProgram((Variable("x"),), (Constraint({"z": F(1)}, LE, F(0)),), {}))
    with pytest.raises(MalformedProgramError):
        solve_lp(LinearProgram((Variable("x"), Variable("x")), (), {}))


def test_lexicographic_tiebreak():
    # x + y <= 1 ties on the primary objective; the tie-break prefers y
    lp = LinearProgram(
        (Variable("x", F(0), F(1)), Variable("y", F(0), F(1))),
        (Constraint({"x": F(1), "y": F(1)}, LE, F(1)),),
        {"x": F(1), "y": F(1)},
        ({"y": F(1)},),
    )
    out = solve_lp(lp)
    assert out.values == {"x": 0, "y": 1}
    assert out.objectives == (1, 1)


def test_free_and_negative_bounds():
    lp = LinearProgram(
        (Variable("x", None, None), Variable("y", F(-5), F(-1))),
        (Constraint({"x": F(1), "y": F(-1)}, LE, F(2)), Constraint({"x": F(1)}, GE, F(-10))),
        {"x": F(1), "y": F(2)},
    )
    out = solve_lp(lp)
    assert out.values == {"x": F(1), "y": F(-1)}


def _solve_square(rows, rhs):
    n = len(rows)
    m = [list(r) + [b] for r, b in zip(rows, rhs)]
    for c in range(n):
        pivot = next((r for r in range(c, n) if m[r][c] != 0), None)
        if pivot is None:
            return None
        m[c], m[pivot] = m[pivot], m[c]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c] / m[c][c]
                m[r] = [a - f * b for a, b in zip(m[r], m[c])]
    return [m[i][n] / m[i][i] for i in range(n)]


def _vertex_optimum(a, b, c, upper):
    """Best vertex of {0 <= x <= upper, A x <= b} by brute force."""
    n = len(c)
    planes = [(row, rhs) for row, rhs in zip(a, b)]
    for j in range(n):
        unit = [F(int(k == j)) for k in range(n)]
        planes += [(unit, F(0)), (unit, upper)]
    best = None
    for combo in itertools.combinations(planes, n):
        x = _solve_square([p[0] for p in combo], [p[1] for p in combo])
        if x is None:
            continue
        if any(v < 0 or v > upper for v in x):
            continue
        if any(sum(r * v for r, v in zip(row, x)) > rhs for row, rhs in zip(a, b)):
            continue
        value = sum(ci * v for ci, v in zip(c, x))
        best = value if best is None else max(best, value)
    return best


small = st.integers(-4, 4).map(F)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 3),
    m=st.integers(1, 3),
    data=st.data(),
)
def test_matches_vertex_enumeration(n, m, data):
    a = [[data.draw(small) for _ in range(n)] for _ in range(m)]
    b = [data.draw(st.integers(-2, 6).map(F)) for _ in range(m)]
    c = [data.draw(small) for _ in range(n)]
    upper = F(3)
    names = [f"x{j}" for j in range(n)]
    lp = LinearProgram(
        tuple(Variable(v, F(0), upper) for v in names),
        tuple(Constraint(dict(zip(names, row)), LE, rhs) for row, rhs in zip(a, b)),
        dict(zip(names, c)),
    )
    out = solve_lp(lp)
    expected = _vertex_optimum(a, b, c, upper)
    if expected is None:
        assert out.status is LpStatus.INFEASIBLE
    else:
        assert out.status is LpStatus.OPTIMAL
        assert out.objective == expected


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 4), m=st.integers(1, 4), data=st.data())
def test_primal_and_dual_optima_agree(n, m, data):
    # max c x, A x <= b, 0 <= x <= 1  against  min b y + 1 w, A'y + w >= c, y, w >= 0
    a = [[data.draw(small) for _ in range(n)] for _ in range(m)]
    b = [data.draw(st.integers(0, 6).map(F)) for _ in range(m)]
    c = [data.draw(small) for _ in range(n)]
    xs = [f"x{j}" for j in range(n)]
    primal = LinearProgram(
        tuple(Variable(v, F(0), F(1)) for v in xs),
        tuple(Constraint(dict(zip(xs, row)), LE, rhs) for row, rhs in zip(a, b)),
        dict(zip(xs, c)),
    )
    ys, ws = [f"y{i}" for i in range(m)], [f"w{j}" for j in range(n)]
    dual_rows = []
    for j in range(n):
        coeffs = {ys[i]: a[i][j] for i in range(m)}
        coeffs[ws[j]] = F(1)
        dual_rows.append(Constraint(coeffs, GE, c[j]))
    dual_obj = {y: -bi for y, bi in zip(ys, b)}
    dual_obj.update({w: F(-1) for w in ws})
    dual = LinearProgram(tuple(Variable(v) for v in ys + ws), tuple(dual_rows), dual_obj)
    p, d = solve_lp(primal), solve_lp(dual)
    assert p.status is LpStatus.OPTIMAL and d.status is LpStatus.OPTIMAL
    assert p.objective == -d.objective


def test_repeat_solves_are_identical():
    lp = LinearProgram(
        tuple(Variable(f"x{j}", F(0), F(2)) for j in range(4)),
        (
            Constraint({"x0": F(1), "x1": F(1), "x2": F(1)}, LE, F(3)),
            Constraint({"x1": F(1), "x3": F(2)}, EQ, F(2)),
        ),
        {"x0": F(1), "x1": F(1), "x2": F(1), "x3": F(1)},
    )
    first, second = solve_lp(lp), solve_lp(lp)
    assert first == second
