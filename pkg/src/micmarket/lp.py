"""Exact linear programming over bounded variables.

Bounded-variable primal simplex on a sparse dictionary tableau, with
Bland's smallest-index rule for both the entering and the leaving choice.
Arithmetic is exact: inputs and outputs are :class:`fractions.Fraction`
and the tableau itself runs on ``gmpy2.mpq`` when gmpy2 is importable, so
optimal points satisfy their constraints with exact equality.

Besides the primary objective a program may carry a tuple of secondary
objectives, optimised lexicographically after it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

__all__ = [
    "Relation",
    "LpStatus",
    "Variable",
    "Constraint",
    "LinearProgram",
    "LpOutcome",
    "MalformedProgramError",
    "solve_lp",
]

try:
    from gmpy2 import mpq as _exact
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    _exact = Fraction

ZERO = Fraction(0)
_ZERO = _exact(0)


def _to_fraction(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(int(x.numerator), int(x.denominator))


class Relation(str, enum.Enum):
    LE = "<="
    EQ = "=="
    GE = ">="


class LpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"


class MalformedProgramError(ValueError):
    """Raised before solving when the program violates its structural invariants."""


@dataclass(frozen=True)
class Variable:
    """A decision variable; ``None`` bounds stand for minus/plus infinity."""

    name: str
    lower: Optional[Fraction] = ZERO
    upper: Optional[Fraction] = None


@dataclass(frozen=True)
class Constraint:
    coeffs: Mapping[str, Fraction]
    relation: Relation
    rhs: Fraction
    name: str = ""


@dataclass(frozen=True)
class LinearProgram:
    """Maximise ``objective`` (then each of ``tiebreak`` in order) subject to
    the constraints and variable bounds."""

    variables: Sequence[Variable]
    constraints: Sequence[Constraint]
    objective: Mapping[str, Fraction]
    tiebreak: Sequence[Mapping[str, Fraction]] = ()

    def check(self) -> None:
        names = set()
        for v in self.variables:
            if v.name in names:
                raise MalformedProgramError(f"duplicate variable {v.name!r}")
            names.add(v.name)
            if v.lower is not None and v.upper is not None and v.lower > v.upper:
                raise MalformedProgramError(
                    f"variable {v.name!r} has lower bound {v.lower} above upper bound {v.upper}"
                )
        for k, con in enumerate(self.constraints):
            if not isinstance(con.relation, Relation):
                raise MalformedProgramError(f"constraint {con.name or k}: unknown relation")
            for var in con.coeffs:
                if var not in names:
                    raise MalformedProgramError(
                        f"constraint {con.name or k} references undeclared variable {var!r}"
                    )
        for k, obj in enumerate((self.objective, *self.tiebreak)):
            for var in obj:
                if var not in names:
                    raise MalformedProgramError(
                        f"objective {k} references undeclared variable {var!r}"
                    )


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    values: dict = field(default_factory=dict)
    objective: Optional[Fraction] = None
    # primary objective followed by every tie-break objective
    objectives: tuple = ()
    pivots: int = 0


class _Tableau:
    """Dictionary form ``x_B[r] + sum_j rows[r][j] * x_j = const`` over nonbasic ``j``."""

    def __init__(self, lower, upper, rows, basis, values):
        self.lower = lower
        self.upper = upper
        self.rows = rows
        self.basis = basis
        self.values = values
        self.basic = set(basis)
        self.pivots = 0

    def reduced_costs(self, objective: dict) -> dict:
        """Coefficients of ``z = const + sum_j rc[j] * x_j`` over nonbasic ``j``."""
        rc = {j: c for j, c in objective.items() if j not in self.basic}
        for r, b in enumerate(self.basis):
            cb = objective.get(b)
            if not cb:
                continue
            for j, a in self.rows[r].items():
                v = rc.get(j, _ZERO) - cb * a
                if v:
                    rc[j] = v
                else:
                    rc.pop(j, None)
        return rc

    def optimise(self, objectives: list, max_pivots: int) -> LpStatus:
        """Lexicographic maximisation, one objective at a time.

        Once an objective is optimal, every nonbasic variable with a
        nonzero reduced cost is frozen at its bound; later objectives only
        pivot on columns whose earlier reduced costs vanish, which leaves
        the earlier objective values untouched.
        """
        frozen = set()
        for objective in objectives:
            if not objective:
                continue
            rc = self.reduced_costs(objective)
            status = self._optimise_one(rc, frozen, max_pivots)
            if status is not LpStatus.OPTIMAL:
                return status
            frozen.update(j for j, c in rc.items() if c)
        return LpStatus.OPTIMAL

    def _optimise_one(self, rc: dict, frozen: set, max_pivots: int) -> LpStatus:
        lower, upper, values = self.lower, self.upper, self.values
        while True:
            # Bland: smallest-index nonbasic variable with an improving direction
            entering = None
            direction = 0
            for j in sorted(rc):
                if j in frozen:
                    continue
                c = rc[j]
                if c > 0 and (upper[j] is None or values[j] < upper[j]):
                    entering, direction = j, 1
                    break
                if c < 0 and (lower[j] is None or values[j] > lower[j]):
                    entering, direction = j, -1
                    break
            if entering is None:
                return LpStatus.OPTIMAL
            if self.pivots >= max_pivots:
                raise RuntimeError("simplex pivot limit exceeded")

            j = entering
            # ratio test; ties broken by smallest variable index
            best_step = None
            best_var = None
            best_row = None
            if direction > 0 and upper[j] is not None:
                best_step, best_var = upper[j] - values[j], j
            elif direction < 0 and lower[j] is not None:
                best_step, best_var = values[j] - lower[j], j
            column = []
            for r, row in enumerate(self.rows):
                a = row.get(j)
                if not a:
                    continue
                column.append((r, a))
                b = self.basis[r]
                # d x_b / d step = -a * direction
                rate = -a * direction
                if rate > 0:
                    if upper[b] is None:
                        continue
                    step = (upper[b] - values[b]) / rate
                else:
                    if lower[b] is None:
                        continue
                    step = (values[b] - lower[b]) / -rate
                if (
                    best_step is None
                    or step < best_step
                    or (step == best_step and b < best_var)
                ):
                    best_step, best_var, best_row = step, b, r
            if best_step is None:
                return LpStatus.UNBOUNDED

            if best_step:
                delta = best_step * direction
                values[j] += delta
                for r, a in column:
                    values[self.basis[r]] -= a * delta
            self.pivots += 1
            if best_var == j:
                # bound flip, basis unchanged
                continue
            self._pivot(best_row, j, column, rc)

    def _pivot(self, r: int, j: int, column: list, rc: dict) -> None:
        row = self.rows[r]
        leaving = self.basis[r]
        a = row.pop(j)
        inv = 1 / a
        new_row = {k: v * inv for k, v in row.items()}
        new_row[leaving] = inv
        self.rows[r] = new_row
        self.basis[r] = j
        self.basic.discard(leaving)
        self.basic.add(j)
        for other, _ in column:
            if other == r:
                continue
            orow = self.rows[other]
            f = orow.pop(j)
            for k, v in new_row.items():
                w = orow.get(k, _ZERO) - f * v
                if w:
                    orow[k] = w
                else:
                    orow.pop(k, None)
        # z = ... + rc_j x_j, with x_j = const - new_row . x_N
        f = rc.pop(j, None)
        if f:
            for k, v in new_row.items():
                w = rc.get(k, _ZERO) - f * v
                if w:
                    rc[k] = w
                else:
                    rc.pop(k, None)


def _initial_value(lo, hi):
    if lo is not None:
        return lo
    if hi is not None:
        return hi
    return _ZERO


def _violation(activity, relation, rhs):
    if relation is Relation.LE:
        return max(activity - rhs, _ZERO)
    if relation is Relation.GE:
        return max(rhs - activity, _ZERO)
    return abs(activity - rhs)


def _crash(lp, index, fixed, lower, upper, values) -> None:
    """Move box-bounded variables to the bound that lowers total infeasibility.

    One deterministic pass in variable order; it only picks the starting
    nonbasic values and so cuts phase-one work without changing the program.
    """
    X = _exact
    cons = []
    touching = {}
    for k, con in enumerate(lp.constraints):
        coeffs = {index[v]: X(c) for v, c in con.coeffs.items() if c}
        rhs = X(con.rhs)
        activity = sum((c * values[i] for i, c in coeffs.items()), _ZERO)
        cons.append([coeffs, con.relation, rhs, activity])
        for i in coeffs:
            touching.setdefault(i, []).append(k)
    for i in range(len(values)):
        if i in fixed or lower[i] is None or upper[i] is None or i not in touching:
            continue
        step = upper[i] - values[i]
        before = after = _ZERO
        for k in touching[i]:
            coeffs, rel, rhs, act = cons[k]
            before += _violation(act, rel, rhs)
            after += _violation(act + coeffs[i] * step, rel, rhs)
        if after < before:
            values[i] = upper[i]
            for k in touching[i]:
                cons[k][3] += cons[k][0][i] * step


def solve_lp(lp: LinearProgram, max_pivots: int = 100_000) -> LpOutcome:
    """Solve ``lp`` exactly.

    Presolve only fixes variables whose bounds coincide and drops
    constraints left without coefficients.  The result is deterministic:
    the same program always ends at the same vertex.
    """
    lp.check()
    X = _exact
    names = [v.name for v in lp.variables]
    index = {n: i for i, n in enumerate(names)}
    n = len(names)
    lower = [None if v.lower is None else X(v.lower) for v in lp.variables]
    upper = [None if v.upper is None else X(v.upper) for v in lp.variables]
    fixed = {i for i in range(n) if lower[i] is not None and lower[i] == upper[i]}

    values = [_initial_value(lower[i], upper[i]) for i in range(n)]
    _crash(lp, index, fixed, lower, upper, values)

    rows = []
    basis = []
    phase1 = {}
    for con in lp.constraints:
        coeffs = {}
        rhs = X(con.rhs)
        for name, c in con.coeffs.items():
            if not c:
                continue
            c = X(c)
            i = index[name]
            if i in fixed:
                rhs -= c * lower[i]
            else:
                coeffs[i] = coeffs.get(i, _ZERO) + c
        coeffs = {i: c for i, c in coeffs.items() if c}
        if not coeffs:
            ok = {
                Relation.LE: _ZERO <= rhs,
                Relation.EQ: _ZERO == rhs,
                Relation.GE: _ZERO >= rhs,
            }[con.relation]
            if not ok:
                return LpOutcome(LpStatus.INFEASIBLE)
            continue
        # slack s = rhs - a.x
        s = len(values)
        s_lo = _ZERO if con.relation in (Relation.LE, Relation.EQ) else None
        s_hi = _ZERO if con.relation in (Relation.GE, Relation.EQ) else None
        lower.append(s_lo)
        upper.append(s_hi)
        activity = sum((c * values[i] for i, c in coeffs.items()), _ZERO)
        s_val = rhs - activity
        if (s_lo is not None and s_val < s_lo) or (s_hi is not None and s_val > s_hi):
            # slack parked at the violated bound; an artificial absorbs the residual
            bound = s_lo if s_lo is not None and s_val < s_lo else s_hi
            values.append(bound)
            residual = s_val - bound
            sign = 1 if residual > 0 else -1
            art = len(values)
            lower.append(_ZERO)
            upper.append(None)
            values.append(abs(residual))
            row = {i: c * sign for i, c in coeffs.items()}
            row[s] = X(sign)
            rows.append(row)
            basis.append(art)
            phase1[art] = X(-1)
        else:
            values.append(s_val)
            rows.append(coeffs)
            basis.append(s)

    tab = _Tableau(lower, upper, rows, basis, values)
    if phase1:
        tab.optimise([phase1], max_pivots)
        if any(values[a] for a in phase1):
            return LpOutcome(LpStatus.INFEASIBLE, pivots=tab.pivots)
        for a in phase1:
            upper[a] = _ZERO

    objectives = []
    for obj in (lp.objective, *lp.tiebreak):
        objectives.append(
            {index[k]: X(c) for k, c in obj.items() if c and index[k] not in fixed}
        )
    status = tab.optimise(objectives, max_pivots)
    if status is LpStatus.UNBOUNDED:
        return LpOutcome(LpStatus.UNBOUNDED, pivots=tab.pivots)

    result = {name: _to_fraction(values[i]) for i, name in enumerate(names)}
    objs = tuple(
        sum((Fraction(c) * result[k] for k, c in obj.items()), ZERO)
        for obj in (lp.objective, *lp.tiebreak)
    )
    return LpOutcome(LpStatus.OPTIMAL, result, objs[0], objs, tab.pivots)
