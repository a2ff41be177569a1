"""Exact rational linear programming in standard form.

    minimize c.x  subject to  A x = b,  x >= 0

The exact path is a two-phase revised simplex over :class:`fractions.Fraction`
with Bland's rule. The screened path asks HiGHS for a float vertex, rounds it
to nearby rationals, and keeps the result only if the rounded primal/dual pair
passes :func:`verify_solution` in exact arithmetic. When rounding fails (large
LPs have vertices with big denominators) the float support and tight columns
are used to recover the vertex and its duals by exact rational elimination.
Only if that also fails to verify does it fall back to the exact simplex.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from fractions import Fraction
from math import lcm
from typing import Iterator, Sequence

import numpy as np

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

ZERO = Fraction(0)

# Denominator limits tried, in order, when rounding a float vertex.
_ROUNDING_LADDER = (2**12, 2**20, 10**6, 2**32)


@dataclass
class LpProblem:
    """Standard-form LP with ``A`` stored as sparse columns ``{row: value}``."""

    columns: list[dict[int, Fraction]]
    b: list[Fraction]
    c: list[Fraction]

    def __post_init__(self):
        if len(self.columns) != len(self.c):
            raise ValueError(f"{len(self.columns)} columns but {len(self.c)} costs")
        m = len(self.b)
        for j, col in enumerate(self.columns):
            for i in col:
                if not 0 <= i < m:
                    raise ValueError(f"column {j} touches row {i} outside 0..{m - 1}")

    @property
    def m(self) -> int:
        return len(self.b)

    @property
    def n(self) -> int:
        return len(self.c)

    @classmethod
    def from_dense(cls, a: Sequence[Sequence], b: Sequence, c: Sequence) -> LpProblem:
        m = len(a)
        n = len(c)
        if any(len(row) != n for row in a):
            raise ValueError("ragged constraint matrix")
        if len(b) != m:
            raise ValueError("b length does not match A")
        cols = [{} for _ in range(n)]
        for i, row in enumerate(a):
            for j, v in enumerate(row):
                v = Fraction(v)
                if v:
                    cols[j][i] = v
        return cls(cols, [Fraction(x) for x in b], [Fraction(x) for x in c])

    @cached_property
    def integer_columns(self) -> tuple[int, list[list[tuple[int, int]]]]:
        """``(d, cols)`` with ``A[i, j] = cols[j] entry / d``, all integers."""
        d = lcm(*(v.denominator for col in self.columns for v in col.values()))
        cols = [[(i, v.numerator * (d // v.denominator)) for i, v in col.items()] for col in self.columns]
        return d, cols

    def dense(self) -> list[list[Fraction]]:
        out = [[ZERO] * self.n for _ in range(self.m)]
        for j, col in enumerate(self.columns):
            for i, v in col.items():
                out[i][j] = v
        return out

    def to_scipy(self):
        return self._scipy_form

    @cached_property
    def _scipy_form(self):
        from scipy.sparse import csc_matrix

        data, rows, indptr = [], [], [0]
        for col in self.columns:
            for i, v in sorted(col.items()):
                rows.append(i)
                data.append(float(v))
            indptr.append(len(rows))
        a = csc_matrix((data, rows, indptr), shape=(self.m, self.n))
        return a, np.array([float(x) for x in self.b]), np.array([float(x) for x in self.c])


@dataclass
class LpSolution:
    status: str
    x: list[Fraction] = field(default_factory=list)
    y: list[Fraction] = field(default_factory=list)
    objective: Fraction | None = None
    basis: tuple[int, ...] = ()
    method: str = "exact"
    iterations: int = 0


# --- exact revised simplex ---------------------------------------------------


class _RevisedSimplex:
    """Two-phase revised simplex with an explicit sparse basis inverse.

    Columns ``n .. n+m-1`` are artificials. Rows with negative ``b`` are
    negated on entry and their duals negated back on exit.
    """

    def __init__(self, problem: LpProblem):
        self.m = m = problem.m
        self.n = n = problem.n
        self.flip = [-1 if bi < 0 else 1 for bi in problem.b]
        self.b = [abs(bi) for bi in problem.b]
        self.cols: list[dict[int, Fraction]] = []
        for col in problem.columns:
            self.cols.append({i: (-v if self.flip[i] < 0 else v) for i, v in col.items() if v})
        for i in range(m):
            self.cols.append({i: Fraction(1)})
        self.c = list(problem.c)
        self.basis = [n + i for i in range(m)]
        self.position = {n + i: i for i in range(m)}
        self.binv: list[dict[int, Fraction]] = [{i: Fraction(1)} for i in range(m)]
        self.x_b = list(self.b)
        self.iterations = 0

    def duals(self, cost: list[Fraction]) -> list[Fraction]:
        y = [ZERO] * self.m
        for i, j in enumerate(self.basis):
            cb = cost[j]
            if cb:
                for r, v in self.binv[i].items():
                    y[r] += cb * v
        return y

    def reduced_cost(self, j: int, cost: list[Fraction], y: list[Fraction]) -> Fraction:
        return cost[j] - sum((y[r] * a for r, a in self.cols[j].items()), ZERO)

    def direction(self, j: int) -> list[Fraction]:
        col = self.cols[j]
        out = []
        for row in self.binv:
            s = ZERO
            for r, a in col.items():
                v = row.get(r)
                if v is not None:
                    s += v * a
            out.append(s)
        return out

    def pivot(self, r: int, q: int, w: list[Fraction]) -> None:
        piv = w[r]
        row_r = {k: v / piv for k, v in self.binv[r].items()}
        self.binv[r] = row_r
        self.x_b[r] /= piv
        xr = self.x_b[r]
        for i, f in enumerate(w):
            if i == r or not f:
                continue
            row_i = self.binv[i]
            for k, v in row_r.items():
                nv = row_i.get(k, ZERO) - f * v
                if nv:
                    row_i[k] = nv
                else:
                    row_i.pop(k, None)
            if xr:
                self.x_b[i] -= f * xr
        del self.position[self.basis[r]]
        self.basis[r] = q
        self.position[q] = r
        self.iterations += 1

    def run(self, cost: list[Fraction], limit: int) -> str:
        """Bland's rule: lowest-index entering column, lowest-index leaving variable."""
        while True:
            y = self.duals(cost)
            q = -1
            for j in range(limit):
                if j in self.position:
                    continue
                if self.reduced_cost(j, cost, y) < 0:
                    q = j
                    break
            if q < 0:
                return OPTIMAL
            w = self.direction(q)
            r = -1
            best = None
            for i, wi in enumerate(w):
                if wi > 0:
                    ratio = self.x_b[i] / wi
                    if best is None or ratio < best or (ratio == best and self.basis[i] < self.basis[r]):
                        best, r = ratio, i
            if r < 0:
                return UNBOUNDED
            self.pivot(r, q, w)

    def drive_out_artificials(self) -> None:
        """Pivot zero-level artificials out where possible; redundant rows keep theirs."""
        for r in range(self.m):
            if self.basis[r] < self.n:
                continue
            row = self.binv[r]
            for j in range(self.n):
                if j in self.position:
                    continue
                s = sum((row.get(i, ZERO) * a for i, a in self.cols[j].items()), ZERO)
                if s:
                    self.pivot(r, j, self.direction(j))
                    break

    def solve(self) -> LpSolution:
        m, n = self.m, self.n
        phase1 = [ZERO] * n + [Fraction(1)] * m
        self.run(phase1, n + m)
        infeasibility = sum((self.x_b[i] for i in range(m) if self.basis[i] >= n), ZERO)
        if infeasibility > 0:
            return LpSolution(INFEASIBLE, iterations=self.iterations)
        self.drive_out_artificials()
        phase2 = self.c + [ZERO] * m
        status = self.run(phase2, n)
        if status == UNBOUNDED:
            return LpSolution(UNBOUNDED, iterations=self.iterations)
        x = [ZERO] * n
        for i, j in enumerate(self.basis):
            if j < n:
                x[j] = self.x_b[i]
        y = self.duals(phase2)
        y = [yi * f for yi, f in zip(y, self.flip)]
        objective = sum((cj * xj for cj, xj in zip(self.c, x) if xj), ZERO)
        basis = tuple(sorted(j for j in self.basis if j < n))
        return LpSolution(OPTIMAL, x, y, objective, basis, "exact", self.iterations)


def solve_exact(problem: LpProblem) -> LpSolution:
    return _RevisedSimplex(problem).solve()


# --- float screen ------------------------------------------------------------


@dataclass
class FloatSolution:
    status: str
    x: np.ndarray | None
    y: np.ndarray | None
    objective: float | None


# Above this many columns dual simplex stalls on the degenerate lattice LPs; the
# interior point method with crossover still returns a basic point.
IPM_COLUMNS = 4000


def solve_float(problem: LpProblem) -> FloatSolution:
    """HiGHS solve; returns a vertex with its duals."""
    from scipy.optimize import linprog

    a, b, c = problem.to_scipy()
    method = "highs-ipm" if problem.n > IPM_COLUMNS else "highs-ds"
    res = linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method=method)
    if res.status == 2:
        return FloatSolution(INFEASIBLE, None, None, None)
    if res.status == 3:
        return FloatSolution(UNBOUNDED, None, None, None)
    if res.status != 0:
        return FloatSolution(f"error:{res.message}", None, None, None)
    return FloatSolution(OPTIMAL, np.asarray(res.x), np.asarray(res.eqlin.marginals), float(res.fun))


def rationalize(values: np.ndarray, max_den: int, tol: float = 1e-9) -> list[Fraction] | None:
    out = []
    for v in values.tolist():
        f = Fraction(v).limit_denominator(max_den)
        if abs(float(f) - v) > tol * max(1.0, abs(v)):
            return None
        out.append(f)
    return out


def round_float_solution(problem: LpProblem, fs: FloatSolution) -> LpSolution | None:
    """Exactly verified rational pair near a float vertex, or ``None``."""
    for max_den in _ROUNDING_LADDER:
        x = rationalize(fs.x, max_den)
        y = rationalize(fs.y, max_den)
        if x is None or y is None:
            continue
        objective = sum((cj * xj for cj, xj in zip(problem.c, x) if xj), ZERO)
        basis = tuple(j for j, xj in enumerate(x) if xj)
        sol = LpSolution(OPTIMAL, x, y, objective, basis, "screened")
        if verify_solution(problem, sol):
            return sol
    return None


def _integer_row(row: Sequence[Fraction]) -> list[int]:
    den = lcm(*(v.denominator for v in row))
    return [v.numerator * (den // v.denominator) for v in row]


def _solve_unique(rows: list[dict[int, Fraction]], rhs: list[Fraction], unknowns: int) -> list[Fraction] | None:
    """Exact solution of a sparse consistent system with a unique solution, or ``None``.

    Singleton rows fix a variable; a variable left in a single row is solved
    from that row afterwards. What remains goes through an exact reduced row
    echelon form.
    """
    rows = [dict(r) for r in rows]
    rhs = list(rhs)
    occurs: dict[int, set[int]] = {v: set() for v in range(unknowns)}
    for i, row in enumerate(rows):
        for v in row:
            occurs[v].add(i)
    active = set(range(len(rows)))
    value: dict[int, Fraction] = {}
    deferred: list[tuple[int, int]] = []

    def fix(var: int, val: Fraction) -> None:
        value[var] = val
        for i in occurs.pop(var):
            rhs[i] -= rows[i].pop(var) * val

    changed = True
    while changed:
        changed = False
        for i in sorted(active):
            if len(rows[i]) == 0:
                if rhs[i]:
                    return None
                active.discard(i)
            elif len(rows[i]) == 1:
                (var, a), = rows[i].items()
                active.discard(i)
                occurs[var].discard(i)
                fix(var, rhs[i] / a)
                rows[i].clear()
                changed = True
        for var in sorted(occurs):
            live = occurs[var] & active
            if len(live) == 1:
                (i,) = live
                active.discard(i)
                for other in rows[i]:
                    if other != var:
                        occurs[other].discard(i)
                del occurs[var]
                deferred.append((var, i))
                changed = True

    core_vars = sorted(occurs)
    if any(not (occurs[v] & active) for v in core_vars):
        return None  # a variable no remaining equation constrains
    core_rows = sorted(active)
    if core_vars:
        import flint

        pos = {v: c for c, v in enumerate(core_vars)}
        dense = []
        for i in core_rows:
            row = [ZERO] * (len(core_vars) + 1)
            for v, a in rows[i].items():
                row[pos[v]] = a
            row[-1] = rhs[i]
            dense.append(_integer_row(row))
        red, rank = flint.fmpq_mat(flint.fmpz_mat(dense)).rref()
        if rank != len(core_vars):
            return None  # rank deficient, or inconsistent (pivot in the rhs column)
        for c, v in enumerate(core_vars):
            if red[c, c] != 1:
                return None
            x = red[c, len(core_vars)]
            value[v] = Fraction(int(x.p), int(x.q))
    elif core_rows:
        return None

    for var, i in reversed(deferred):
        row = rows[i]
        rest = sum((a * value[v] for v, a in row.items() if v != var), ZERO)
        value[var] = (rhs[i] - rest) / row[var]
    if len(value) != unknowns:
        return None
    return [value[v] for v in range(unknowns)]


def crossover(problem: LpProblem, fs: FloatSolution, tol: float = 1e-9) -> LpSolution | None:
    """Exact vertex and duals from the float support and the tight columns."""
    support = [j for j in range(problem.n) if fs.x[j] > tol]
    rows: list[dict[int, Fraction]] = [{} for _ in range(problem.m)]
    for local, j in enumerate(support):
        for i, v in problem.columns[j].items():
            rows[i][local] = v
    xs = _solve_unique(rows, problem.b, len(support))
    if xs is None:
        return None
    x = [ZERO] * problem.n
    for j, v in zip(support, xs):
        x[j] = v
    a, _, c = problem.to_scipy()
    reduced = c - a.T @ fs.y
    tight = [j for j in range(problem.n) if abs(reduced[j]) <= tol]
    y = _solve_unique([problem.columns[j] for j in tight], [problem.c[j] for j in tight], problem.m)
    if y is None:
        return None
    objective = sum((cj * xj for cj, xj in zip(problem.c, x) if xj), ZERO)
    sol = LpSolution(OPTIMAL, x, y, objective, tuple(support), "crossover")
    return sol if verify_solution(problem, sol) else None


def solve(problem: LpProblem, method: str = "exact") -> LpSolution:
    """Solve exactly. ``method="screen"`` tries a verified float vertex first."""
    if method == "exact":
        return solve_exact(problem)
    if method != "screen":
        raise ValueError(f"unknown method {method!r}")
    fs = solve_float(problem)
    if fs.status == OPTIMAL:
        sol = round_float_solution(problem, fs) or crossover(problem, fs)
        if sol is not None:
            return sol
        log.info("float vertex could not be certified; solving exactly")
    else:
        log.info("float screen reported %s; confirming exactly", fs.status)
    return solve_exact(problem)


# --- verification ------------------------------------------------------------


def _scaled(values: Sequence[Fraction]) -> tuple[int, list[int]]:
    """Common denominator and the integer numerators over it."""
    den = lcm(*(v.denominator for v in values)) if values else 1
    return den, [v.numerator * (den // v.denominator) for v in values]


def _violations(problem: LpProblem, sol: LpSolution) -> Iterator[str]:
    if sol.status != OPTIMAL:
        yield f"status is {sol.status}"
        return
    if len(sol.x) != problem.n or len(sol.y) != problem.m:
        raise ValueError("solution dimensions do not match the problem")
    for j, xj in enumerate(sol.x):
        if xj < 0:
            yield f"x[{j}] < 0"
    # A = A_int / da, x = X / dx, y = Y / dy, all checks in integers
    da, cols = problem.integer_columns
    dx, big_x = _scaled(sol.x)
    dy, big_y = _scaled(sol.y)
    ax = [0] * problem.m
    for col, xj in zip(cols, big_x):
        if xj:
            for i, a in col:
                ax[i] += a * xj
    for i, (lhs, rhs) in enumerate(zip(ax, problem.b)):
        if lhs * rhs.denominator != rhs.numerator * da * dx:
            yield f"row {i}: A x = {Fraction(lhs, da * dx)} != {rhs}"
    for j, (col, cj, xj) in enumerate(zip(cols, problem.c, big_x)):
        ay = sum(a * big_y[i] for i, a in col)
        # slack * da * dy * den(c) = num(c) * da * dy - den(c) * ay
        slack = cj.numerator * da * dy - cj.denominator * ay
        if slack < 0:
            yield f"column {j}: dual infeasible by {Fraction(-slack, da * dy * cj.denominator)}"
        elif slack and xj:
            yield f"column {j}: complementary slackness broken"
    primal = sum((cj * xj for cj, xj in zip(problem.c, sol.x) if xj and cj), ZERO)
    dual = sum((bi * yi for bi, yi in zip(problem.b, sol.y) if bi and yi), ZERO)
    if primal != dual:
        yield f"duality gap: {primal} vs {dual}"
    if sol.objective is not None and sol.objective != primal:
        yield f"reported objective {sol.objective} != c.x = {primal}"


def solution_violations(problem: LpProblem, sol: LpSolution) -> list[str]:
    """Every broken optimality condition of ``sol``, recomputed from scratch."""
    return list(_violations(problem, sol))


def verify_solution(problem: LpProblem, sol: LpSolution) -> bool:
    return next(_violations(problem, sol), None) is None
