"""PPT distinguishability of lattice-state sets as exact linear programs.

Two programs are built independently for a set ``K = {v_1 < ... < v_k}`` on
``N = 4**t`` lattice labels:

* the measurement LP: choose ``p_j >= 0`` with ``sum_j p_j = 1`` and every
  ``P p_j >= 0``; maximise ``(1/k) sum_j p_j[v_j]``;
* the standard-form dual (variables alpha, beta, r_j, q_j) whose feasible
  point ``y = sum_j e_{v_j}, q = 0`` has value 1.

Both optima equal the optimal PPT success probability; the set is
PPT-distinguishable exactly when it is 1.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

from . import lp as lpmod
from .lattice import StateSet, index_from_string, sign_matrix
from .rational import RationalMatrix, format_fraction

ZERO = Fraction(0)
ONE = Fraction(1)


# --- certificates ------------------------------------------------------------


@dataclass(frozen=True)
class PovmCertificate:
    """Diagonal PPT measurement ``p_1..p_k`` (one vector per state)."""

    t: int
    members: tuple[int, ...]
    vectors: tuple[tuple[Fraction, ...], ...]

    @property
    def value(self) -> Fraction:
        k = len(self.members)
        return sum((p[v] for p, v in zip(self.vectors, self.members)), ZERO) / k

    kind = "povm"


@dataclass(frozen=True)
class DualCertificate:
    """Dual feasible point ``(y, q_1..q_k)``; ``value = (1/k) sum(y)`` bounds alpha."""

    t: int
    members: tuple[int, ...]
    y: tuple[Fraction, ...]
    q: tuple[tuple[Fraction, ...], ...]
    value: Fraction

    kind = "dual"


Certificate = Union[PovmCertificate, DualCertificate]


def _labels(t: int, members) -> list[str]:
    return [str(v) for v in StateSet(t, tuple(members)).indices]


def certificate_to_json(cert: Certificate) -> dict:
    if isinstance(cert, PovmCertificate):
        vectors = cert.vectors
        value = cert.value
    else:
        vectors = (cert.y,) + cert.q
        value = cert.value
    return {
        "type": cert.kind,
        "t": cert.t,
        "set": _labels(cert.t, cert.members),
        "value": format_fraction(value),
        "vectors": [[format_fraction(x) for x in vec] for vec in vectors],
    }


def certificate_from_json(data: dict) -> Certificate:
    t = int(data["t"])
    members = tuple(index_from_string(s).linear for s in data["set"])
    vectors = tuple(tuple(Fraction(x) for x in vec) for vec in data["vectors"])
    if data["type"] == "povm":
        return PovmCertificate(t, members, vectors)
    if data["type"] == "dual":
        return DualCertificate(t, members, vectors[0], vectors[1:], Fraction(data["value"]))
    raise ValueError(f"unknown certificate type {data['type']!r}")


def certificate_digest(cert: Certificate) -> str:
    blob = json.dumps(certificate_to_json(cert), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


# --- exact feasibility checks --------------------------------------------------


def _apply_signs(t: int, vec) -> list[Fraction]:
    """``2**t * P @ vec`` computed from the sign rule, in integers over a common denominator."""
    den, ints = lpmod._scaled(list(vec))
    nz = [(u, x) for u, x in enumerate(ints) if x]
    signs = sign_matrix(t)
    out = []
    for w in range(4**t):
        row = signs[w]
        out.append(Fraction(sum(x if row[u] > 0 else -x for u, x in nz), den))
    return out


def measurement_value(s: StateSet, vectors) -> Fraction | None:
    """Success probability of a diagonal PPT measurement, or ``None`` if it is
    not a valid one (negative entry, not summing to identity, or not PPT)."""
    n = 4**s.t
    if len(vectors) != s.k or any(len(p) != n for p in vectors):
        raise ValueError("measurement dimensions do not match the set")
    for u in range(n):
        if sum((p[u] for p in vectors), ZERO) != 1:
            return None
    for p in vectors:
        if any(x < 0 for x in p):
            return None
        if any(x < 0 for x in _apply_signs(s.t, p)):
            return None
    return sum((p[v] for p, v in zip(vectors, s.members)), ZERO) / s.k


def dual_value(s: StateSet, y, q) -> Fraction | None:
    """``(1/k) sum(y)`` if ``(y, q)`` is dual feasible, else ``None``."""
    n = 4**s.t
    scale = Fraction(1, 2**s.t)
    if len(y) != n or len(q) != s.k or any(len(qj) != n for qj in q):
        raise ValueError("dual dimensions do not match the set")
    for qj, v in zip(q, s.members):
        if any(x < 0 for x in qj):
            return None
        pq = _apply_signs(s.t, qj)
        for u in range(n):
            if y[u] - (1 if u == v else 0) - scale * pq[u] < 0:
                return None
    return sum(y, ZERO) / s.k


def verify_certificate(s: StateSet, cert: Certificate) -> bool:
    """True iff ``cert`` proves its verdict: a perfect PPT measurement, or a
    dual point with value below 1."""
    if cert.t != s.t or tuple(cert.members) != s.members:
        raise ValueError("certificate does not belong to this set")
    if isinstance(cert, PovmCertificate):
        return measurement_value(s, cert.vectors) == 1 and all(
            p[v] == 1 for p, v in zip(cert.vectors, s.members)
        )
    value = dual_value(s, cert.y, cert.q)
    return value is not None and value == cert.value and value < 1


def trivial_dual(s: StateSet) -> DualCertificate:
    """The value-1 dual point ``y = sum_j e_{v_j}``, ``q = 0``."""
    n = 4**s.t
    y = tuple(ONE if u in s.members else ZERO for u in range(n))
    q = tuple(tuple([ZERO] * n) for _ in s.members)
    return DualCertificate(s.t, s.members, y, q, ONE)


# --- linear programs -------------------------------------------------------------


def measurement_lp(s: StateSet) -> lpmod.LpProblem:
    """Measurement LP in standard form (minimising ``-alpha``).

    Columns: ``p_j[u]`` at ``j*N + u`` then slacks ``s_j[w]`` at ``k*N + j*N + w``.
    Rows: ``sum_j p_j[u] = 1`` at ``u``; ``(2**t P p_j)[w] - s_j[w] = 0`` at
    ``N + j*N + w``. The PPT rows use the integer sign matrix ``2**t P``.
    """
    t, k = s.t, s.k
    n = 4**t
    signs = sign_matrix(t)
    plus, minus = Fraction(1), Fraction(-1)
    sign_cols = [
        {w: (plus if signs[w, u] > 0 else minus) for w in range(n)} for u in range(n)
    ]
    columns = []
    for j in range(k):
        base = n + j * n
        for u in range(n):
            col = {u: plus}
            for w, a in sign_cols[u].items():
                col[base + w] = a
            columns.append(col)
    for j in range(k):
        base = n + j * n
        columns.extend({base + w: minus} for w in range(n))
    b = [ONE] * n + [ZERO] * (k * n)
    c = [ZERO] * (2 * k * n)
    for j, v in enumerate(s.members):
        c[j * n + v] = Fraction(-1, k)
    return lpmod.LpProblem(columns, b, c)


def dual_std_lp(s: StateSet) -> lpmod.LpProblem:
    """Standard-form dual program with the transition matrix entries ``+-2**-t``.

    Variable layout: ``alpha`` (N), ``beta`` (N), ``r_1..r_k`` (N each),
    ``q_1..q_k`` (N each). Row ``(j, u)``: ``alpha_u - beta_u - r_j[u] -
    (P q_j)[u] = [u == v_j]``. Cost ``(1/k)(sum alpha - sum beta)``.
    """
    t, k = s.t, s.k
    n = 4**t
    signs = sign_matrix(t)
    one, neg = Fraction(1), Fraction(-1)
    plus, minus = Fraction(-1, 2**t), Fraction(1, 2**t)  # entries of -P
    columns = []
    columns += [{j * n + u: one for j in range(k)} for u in range(n)]
    columns += [{j * n + u: neg for j in range(k)} for u in range(n)]
    columns += [{j * n + u: neg} for j in range(k) for u in range(n)]
    for j in range(k):
        for w in range(n):
            columns.append({j * n + u: (plus if signs[u, w] > 0 else minus) for u in range(n)})
    b = [ONE if u == v else ZERO for v in s.members for u in range(n)]
    c = [Fraction(1, k)] * n + [Fraction(-1, k)] * n + [ZERO] * (2 * k * n)
    return lpmod.LpProblem(columns, b, c)


def dual_std_data(s: StateSet) -> tuple[RationalMatrix, list[Fraction], list[Fraction]]:
    t, k = s.t, s.k
    n = 4**t
    p_int = sign_matrix(t).astype(np.int64)
    eye = np.eye(n, dtype=np.int64)
    zero = np.zeros((n, n), dtype=np.int64)
    scale = 2**t
    rows = []
    for j in range(k):
        row = [scale * eye, -scale * eye]
        row += [(-scale * eye if i == j else zero) for i in range(k)]
        row += [(-p_int if i == j else zero) for i in range(k)]
        rows.append(row)
    a = RationalMatrix(np.block(rows), scale)
    b = []
    for v in s.members:
        b.extend(ONE if u == v else ZERO for u in range(n))
    c = [Fraction(1, k)] * n + [Fraction(-1, k)] * n + [ZERO] * (2 * k * n)
    return a, b, c


def program4_lp(s: StateSet) -> lpmod.LpProblem:
    """Tightened bound: minimise ``(1/k) sum y`` with ``y >= P e_{v_j}`` for all j.

    ``y`` is free, split as ``y+ - y-``; slacks ``s_j``.
    """
    t, k = s.t, s.k
    n = 4**t
    signs = sign_matrix(t)
    mag = Fraction(1, 2**t)
    columns = []
    columns += [{j * n + u: ONE for j in range(k)} for u in range(n)]
    columns += [{j * n + u: -ONE for j in range(k)} for u in range(n)]
    columns += [{j * n + u: -ONE} for j in range(k) for u in range(n)]
    b = [mag * int(signs[u, v]) for v in s.members for u in range(n)]
    c = [Fraction(1, k)] * n + [Fraction(-1, k)] * n + [ZERO] * (k * n)
    return lpmod.LpProblem(columns, b, c)


# --- alpha -------------------------------------------------------------------------


@dataclass
class AlphaResult:
    set: StateSet
    alpha: Fraction
    distinguishable: bool
    certificate: Certificate
    method: str
    measurement: PovmCertificate
    dual: DualCertificate
    dual_std_value: Fraction | None = None

    @property
    def primal_value(self) -> Fraction:
        return self.measurement.value

    @property
    def dual_value(self) -> Fraction:
        return self.dual.value


class CertificateError(RuntimeError):
    """An LP result failed exact re-verification."""


def extract_certificates(s: StateSet, sol: lpmod.LpSolution) -> tuple[PovmCertificate, DualCertificate]:
    """Measurement and dual point from an optimal measurement-LP solution.

    With row duals ``y`` (sum rows) and ``z_j`` (PPT rows) the dual point is
    ``Y = -k y`` and ``q_j = k 2**t z_j``.
    """
    t, k = s.t, s.k
    n = 4**t
    p = tuple(tuple(sol.x[j * n:(j + 1) * n]) for j in range(k))
    big_y = tuple(-k * yi for yi in sol.y[:n])
    factor = k * 2**t
    q = tuple(tuple(factor * z for z in sol.y[n + j * n:n + (j + 1) * n]) for j in range(k))
    value = sum(big_y, ZERO) / k
    return PovmCertificate(t, s.members, p), DualCertificate(t, s.members, big_y, q, value)


def _solve_method(mode: str) -> str:
    if mode in ("exact",):
        return "exact"
    if mode in ("screen", "float-screen-then-exact"):
        return "screen"
    raise ValueError(f"unknown mode {mode!r}")


def alpha(s: StateSet, mode: str = "screen", cross_check: bool = False) -> AlphaResult:
    """Exact optimal PPT success probability with a verified certificate.

    ``cross_check`` also solves the standard-form dual LP and requires the same
    optimum.
    """
    method = _solve_method(mode)
    problem = measurement_lp(s)
    sol = lpmod.solve(problem, method)
    if sol.status != lpmod.OPTIMAL:
        raise CertificateError(f"measurement LP reported {sol.status}")
    povm, dual = extract_certificates(s, sol)
    primal = measurement_value(s, povm.vectors)
    bound = dual_value(s, dual.y, dual.q)
    if primal is None or bound is None or primal != bound or bound != dual.value:
        raise CertificateError(f"certificates do not close: primal={primal} dual={bound}")
    distinguishable = primal == 1
    cert: Certificate = povm if distinguishable else dual
    if not verify_certificate(s, cert):
        raise CertificateError("certificate rejected on re-verification")
    result = AlphaResult(s, primal, distinguishable, cert, "exact-lp", povm, dual)
    if cross_check:
        std = lpmod.solve(dual_std_lp(s), method)
        if std.status != lpmod.OPTIMAL or std.objective != primal:
            raise CertificateError(f"standard-form dual optimum {std.objective} != {primal}")
        result.dual_std_value = std.objective
    return result


def beta_prime(s: StateSet) -> Fraction:
    """Closed form of the tightened bound: ``(1/k) sum_u max_j P[u, v_j]``."""
    signs = sign_matrix(s.t)[:, list(s.members)]
    positives = int(np.count_nonzero(signs.max(axis=1) > 0))
    n = 4**s.t
    return Fraction(positives - (n - positives), s.k * 2**s.t)


def beta_prime_lp(s: StateSet, mode: str = "exact") -> Fraction:
    sol = lpmod.solve(program4_lp(s), _solve_method(mode))
    if sol.status != lpmod.OPTIMAL:
        raise CertificateError(f"bound LP reported {sol.status}")
    return sol.objective


# --- standard-form tableau -------------------------------------------------------


@dataclass
class StandardFormTableau:
    """Standard-form data around the basis that carries the value-1 feasible point."""

    set: StateSet
    a: RationalMatrix
    b: list[Fraction]
    c: list[Fraction]
    basis: list[int]
    nonbasis: list[int]
    blocks: dict[str, list[int]]
    m: RationalMatrix
    m_inv: RationalMatrix
    b_prime: list[Fraction]
    n_prime: RationalMatrix

    @property
    def z0(self) -> Fraction:
        return sum((self.c[j] * bp for j, bp in zip(self.basis, self.b_prime)), ZERO)

    def rank(self) -> int:
        """Rank of A; equals the row count once ``M M^-1 = I`` holds."""
        if not self.inverse_ok():
            raise ValueError("basis matrix is not invertible")
        return self.a.rows

    def inverse_ok(self) -> bool:
        return self.m @ self.m_inv == RationalMatrix.identity(self.m.rows)

    def expected_b_prime(self) -> list[Fraction]:
        s = self.set
        n = 4**s.t
        out = [ONE] * s.k
        for j, vj in enumerate(s.members):
            out += [ONE if (u in s.members) else ZERO for u in range(n) if u != vj]
        return out

    def reduced_costs(self) -> list[Fraction]:
        """``c_n + sum_m c_m N'_{mn}`` for every nonbasic column, in ``nonbasis`` order."""
        c_m = [self.c[j] for j in self.basis]
        out = []
        for col, j in enumerate(self.nonbasis):
            s = self.c[j]
            for row, cm in enumerate(c_m):
                if cm:
                    s += cm * self.n_prime[row, col]
            out.append(s)
        return out


def _var_index(s: StateSet):
    n = 4**s.t
    k = s.k
    return {
        "alpha": lambda u: u,
        "beta": lambda u: n + u,
        "r": lambda j, u: 2 * n + j * n + u,
        "q": lambda j, u: (2 + k) * n + j * n + u,
    }


def build_tableau(s: StateSet) -> StandardFormTableau:
    t, k = s.t, s.k
    n = 4**t
    idx = _var_index(s)
    a, b, c = dual_std_data(s)

    basis = [idx["alpha"](v) for v in s.members]
    for j, vj in enumerate(s.members):
        basis += [idx["r"](j, u) for u in range(n) if u != vj]

    blocks = {
        "alpha_hat": [idx["alpha"](u) for u in range(n) if u not in s.members],
        "r_K": [idx["r"](j, vj) for j, vj in enumerate(s.members)],
        "beta_K": [idx["beta"](u) for u in s.members],
        "beta_hat": [idx["beta"](u) for u in range(n) if u not in s.members],
    }
    for j in range(k):
        blocks[f"q{j + 1}"] = [idx["q"](j, u) for u in range(n)]
    nonbasis = blocks["alpha_hat"] + blocks["r_K"] + [idx["beta"](u) for u in range(n)]
    for j in range(k):
        nonbasis += blocks[f"q{j + 1}"]

    m_mat = RationalMatrix(a.num[:, basis], a.den)
    n_mat = RationalMatrix(a.num[:, nonbasis], a.den)

    # Closed-form inverse: alpha rows pick row (j, v_j); r_j[u] rows are
    # -e_(j,u) plus e_(l,v_l) whenever u = v_l for another state l.
    inv = np.zeros((k * n, k * n), dtype=np.int64)
    for j, vj in enumerate(s.members):
        inv[j, j * n + vj] = 1
    row = k
    pos = {v: l for l, v in enumerate(s.members)}
    for i, vi in enumerate(s.members):
        for u in range(n):
            if u == vi:
                continue
            inv[row, i * n + u] = -1
            l = pos.get(u)
            if l is not None and l != i:
                inv[row, l * n + u] += 1
            row += 1
    m_inv = RationalMatrix(inv)

    b_col = RationalMatrix.from_fractions([[x] for x in b])
    b_prime_mat = m_inv @ b_col
    b_prime = [b_prime_mat[i, 0] for i in range(k * n)]
    n_prime = -(m_inv @ n_mat)
    return StandardFormTableau(s, a, b, c, basis, nonbasis, blocks, m_mat, m_inv, b_prime, n_prime)


@dataclass
class ReducedCostReport:
    """Reduced costs grouped by block, scaled by ``k`` (so the value-1 entries read as 1)."""

    set: StateSet
    blocks: dict[str, list[Fraction]]
    checks: dict[str, bool] = field(default_factory=dict)
    z0: Fraction = ONE
    inverse_ok: bool = True

    @property
    def passed(self) -> bool:
        return all(self.checks.values()) and self.z0 == 1 and self.inverse_ok

    def to_json(self) -> dict:
        return {
            "set": str(self.set),
            "z0": format_fraction(self.z0),
            "inverse_ok": self.inverse_ok,
            "passed": self.passed,
            "checks": self.checks,
            "blocks": {name: [format_fraction(x) for x in vals] for name, vals in self.blocks.items()},
        }


def reduced_costs(s: StateSet, tableau: StandardFormTableau | None = None) -> ReducedCostReport:
    tab = tableau or build_tableau(s)
    t, k = s.t, s.k
    n = 4**t
    sigma = dict(zip(tab.nonbasis, tab.reduced_costs()))
    blocks = {name: [k * sigma[j] for j in cols] for name, cols in tab.blocks.items()}
    mag = Fraction(1, 2**t)
    signs = sign_matrix(t)

    checks = {
        "alpha_hat == 1": all(x == 1 for x in blocks["alpha_hat"]),
        "r_K == 1": all(x == 1 for x in blocks["r_K"]),
        "beta_K == 0": all(x == 0 for x in blocks["beta_K"]),
        "beta_hat == -1": all(x == -1 for x in blocks["beta_hat"]),
    }
    for j, vj in enumerate(s.members):
        row = [mag * int(signs[vj, u]) for u in range(n)]
        checks[f"q{j + 1} == P row {tab.set.indices[j]}"] = blocks[f"q{j + 1}"] == row

    # N' on the rows r_j[u], u outside K: I | 0 | 0 | -I | -P on q_j, 0 elsewhere.
    basis_pos = {var: i for i, var in enumerate(tab.basis)}
    col_pos = {var: i for i, var in enumerate(tab.nonbasis)}
    idx = _var_index(s)
    outside = [u for u in range(n) if u not in s.members]
    pattern_ok = True
    for j in range(k):
        for u in outside:
            r = basis_pos[idx["r"](j, u)]
            for w in outside:
                want = ONE if w == u else ZERO
                pattern_ok &= tab.n_prime[r, col_pos[idx["alpha"](w)]] == want
                pattern_ok &= tab.n_prime[r, col_pos[idx["beta"](w)]] == -want
            for v in s.members:
                pattern_ok &= tab.n_prime[r, col_pos[idx["beta"](v)]] == 0
            for col in tab.blocks["r_K"]:
                pattern_ok &= tab.n_prime[r, col_pos[col]] == 0
            for jj in range(k):
                for w in range(n):
                    want = -mag * int(signs[u, w]) if jj == j else ZERO
                    pattern_ok &= tab.n_prime[r, col_pos[idx["q"](jj, w)]] == want
    checks["N' rows outside K"] = bool(pattern_ok)
    checks["b' matches value-1 point"] = tab.b_prime == tab.expected_b_prime()
    return ReducedCostReport(s, blocks, checks, tab.z0, tab.inverse_ok())
