"""Explicit dense construction of Bell and lattice states, used to check the
identities the diagonal LP reduction depends on.

Layout on A (x) B: basis index ``a * 2**t + b`` where ``a`` and ``b`` are the
bit strings of the A and B factors in factor order. A lattice ket is first
built on (A1 B1)(A2 B2)... and then permuted into that layout.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cache

import numpy as np

from .lattice import BASE_MATRIX, LatticeIndex, sign_matrix
from .rational import RationalMatrix, kron_all

MAX_DENSE_T = 3

# Computational-basis amplitudes times sqrt(2), basis order |00>,|01>,|10>,|11>.
# Labels 2 and 3 are assigned so that the base transition matrix (negative at
# w = v XOR 2) is exactly the partial transpose in this basis: the partner of
# |00>+|11> under partial transpose must be the singlet.
_BELL_AMPLITUDES = (
    (1, 0, 0, 1),
    (0, 1, 1, 0),
    (0, 1, -1, 0),
    (1, 0, 0, -1),
)


@dataclass(frozen=True)
class KetVector:
    """Real ket ``amplitudes * sqrt(2)**(-sqrt2_power)`` with rational amplitudes."""

    amplitudes: tuple[Fraction, ...]
    sqrt2_power: int

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    def squared_norm(self) -> Fraction:
        return sum((a * a for a in self.amplitudes), Fraction(0)) / 2**self.sqrt2_power

    def inner(self, other: KetVector) -> Fraction:
        if self.dim != other.dim:
            raise ValueError("dimension mismatch")
        power = self.sqrt2_power + other.sqrt2_power
        if power % 2:
            raise ValueError("inner product is irrational for an odd total sqrt(2) power")
        raw = sum((a * b for a, b in zip(self.amplitudes, other.amplitudes)), Fraction(0))
        return raw / 2 ** (power // 2)

    def density(self) -> RationalMatrix:
        a = self.amplitudes
        return RationalMatrix.from_fractions([[x * y for y in a] for x in a]).scale(
            Fraction(1, 2**self.sqrt2_power)
        )


def bell_ket(i: int) -> KetVector:
    if i not in (0, 1, 2, 3):
        raise ValueError(f"Bell index must be 0..3, got {i}")
    return KetVector(tuple(Fraction(a) for a in _BELL_AMPLITUDES[i]), 1)


def _factor_to_bipartite(t: int) -> np.ndarray:
    """Permutation taking (A1 B1 ... At Bt) bit order to (A1..At B1..Bt)."""
    axes = [2 * d for d in range(t)] + [2 * d + 1 for d in range(t)]
    return np.arange(4**t).reshape((2,) * (2 * t)).transpose(axes).reshape(-1)


def lattice_ket(v: LatticeIndex) -> KetVector:
    t = v.t
    if t > MAX_DENSE_T:
        raise ValueError(f"dense states are capped at t={MAX_DENSE_T}")
    amp = np.array([1], dtype=np.int64)
    for d in v.digits:
        amp = np.kron(amp, np.array(_BELL_AMPLITUDES[d], dtype=np.int64))
    amp = amp[_factor_to_bipartite(t)]
    return KetVector(tuple(Fraction(int(a)) for a in amp), t)


def lattice_density(v: LatticeIndex) -> RationalMatrix:
    return lattice_ket(v).density()


@cache
def _lattice_basis(t: int) -> np.ndarray:
    """Integer matrix whose column ``v`` is ``2**(t/2)`` times the lattice ket ``v``."""
    cols = [lattice_ket(LatticeIndex(t, v)).amplitudes for v in range(4**t)]
    out = np.array([[int(a) for a in col] for col in cols], dtype=np.int64).T
    out.setflags(write=False)
    return out


def partial_transpose(m: RationalMatrix, dim_a: int, dim_b: int) -> RationalMatrix:
    """Transpose on the A factor of an (A (x) B)-ordered square matrix."""
    if m.rows != m.cols or m.rows != dim_a * dim_b:
        raise ValueError(f"expected a {dim_a * dim_b}-square matrix, got {m.shape}")
    grid = m.num.reshape(dim_a, dim_b, dim_a, dim_b).transpose(2, 1, 0, 3)
    return RationalMatrix(grid.reshape(m.rows, m.cols), m.den)


def partial_transpose_t(m: RationalMatrix, t: int) -> RationalMatrix:
    return partial_transpose(m, 2**t, 2**t)


def dephase(m: RationalMatrix, t: int) -> RationalMatrix:
    """Keep only the lattice-basis diagonal: sum_v <chi_v|M|chi_v> |chi_v><chi_v|."""
    n = 4**t
    if m.shape != (n, n):
        raise ValueError(f"expected a {n}-square matrix for t={t}, got {m.shape}")
    u = RationalMatrix(_lattice_basis(t))
    w = u.T @ m @ u
    diag = np.diag(np.array(list(w.num.diagonal()), dtype=object))
    return u @ RationalMatrix(diag, w.den * 4**t) @ u.T


def lattice_coefficients(m: RationalMatrix, t: int) -> list[Fraction]:
    """``<chi_v|M|chi_v>`` for every lattice label ``v``."""
    u = RationalMatrix(_lattice_basis(t))
    d = (u.T @ m @ u).scale(Fraction(1, 2**t))
    return [d[v, v] for v in range(4**t)]


def transition_matrix(t: int) -> RationalMatrix:
    """Explicit Kronecker power of the base matrix (dense, small t only)."""
    if t > MAX_DENSE_T:
        raise ValueError(f"dense transition matrix is capped at t={MAX_DENSE_T}")
    base = RationalMatrix.from_fractions(BASE_MATRIX)
    return kron_all([base] * t)


def check_sign_oracle(t: int) -> bool:
    """Sign rule against the explicit Kronecker power."""
    dense = transition_matrix(t)
    signs = np.sign(np.array(dense.num, dtype=np.int64))
    return bool(np.array_equal(signs, sign_matrix(t)))


# --- reduction report -------------------------------------------------------


@dataclass
class IdentityCheck:
    group: str
    index: str
    passed: bool


@dataclass
class ReductionReport:
    t: int
    checks: list[IdentityCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[IdentityCheck]:
        return [c for c in self.checks if not c.passed]

    def summary(self) -> dict:
        groups: dict[str, dict[str, int]] = {}
        for c in self.checks:
            g = groups.setdefault(c.group, {"checked": 0, "failed": 0})
            g["checked"] += 1
            g["failed"] += 0 if c.passed else 1
        return {
            "t": self.t,
            "passed": self.passed,
            "groups": groups,
            "failures": [f"{c.group}:{c.index}" for c in self.failures()],
        }


# Partial transpose of one Bell projector is I/2 minus its partner.
BELL_PARTNER = {0: 2, 1: 3, 2: 0, 3: 1}


def verify_reduction(t: int, allow_t3: bool = False) -> ReductionReport:
    """Exact checks of the Bell identities, the transition-matrix expansion,
    dephasing invariance, and commutation of dephasing with partial transpose.
    """
    if t not in (1, 2) and not (t == 3 and allow_t3):
        raise ValueError("verify_reduction runs at t in {1, 2}; t=3 needs allow_t3")
    report = ReductionReport(t)
    n = 4**t
    dim = 2**t

    half_identity = RationalMatrix.identity(4).scale(Fraction(1, 2))
    for i in range(4):
        lhs = partial_transpose(bell_ket(i).density(), 2, 2)
        rhs = half_identity - bell_ket(BELL_PARTNER[i]).density()
        report.checks.append(IdentityCheck("bell", str(i), lhs == rhs))

    dense_p = transition_matrix(t)
    densities = [lattice_density(LatticeIndex(t, v)) for v in range(n)]
    for v in range(n):
        lhs = partial_transpose(densities[v], dim, dim)
        rhs = RationalMatrix.zeros(n, n)
        for u in range(n):
            coeff = dense_p[u, v]
            if coeff:
                rhs = rhs + densities[u].scale(coeff)
        report.checks.append(IdentityCheck("transition", str(LatticeIndex(t, v)), lhs == rhs))

    for v in range(n):
        ok = dephase(densities[v], t) == densities[v]
        report.checks.append(IdentityCheck("invariance", str(LatticeIndex(t, v)), ok))

    for i, j in itertools.product(range(n), repeat=2):
        unit = RationalMatrix.matrix_unit(n, i, j)
        lhs = dephase(partial_transpose(unit, dim, dim), t)
        rhs = partial_transpose(dephase(unit, t), dim, dim)
        report.checks.append(IdentityCheck("commutation", f"{i},{j}", lhs == rhs))
    return report
