"""Exact rational matrices stored as an integer grid over one common denominator."""

from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Iterable, Sequence

import numpy as np

_INT64_SAFE = 2**62


def parse_fraction(text: str) -> Fraction:
    return Fraction(text)


def format_fraction(x: Fraction) -> str:
    x = Fraction(x)
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


class RationalMatrix:
    """Dense exact matrix ``num / den`` with ``den > 0`` and the fraction reduced.

    ``num`` is an object array of Python ints, so nothing ever rounds.
    """

    __slots__ = ("num", "den")

    def __init__(self, num, den: int = 1):
        num = np.asarray(num)
        if num.dtype != object:
            num = num.astype(object)
        if num.ndim != 2 or num.shape[0] < 1 or num.shape[1] < 1:
            raise ValueError(f"need a non-empty 2-D grid, got shape {num.shape}")
        den = int(den)
        if den == 0:
            raise ZeroDivisionError("zero denominator")
        if den < 0:
            num, den = -num, -den
        g = reduce(gcd, (int(x) for x in num.flat), den)
        if g > 1:
            num = num // g
            den //= g
        self.num = num
        self.den = den

    # construction -----------------------------------------------------------

    @classmethod
    def from_fractions(cls, rows: Sequence[Sequence]) -> RationalMatrix:
        fr = [[Fraction(x) for x in row] for row in rows]
        den = reduce(lambda a, b: a * b // gcd(a, b), (x.denominator for row in fr for x in row), 1)
        num = np.array([[x.numerator * (den // x.denominator) for x in row] for row in fr], dtype=object)
        return cls(num, den)

    @classmethod
    def identity(cls, n: int) -> RationalMatrix:
        return cls(np.eye(n, dtype=np.int64))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> RationalMatrix:
        return cls(np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def matrix_unit(cls, n: int, i: int, j: int) -> RationalMatrix:
        num = np.zeros((n, n), dtype=np.int64)
        num[i, j] = 1
        return cls(num)

    # views ------------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.num.shape

    @property
    def rows(self) -> int:
        return self.num.shape[0]

    @property
    def cols(self) -> int:
        return self.num.shape[1]

    def __getitem__(self, ij) -> Fraction:
        i, j = ij
        return Fraction(int(self.num[i, j]), self.den)

    def to_fractions(self) -> list[list[Fraction]]:
        return [[Fraction(int(x), self.den) for x in row] for row in self.num]

    def to_float(self) -> np.ndarray:
        return self.num.astype(float) / self.den

    # arithmetic -------------------------------------------------------------

    def _align(self, other: RationalMatrix):
        den = self.den * other.den // gcd(self.den, other.den)
        return self.num * (den // self.den), other.num * (den // other.den), den

    def __add__(self, other: RationalMatrix) -> RationalMatrix:
        a, b, den = self._align(other)
        return RationalMatrix(a + b, den)

    def __sub__(self, other: RationalMatrix) -> RationalMatrix:
        a, b, den = self._align(other)
        return RationalMatrix(a - b, den)

    def __neg__(self) -> RationalMatrix:
        return RationalMatrix(-self.num, self.den)

    def scale(self, x) -> RationalMatrix:
        x = Fraction(x)
        return RationalMatrix(self.num * x.numerator, self.den * x.denominator)

    def __matmul__(self, other: RationalMatrix) -> RationalMatrix:
        if self.cols != other.rows:
            raise ValueError(f"shape mismatch {self.shape} @ {other.shape}")
        return RationalMatrix(_int_matmul(self.num, other.num), self.den * other.den)

    def kron(self, other: RationalMatrix) -> RationalMatrix:
        return RationalMatrix(np.kron(self.num, other.num), self.den * other.den)

    @property
    def T(self) -> RationalMatrix:
        return RationalMatrix(self.num.T.copy(), self.den)

    def trace(self) -> Fraction:
        return Fraction(int(sum(self.num.diagonal())), self.den)

    def is_symmetric(self) -> bool:
        return self.rows == self.cols and bool(np.all(self.num == self.num.T))

    def is_diagonal(self) -> bool:
        off = self.num.copy()
        np.fill_diagonal(off, 0)
        return not np.any(off != 0)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalMatrix):
            return NotImplemented
        return self.shape == other.shape and self.den == other.den and bool(np.all(self.num == other.num))

    def __hash__(self):
        return hash((self.shape, self.den, tuple(self.num.flat)))

    def __repr__(self) -> str:
        return f"RationalMatrix(shape={self.shape}, den={self.den})"


def _int_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Exact integer product; uses int64 when every partial sum provably fits."""
    amax = max((abs(int(x)) for x in a.flat), default=0)
    bmax = max((abs(int(x)) for x in b.flat), default=0)
    if amax * bmax * a.shape[1] < _INT64_SAFE:
        return (a.astype(np.int64) @ b.astype(np.int64)).astype(object)
    return a.dot(b)


def kron_all(mats: Iterable[RationalMatrix]) -> RationalMatrix:
    return reduce(lambda x, y: x.kron(y), mats)


def block(rows: Sequence[Sequence[RationalMatrix]]) -> RationalMatrix:
    """Assemble a block matrix from a grid of equally aligned blocks."""
    den = reduce(lambda a, b: a * b // gcd(a, b), (m.den for row in rows for m in row), 1)
    grid = [[m.num * (den // m.den) for m in row] for row in rows]
    return RationalMatrix(np.block(grid), den)
