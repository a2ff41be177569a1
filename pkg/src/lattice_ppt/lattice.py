"""Lattice-state labels, the sign structure of the Bell-basis transition matrix,
and column families.

A lattice state on ``t`` Bell pairs is labelled by ``t`` quaternary digits.
The leftmost digit belongs to the first tensor factor and is the most
significant digit of the linear index, so ``"23"`` is ``2*4 + 3 = 11``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cache
from typing import Iterable, Sequence

import numpy as np

# Per-factor transition matrix (times 2); negative exactly where w = v XOR 2.
BASE_SIGNS = np.array(
    [
        [1, 1, -1, 1],
        [1, 1, 1, -1],
        [-1, 1, 1, 1],
        [1, -1, 1, 1],
    ],
    dtype=np.int64,
)
BASE_MATRIX = tuple(tuple(Fraction(s, 2) for s in row) for row in BASE_SIGNS.tolist())


@dataclass(frozen=True, order=True)
class LatticeIndex:
    """A lattice label: ``t`` quaternary digits packed into ``linear``."""

    t: int
    linear: int

    def __post_init__(self):
        if self.t < 1:
            raise ValueError(f"t must be positive, got {self.t}")
        if not 0 <= self.linear < 4**self.t:
            raise ValueError(f"linear index {self.linear} out of range for t={self.t}")

    @property
    def digits(self) -> tuple[int, ...]:
        return digits_of(self.linear, self.t)

    def __xor__(self, other: LatticeIndex) -> LatticeIndex:
        _same_t(self, other)
        return LatticeIndex(self.t, self.linear ^ other.linear)

    def permuted(self, perm: Sequence[int]) -> LatticeIndex:
        """Reorder digit positions: new digit ``d`` is old digit ``perm[d]``."""
        digits = self.digits
        return index_from_digits([digits[p] for p in perm])

    def __str__(self) -> str:
        return "".join(str(d) for d in self.digits)


def digits_of(linear: int, t: int) -> tuple[int, ...]:
    return tuple((linear >> (2 * (t - 1 - d))) & 3 for d in range(t))


def index_from_digits(digits: Sequence[int]) -> LatticeIndex:
    if len(digits) == 0:
        raise ValueError("a lattice index needs at least one digit")
    linear = 0
    for d in digits:
        if d not in (0, 1, 2, 3):
            raise ValueError(f"digit {d!r} is not in 0..3")
        linear = 4 * linear + d
    return LatticeIndex(len(digits), linear)


def index_from_string(text: str) -> LatticeIndex:
    text = text.strip()
    if not text or any(ch not in "0123" for ch in text):
        raise ValueError(f"bad lattice index {text!r}")
    return index_from_digits([int(ch) for ch in text])


def _same_t(v: LatticeIndex, w: LatticeIndex) -> None:
    if v.t != w.t:
        raise ValueError(f"mismatched t: {v.t} vs {w.t}")


def sign_linear(v: int, w: int, t: int) -> int:
    """Sign of entry ``(v, w)`` of the t-fold transition matrix, on linear indices."""
    x = v ^ w
    odd = 0
    for _ in range(t):
        if x & 3 == 2:
            odd ^= 1
        x >>= 2
    return -1 if odd else 1


def sign(v: LatticeIndex, w: LatticeIndex) -> int:
    """+1 or -1. The entry magnitude is always ``2**-t``."""
    _same_t(v, w)
    return sign_linear(v.linear, w.linear, v.t)


@cache
def sign_matrix(t: int) -> np.ndarray:
    """All signs as a ``4**t x 4**t`` int8 array, computed from the digit rule.

    This is the LP-building representation; it is not a Kronecker power.
    """
    n = 4**t
    idx = np.arange(n, dtype=np.int64)
    x = idx[:, None] ^ idx[None, :]
    odd = np.zeros((n, n), dtype=np.int64)
    for _ in range(t):
        odd ^= (x & 3) == 2
        x = x >> 2
    out = (1 - 2 * odd).astype(np.int8)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SignOracle:
    """Implicit form of the t-fold Kronecker power of the base matrix."""

    t: int

    @property
    def base(self) -> tuple[tuple[Fraction, ...], ...]:
        return BASE_MATRIX

    @property
    def magnitude(self) -> Fraction:
        return Fraction(1, 2**self.t)

    def sign(self, v: int, w: int) -> int:
        return sign_linear(v, w, self.t)

    def entry(self, v: int, w: int) -> Fraction:
        return self.sign(v, w) * self.magnitude

    def row(self, v: int) -> list[int]:
        return sign_matrix(self.t)[v].tolist()


@dataclass(frozen=True)
class StateSet:
    """A set of distinct lattice labels sharing ``t``; members are kept sorted."""

    t: int
    members: tuple[int, ...]

    def __post_init__(self):
        if not self.members:
            raise ValueError("a state set cannot be empty")
        if len(set(self.members)) != len(self.members):
            raise ValueError("duplicate member in state set")
        n = 4**self.t
        for m in self.members:
            if not 0 <= m < n:
                raise ValueError(f"member {m} out of range for t={self.t}")
        object.__setattr__(self, "members", tuple(sorted(self.members)))

    @classmethod
    def of(cls, indices: Iterable[LatticeIndex]) -> StateSet:
        indices = list(indices)
        if not indices:
            raise ValueError("a state set cannot be empty")
        t = indices[0].t
        for v in indices:
            if v.t != t:
                raise ValueError("all members must share t")
        return cls(t, tuple(v.linear for v in indices))

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def indices(self) -> tuple[LatticeIndex, ...]:
        return tuple(LatticeIndex(self.t, m) for m in self.members)

    def translated(self, z: int) -> StateSet:
        return StateSet(self.t, tuple(m ^ z for m in self.members))

    def permuted(self, perm: Sequence[int]) -> StateSet:
        return StateSet.of(v.permuted(perm) for v in self.indices)

    def __contains__(self, v: int) -> bool:
        return v in self.members

    def __str__(self) -> str:
        return format_set(self)


def parse_set(text: str) -> StateSet:
    """Parse ``"00,11,21,31"``; whitespace is ignored."""
    cleaned = "".join(text.split())
    if not cleaned:
        raise ValueError("empty state set")
    parts = cleaned.split(",")
    indices = [index_from_string(p) for p in parts]
    lengths = {v.t for v in indices}
    if len(lengths) != 1:
        raise ValueError(f"mixed index lengths {sorted(lengths)}")
    if len({v.linear for v in indices}) != len(indices):
        raise ValueError("duplicate member in state set")
    return StateSet.of(indices)


def format_set(s: StateSet) -> str:
    return ",".join(str(v) for v in s.indices)


@dataclass(frozen=True)
class ColumnFamily:
    """Rows with a negative entry in one column, as a packed bit-vector."""

    column: LatticeIndex
    rows: int

    @property
    def cardinality(self) -> int:
        return self.rows.bit_count()

    def members(self) -> list[int]:
        return [v for v in range(4**self.column.t) if self.rows >> v & 1]

    def as_set(self) -> StateSet:
        return StateSet(self.column.t, tuple(self.members()))


def family_size(t: int) -> int:
    return (4**t - 2**t) // 2


def family(c: LatticeIndex) -> ColumnFamily:
    return ColumnFamily(c, _family_masks(c.t)[c.linear])


@cache
def _family_masks(t: int) -> tuple[int, ...]:
    signs = sign_matrix(t)
    masks = []
    for c in range(4**t):
        neg = np.flatnonzero(signs[:, c] < 0)
        masks.append(sum(1 << int(v) for v in neg))
    return tuple(masks)


def family_masks(t: int) -> tuple[int, ...]:
    """Packed family of every column, indexed by column."""
    return _family_masks(t)


# --- invariant checks on the sign rule -------------------------------------


def _sample_triples(t: int, samples: int, seed: int):
    rng = random.Random(seed)
    n = 4**t
    for _ in range(samples):
        yield rng.randrange(n), rng.randrange(n), rng.randrange(n)


def check_xor_invariance(t: int, samples: int = 100_000, seed: int = 0) -> bool:
    """sign(v^z, w^z) == sign(v, w); exhaustive for t <= 3, sampled above."""
    if t <= 3:
        s = sign_matrix(t)
        idx = np.arange(4**t)
        return all(np.array_equal(s[np.ix_(idx ^ z, idx ^ z)], s) for z in range(4**t))
    return all(
        sign_linear(v ^ z, w ^ z, t) == sign_linear(v, w, t)
        for v, w, z in _sample_triples(t, samples, seed)
    )


def check_symmetry(t: int) -> bool:
    s = sign_matrix(t)
    return bool(np.array_equal(s, s.T))


def check_row_sums(t: int) -> bool:
    return bool(np.all(sign_matrix(t).astype(np.int64).sum(axis=1) == 2**t))


def check_family_translation(t: int) -> bool:
    masks = family_masks(t)
    base = [v for v in range(4**t) if masks[0] >> v & 1]
    return all(masks[c] == sum(1 << (c ^ u) for u in base) for c in range(4**t))


@cache
def translation_verified(t: int) -> bool:
    """Gate for census reductions that rely on XOR translation symmetry."""
    return check_xor_invariance(t) and check_family_translation(t)
