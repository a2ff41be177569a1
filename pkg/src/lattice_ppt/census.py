"""Enumeration engines: the t=2 quadruple census, column-intersection counts,
candidate constructions, sampled LP runs and a persistent record store."""

from __future__ import annotations

import json
import logging
import os
import random
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from itertools import combinations
from math import comb
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import lp as lpmod
from . import ppt
from .lattice import (
    StateSet,
    family,
    family_masks,
    family_size,
    index_from_string,
    parse_set,
    translation_verified,
    LatticeIndex,
)
from .rational import format_fraction

log = logging.getLogger(__name__)

CACHE_ENV = "LATTICE_PPT_CACHE_DIR"
DEFAULT_CACHE_DIR = ".lattice_ppt_cache"
CACHE_FILE = "records.jsonl"

# Above this many column subsets intersection_stats needs force=True.
SIZE_GUARD = 250_000_000

# The sixteen maximal t=2 families in their reference order (index = position in the list).
REFERENCE_SIX_SETS = (
    "02,12,20,21,23,32",
    "03,13,20,21,22,33",
    "00,10,21,22,23,30",
    "01,11,20,22,23,31",
    "02,12,22,30,31,33",
    "03,13,23,30,31,32",
    "00,10,20,31,32,33",
    "01,11,21,30,32,33",
    "00,01,03,12,22,32",
    "00,01,02,13,23,33",
    "01,02,03,10,20,30",
    "00,02,03,11,21,31",
    "02,10,11,13,22,32",
    "03,10,11,12,23,33",
    "00,11,12,13,20,30",
    "01,10,12,13,21,31",
)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# --- records and cache -------------------------------------------------------------


@dataclass(frozen=True)
class CensusRecord:
    t: int
    k: int
    set: str
    alpha: str
    distinguishable: bool
    method: str
    certificate_digest: str
    timestamp: str | None = None

    def __post_init__(self):
        value = Fraction(self.alpha)
        if not Fraction(1, self.k) <= value <= 1:
            raise ValueError(f"alpha {self.alpha} outside [1/{self.k}, 1]")
        if self.distinguishable != (value == 1):
            raise ValueError("distinguishable flag disagrees with alpha")

    @property
    def key(self) -> tuple[int, str]:
        return (self.t, self.set)

    @property
    def value(self) -> Fraction:
        return Fraction(self.alpha)

    def state_set(self) -> StateSet:
        return parse_set(self.set)

    @classmethod
    def from_result(cls, result: ppt.AlphaResult, timestamp: bool = True) -> CensusRecord:
        s = result.set
        return cls(
            s.t,
            s.k,
            str(s),
            format_fraction(result.alpha),
            result.distinguishable,
            result.method,
            ppt.certificate_digest(result.certificate),
            _now() if timestamp else None,
        )

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> CensusRecord:
        return cls(**data)


CSV_FIELDS = ("t", "k", "set", "alpha", "distinguishable", "method", "certificate_digest", "timestamp")


def default_cache_dir() -> Path:
    return Path(os.environ.get(CACHE_ENV) or DEFAULT_CACHE_DIR)


def _canonical_key(t: int, set_text: str) -> tuple[int, str]:
    s = parse_set(set_text)
    if s.t != t:
        raise ValueError(f"set {set_text!r} has t={s.t}, key says t={t}")
    return (t, str(s))


class ResultCache:
    """Append-only JSONL store; the latest record for a key wins."""

    def __init__(self, directory: str | os.PathLike | None = None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()
        self.path = self.directory / CACHE_FILE
        self._index: dict[tuple[int, str], CensusRecord] | None = None
        self.corrupt_lines = 0

    def _load(self) -> dict[tuple[int, str], CensusRecord]:
        if self._index is None:
            self._index = {}
            if self.path.exists():
                with self.path.open() as fh:
                    for lineno, line in enumerate(fh, 1):
                        if not line.strip():
                            continue
                        try:
                            rec = CensusRecord.from_json(json.loads(line))
                        except (ValueError, TypeError, KeyError) as exc:
                            self.corrupt_lines += 1
                            log.warning("%s:%d: skipping corrupt record (%s)", self.path, lineno, exc)
                            continue
                        self._index[rec.key] = rec
        return self._index

    def write(self, record: CensusRecord) -> None:
        self.directory.mkdir(parents=True, exist_ok=True)
        with self.path.open("a") as fh:
            fh.write(json.dumps(record.to_json(), sort_keys=True) + "\n")
        self._load()[record.key] = record

    def read(self, t: int, set_text: str) -> CensusRecord | None:
        """Latest record for the key, or ``None`` when it was never stored."""
        return self._load().get(_canonical_key(t, set_text))

    def records(self) -> list[CensusRecord]:
        return list(self._load().values())

    def __len__(self) -> int:
        return len(self._load())


# --- evaluating sets ------------------------------------------------------------------


@dataclass
class Evaluation:
    record: CensusRecord
    primal: Fraction
    dual: Fraction
    dual_std: Fraction | None
    beta_prime: Fraction
    solved: bool = True


def _evaluate(args) -> dict:
    members, t, mode, cross_check, timestamp = args
    s = StateSet(t, tuple(members))
    res = ppt.alpha(s, mode, cross_check=cross_check)
    rec = CensusRecord.from_result(res, timestamp)
    return {
        "record": rec.to_json(),
        "primal": format_fraction(res.primal_value),
        "dual": format_fraction(res.dual_value),
        "dual_std": None if res.dual_std_value is None else format_fraction(res.dual_std_value),
    }


def _unpack(s: StateSet, out: dict) -> Evaluation:
    rec = CensusRecord.from_json(out["record"])
    dual_std = None if out["dual_std"] is None else Fraction(out["dual_std"])
    return Evaluation(rec, Fraction(out["primal"]), Fraction(out["dual"]), dual_std, ppt.beta_prime(s))


def evaluate_sets(
    sets: Sequence[StateSet],
    cache: ResultCache | None = None,
    mode: str = "screen",
    cross_check: bool = True,
    parallel: int = 1,
    timestamp: bool = True,
) -> list[Evaluation]:
    """Exact alpha for every set, reusing cached records. Output order follows
    ``sets`` whatever the worker count; the calling process is the only writer."""
    results: list[Evaluation | None] = [None] * len(sets)
    todo = []
    for i, s in enumerate(sets):
        rec = cache.read(s.t, str(s)) if cache is not None else None
        if rec is not None:
            v = rec.value
            results[i] = Evaluation(rec, v, v, None, ppt.beta_prime(s), solved=False)
        else:
            todo.append(i)
    jobs = [(sets[i].members, sets[i].t, mode, cross_check, timestamp) for i in todo]
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            outs = list(pool.map(_evaluate, jobs, chunksize=max(1, len(jobs) // (4 * parallel))))
    else:
        outs = map(_evaluate, jobs)
    for i, out in zip(todo, outs):
        ev = _unpack(sets[i], out)
        if cache is not None:
            cache.write(ev.record)
        results[i] = ev
    return results  # type: ignore[return-value]


# --- t = 2 quadruples -----------------------------------------------------------------


def _require(s: StateSet, t: int, k: int | None = None) -> None:
    if s.t != t or (k is not None and s.k != k):
        want = f"t={t}" + ("" if k is None else f", k={k}")
        raise ValueError(f"expected a set with {want}, got t={s.t}, k={s.k}")


def quad_criterion_t2(s: StateSet) -> bool:
    """True iff some column of the transition matrix is negative on all four rows."""
    _require(s, 2, 4)
    bits = sum(1 << v for v in s.members)
    return any(mask & bits == bits for mask in family_masks(2))


def common_negative_columns(s: StateSet) -> list[int]:
    bits = sum(1 << v for v in s.members)
    return [c for c, mask in enumerate(family_masks(s.t)) if mask & bits == bits]


def maximal_families(t: int = 2) -> list[StateSet]:
    """The family of every column, sorted canonically."""
    if t != 2:
        raise ValueError("maximal families are defined for t=2")
    fams = {family(LatticeIndex(2, c)).as_set() for c in range(16)}
    return sorted(fams, key=lambda s: s.members)


def reference_families() -> list[StateSet]:
    return [parse_set(text) for text in REFERENCE_SIX_SETS]


@dataclass
class QuadCensus:
    total: int
    criterion_true: int
    lp_indistinguishable: int
    disagreements: list[str]
    indistinguishable: list[str]
    alpha_values: dict[str, int]
    solves: int
    audited: int
    audit_mismatches: list[str]
    evaluations: list[Evaluation] = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return not self.disagreements and not self.audit_mismatches

    def to_json(self) -> dict:
        return {
            "total": self.total,
            "criterion_true": self.criterion_true,
            "lp_indistinguishable": self.lp_indistinguishable,
            "distinguishable": self.total - self.lp_indistinguishable,
            "disagreements": self.disagreements,
            "alpha_values": self.alpha_values,
            "lp_solves": self.solves,
            "audited": self.audited,
            "audit_mismatches": self.audit_mismatches,
            "indistinguishable": self.indistinguishable,
        }


def audit_exact(sets: Sequence[StateSet], evaluations: Sequence[Evaluation], fraction: float, seed: int):
    """Re-solve a random fraction of instances with the pure exact simplex."""
    if fraction <= 0 or not sets:
        return 0, []
    rng = random.Random(seed)
    count = max(1, round(fraction * len(sets)))
    picks = sorted(rng.sample(range(len(sets)), count))
    mismatches = []
    for i in picks:
        sol = lpmod.solve_exact(ppt.measurement_lp(sets[i]))
        if sol.status != lpmod.OPTIMAL or -sol.objective != evaluations[i].record.value:
            mismatches.append(str(sets[i]))
    return count, mismatches


def enumerate_quadruples_t2(
    cache: ResultCache | None = None,
    mode: str = "screen",
    parallel: int = 1,
    audit_fraction: float = 0.01,
    seed: int = 0,
    timestamp: bool = True,
) -> QuadCensus:
    """Criterion and exact LP on all C(16, 4) quadruples."""
    sets = [StateSet(2, q) for q in combinations(range(16), 4)]
    evals = evaluate_sets(sets, cache, mode, cross_check=True, parallel=parallel, timestamp=timestamp)
    disagreements, indist = [], []
    crit_true = 0
    values: Counter = Counter()
    for s, ev in zip(sets, evals):
        crit = quad_criterion_t2(s)
        crit_true += crit
        values[ev.record.alpha] += 1
        if not ev.record.distinguishable:
            indist.append(str(s))
        if crit == ev.record.distinguishable:
            disagreements.append(str(s))
    solves = sum(ev.solved for ev in evals)
    audited, mismatches = audit_exact(sets, evals, audit_fraction if solves else 0.0, seed)
    return QuadCensus(
        len(sets),
        crit_true,
        len(indist),
        disagreements,
        indist,
        dict(sorted(values.items())),
        solves,
        audited,
        mismatches,
        list(evals),
    )


# --- column intersections -------------------------------------------------------------


@dataclass
class IntersectionStats:
    t: int
    m: int
    min_count: int
    max_count: int
    histogram: dict[int, int]
    reduced: bool

    @property
    def subsets(self) -> int:
        return sum(self.histogram.values())

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "m": self.m,
            "reduced": self.reduced,
            "subsets": self.subsets,
            "min_count": self.min_count,
            "max_count": self.max_count,
            "uniform": self.min_count == self.max_count,
            "histogram": {str(c): f for c, f in sorted(self.histogram.items())},
        }


def _mask_words(t: int) -> np.ndarray:
    """Family masks as an (N, W) array of little-endian uint64 words."""
    n = 4**t
    words = max(1, n // 64)
    out = np.zeros((n, words), dtype=np.uint64)
    for c, mask in enumerate(family_masks(t)):
        for w in range(words):
            out[c, w] = (mask >> (64 * w)) & 0xFFFFFFFFFFFFFFFF
    return out


def _popcount(words: np.ndarray) -> np.ndarray:
    return np.bitwise_count(words).sum(axis=-1, dtype=np.int64)


class _Engine:
    """Prefix-intersection enumeration; the last two levels are vectorised over
    a table of all column-pair intersections ordered so that the pairs with a
    smaller member >= s form a contiguous suffix."""

    def __init__(self, t: int):
        self.n = n = 4**t
        self.masks = _mask_words(t)
        first, second = np.triu_indices(n, k=1)
        self.pair_and = self.masks[first] & self.masks[second]
        self.start = np.searchsorted(first, np.arange(n + 1))

    def count(self, prefix: np.ndarray, lo: int, depth: int, hist: np.ndarray) -> None:
        """Add counts for all ``depth`` further columns chosen from ``lo..n-1``."""
        n = self.n
        remaining = n - lo
        if depth == 0:
            hist[_popcount(prefix)] += 1
            return
        if not prefix.any():
            hist[0] += comb(remaining, depth)
            return
        if depth == 1:
            counts = _popcount(prefix & self.masks[lo:])
            hist += np.bincount(counts, minlength=hist.size)
            return
        if depth == 2:
            counts = _popcount(prefix & self.pair_and[self.start[lo]:])
            hist += np.bincount(counts, minlength=hist.size)
            return
        for c in range(lo, n - depth + 1):
            self.count(prefix & self.masks[c], c + 1, depth - 1, hist)


_ENGINES: dict[int, _Engine] = {}


def _engine(t: int) -> _Engine:
    if t not in _ENGINES:
        _ENGINES[t] = _Engine(t)
    return _ENGINES[t]


def _stats_task(args) -> np.ndarray:
    t, m, first = args
    eng = _engine(t)
    hist = np.zeros(4**t + 1, dtype=np.int64)
    eng.count(eng.masks[first], first + 1, m - 1, hist)
    return hist


def subset_count(t: int, m: int, reduced: bool) -> int:
    n = 4**t
    return comb(n - 1, m - 1) if reduced else comb(n, m)


def intersection_stats(
    t: int,
    m: int,
    reduced: bool = True,
    parallel: int = 1,
    force: bool = False,
) -> IntersectionStats:
    """Exact distribution of the number of rows negative on every column of
    each m-subset of columns. Reduced mode fixes the first column to 0, which
    is valid because the family of column c is the XOR-translate of family 0."""
    if m < 1:
        raise ValueError("m must be at least 1")
    n = 4**t
    if m > n:
        raise ValueError(f"m={m} exceeds the {n} columns")
    total = subset_count(t, m, reduced)
    if total > SIZE_GUARD and not force:
        raise ValueError(f"{total} column subsets exceed the size guard; pass force=True")
    if reduced and not translation_verified(t):
        raise RuntimeError(f"translation invariance did not verify at t={t}; use reduced=False")
    firsts = [0] if reduced else list(range(n - m + 1))
    tasks = [(t, m, f) for f in firsts]
    if reduced and m >= 3:
        # split on the second column so the work can be shared out
        tasks = [("second", t, m, s) for s in range(1, n - m + 2)]
    if parallel > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            parts = list(pool.map(_dispatch_task, tasks))
    else:
        parts = [_dispatch_task(task) for task in tasks]
    hist = np.zeros(n + 1, dtype=np.int64)
    for part in parts:
        hist += part
    histogram = {int(c): int(f) for c, f in enumerate(hist) if f}
    if sum(histogram.values()) != total:
        raise AssertionError("enumeration did not cover every subset")
    return IntersectionStats(t, m, min(histogram), max(histogram), histogram, reduced)


def _dispatch_task(task) -> np.ndarray:
    if task[0] == "second":
        _, t, m, second = task
        eng = _engine(t)
        hist = np.zeros(4**t + 1, dtype=np.int64)
        eng.count(eng.masks[0] & eng.masks[second], second + 1, m - 2, hist)
        return hist
    return _stats_task(task)


def brute_force_stats(t: int, m: int, reduced: bool = False) -> IntersectionStats:
    """Independent slow count straight from the integer family masks."""
    n = 4**t
    masks = family_masks(t)
    hist: Counter = Counter()
    cols = range(1, n) if reduced else range(n)
    for combo in combinations(cols, m - 1 if reduced else m):
        acc = masks[0] if reduced else (1 << n) - 1
        for c in combo:
            acc &= masks[c]
        hist[acc.bit_count()] += 1
    return IntersectionStats(t, m, min(hist), max(hist), dict(hist), reduced)


def common_rows(t: int, columns: Iterable[int]) -> list[int]:
    acc = (1 << 4**t) - 1
    masks = family_masks(t)
    for c in columns:
        acc &= masks[c]
    return [r for r in range(4**t) if acc >> r & 1]


# --- candidates and sampling ---------------------------------------------------------


def construct_candidate(t: int, s: int, k: int, seed: int = 0, tries: int = 20_000) -> StateSet:
    """k rows drawn from the common-negative rows of some s columns that share at least k."""
    if s < 1 or k < 1:
        raise ValueError("s and k must be positive")
    n = 4**t
    rng = random.Random(seed)
    found = None
    for _ in range(tries):
        cols = sorted(rng.sample(range(n), s))
        rows = common_rows(t, cols)
        if len(rows) >= k:
            found = rows
            break
    if found is None:
        for rest in combinations(range(1, n), s - 1):
            rows = common_rows(t, (0,) + rest)
            if len(rows) >= k:
                found = rows
                break
    if found is None:
        raise ValueError(f"no {s} columns share {k} negative rows at t={t}")
    return StateSet(t, tuple(sorted(rng.sample(found, k))))


def random_sets(t: int, k: int, n: int, seed: int = 0) -> list[StateSet]:
    rng = random.Random(seed)
    return [StateSet(t, tuple(sorted(rng.sample(range(4**t), k)))) for _ in range(n)]


def random_sample_census(
    t: int,
    k: int,
    n: int,
    seed: int = 0,
    cache: ResultCache | None = None,
    mode: str = "screen",
    parallel: int = 1,
    timestamp: bool = True,
    cross_check: bool = True,
) -> list[Evaluation]:
    if n < 1:
        raise ValueError("n must be at least 1")
    sets = random_sets(t, k, n, seed)
    return evaluate_sets(sets, cache, mode, cross_check, parallel, timestamp)


# --- consistency checks over stored records --------------------------------------------


def downward_closure_violations(records: Iterable[CensusRecord]) -> list[tuple[str, str]]:
    """Pairs (S, S') with S a proper subset of S', alpha(S) < 1 and alpha(S') = 1."""
    recs = list(records)
    bad = []
    for small in recs:
        if small.distinguishable:
            continue
        a = set(small.state_set().members)
        for big in recs:
            if big.t == small.t and big.distinguishable and big.k > small.k:
                if a <= set(big.state_set().members):
                    bad.append((small.set, big.set))
    return bad


def translation_violations(cache: ResultCache, t: int = 2, seed: int = 0) -> tuple[int, list[str]]:
    """For every stored record at ``t``, compare with the stored record of a random
    XOR translate (when present). Returns (pairs compared, mismatching sets)."""
    rng = random.Random(seed)
    compared, bad = 0, []
    for rec in sorted(cache.records(), key=lambda r: r.key):
        if rec.t != t:
            continue
        z = rng.randrange(1, 4**t)
        other = cache.read(t, str(rec.state_set().translated(z)))
        if other is None:
            continue
        compared += 1
        if other.alpha != rec.alpha:
            bad.append(rec.set)
    return compared, bad


# --- theorem reports -----------------------------------------------------------------


@dataclass
class Check:
    claim: str
    expected: str
    observed: str
    passed: bool


@dataclass
class TheoremReport:
    theorem: str
    checks: list[Check] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def overall_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, claim: str, expected, observed, passed: bool) -> None:
        self.checks.append(Check(claim, str(expected), str(observed), bool(passed)))

    def to_json(self) -> dict:
        return {
            "theorem": self.theorem,
            "overall_pass": self.overall_pass,
            "checks": [asdict(c) for c in self.checks],
            "details": self.details,
        }


def _stats_checks(report: TheoremReport, t: int, parallel: int, specs) -> None:
    for m, claim, expected, test in specs:
        st = intersection_stats(t, m, reduced=True, parallel=parallel, force=True)
        observed = f"min={st.min_count} max={st.max_count}"
        report.add(claim, expected, observed, test(st))
        report.details[f"t{t}_m{m}"] = st.to_json()


def _all_distinguishable(report, label, sets, cache, mode, parallel):
    evals = evaluate_sets(sets, cache, mode, cross_check=True, parallel=parallel)
    not_one = [ev.record.set for ev in evals if not ev.record.distinguishable]
    report.add(f"{label}: every sampled set has alpha = 1", f"{len(sets)} of {len(sets)}",
               f"{len(sets) - len(not_one)} of {len(sets)}", not not_one)
    report.details[f"{label} counterexamples"] = not_one


def _candidate_check(report, label, t, s, k, seed, cache, mode):
    cand = construct_candidate(t, s, k, seed)
    res = ppt.alpha(cand, mode, cross_check=True)
    ok = res.alpha < 1 and ppt.verify_certificate(cand, res.certificate)
    report.add(f"{label}: constructed set has alpha < 1 with a verified dual", "< 1",
               format_fraction(res.alpha), ok)
    report.details[f"{label} set"] = str(cand)
    if cache is not None:
        cache.write(CensusRecord.from_result(res))


def verify_theorem(
    name: str,
    samples: int = 500,
    seed: int = 0,
    long: bool = False,
    cache: ResultCache | None = None,
    mode: str = "screen",
    parallel: int = 1,
    samples7: int = 200,
    samples14: int = 5,
) -> TheoremReport:
    report = TheoremReport(name)
    if name == "thm3":
        census = enumerate_quadruples_t2(cache, mode, parallel, seed=seed)
        report.add("quadruples enumerated", 1820, census.total, census.total == 1820)
        report.add("criterion-true quadruples", 240, census.criterion_true, census.criterion_true == 240)
        report.add("LP-indistinguishable quadruples", 240, census.lp_indistinguishable,
                   census.lp_indistinguishable == 240)
        report.add("criterion/LP disagreements", 0, len(census.disagreements), not census.disagreements)
        report.add("exact audit mismatches", 0, len(census.audit_mismatches), not census.audit_mismatches)
        fams = maximal_families(2)
        ref = reference_families()
        same = set(fams) == set(ref) and len(fams) == 16
        report.add("column families equal the sixteen reference six-sets", "16 equal",
                   f"{len(set(fams) & set(ref))} equal", same)
        report.details["census"] = census.to_json()
    elif name == "thm4":
        _stats_checks(report, 3, parallel, [
            (1, "t=3 one column: negative rows", family_size(3), lambda st: st.min_count == st.max_count == 28),
            (2, "t=3 two columns: common negative rows", 12, lambda st: st.min_count == st.max_count == 12),
            (3, "t=3 three columns: at most 4 common negative rows", "max 4", lambda st: st.max_count == 4),
        ])
        _all_distinguishable(report, "t=3 k=6", random_sets(3, 6, samples, seed), cache, mode, parallel)
        _all_distinguishable(report, "t=3 k=7", random_sets(3, 7, samples7, seed + 1), cache, mode, parallel)
        _candidate_check(report, "t=3 s=2 k=8", 3, 2, 8, seed, cache, mode)
    elif name == "thm5":
        _stats_checks(report, 4, parallel, [
            (1, "t=4 one column: negative rows", family_size(4), lambda st: st.min_count == st.max_count == 120),
            (4, "t=4 four columns: 24 common negative rows occur", "max 24", lambda st: st.max_count == 24),
            (5, "t=4 five columns: fewer than 8 common negative rows", "max <= 7", lambda st: st.max_count <= 7),
        ])
        if long:
            _all_distinguishable(report, "t=4 k=14", random_sets(4, 14, samples14, seed), cache, mode, parallel)
            _candidate_check(report, "t=4 s=4 k=15", 4, 4, 15, seed, cache, mode)
        else:
            report.details["long_running"] = "skipped (pass long=True / --long)"
    else:
        raise ValueError(f"unknown theorem {name!r}; expected thm3, thm4 or thm5")
    return report
