import json
from math import comb

import pytest

from lattice_ppt import census, ppt
from lattice_ppt.lattice import StateSet, family_size, parse_set


# --- criterion and families ---------------------------------------------------------


def test_quad_criterion_examples():
    assert census.quad_criterion_t2(parse_set("00,11,21,31"))
    assert census.common_negative_columns(parse_set("00,11,21,31")) == [11]  # column "23"
    assert not census.quad_criterion_t2(parse_set("00,01,02,03"))


def test_quad_criterion_holds_inside_first_family():
    from itertools import combinations

    fam = census.maximal_families(2)[0].members
    for quad in combinations(fam, 4):
        assert census.quad_criterion_t2(StateSet(2, quad))


def test_quad_criterion_rejects_other_shapes():
    with pytest.raises(ValueError):
        census.quad_criterion_t2(parse_set("00,11,21"))
    with pytest.raises(ValueError):
        census.quad_criterion_t2(parse_set("000,011,021,031"))


def test_quad_criterion_brute_force_count():
    from itertools import combinations

    assert sum(census.quad_criterion_t2(StateSet(2, q)) for q in combinations(range(16), 4)) == 240


def test_maximal_families_match_reference():
    fams = census.maximal_families(2)
    assert len(fams) == 16 and len(set(fams)) == 16
    assert set(fams) == set(census.reference_families())
    with pytest.raises(ValueError):
        census.maximal_families(3)


def test_two_families_share_at_most_two_rows():
    fams = [set(f.members) for f in census.maximal_families(2)]
    assert max(len(a & b) for i, a in enumerate(fams) for b in fams[i + 1:]) == 2


# --- intersection statistics ------------------------------------------------------------


@pytest.mark.parametrize("t,m", [(2, 1), (2, 2), (2, 3), (2, 4), (2, 5), (3, 1), (3, 2), (3, 3)])
@pytest.mark.parametrize("reduced", [True, False])
def test_engine_matches_brute_force(t, m, reduced):
    fast = census.intersection_stats(t, m, reduced=reduced)
    slow = census.brute_force_stats(t, m, reduced=reduced)
    assert fast.histogram == slow.histogram
    assert fast.subsets == census.subset_count(t, m, reduced)


@pytest.mark.parametrize("t,m", [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3)])
def test_reduced_and_full_agree_up_to_scale(t, m):
    red = census.intersection_stats(t, m, reduced=True)
    full = census.intersection_stats(t, m, reduced=False)
    # every subset is counted m times over the n translates that put a member at column 0
    n = 4**t
    assert {c: f * n for c, f in red.histogram.items()} == {c: f * m for c, f in full.histogram.items()}


@pytest.mark.parametrize("t", [2, 3, 4])
def test_single_column_count_is_family_size(t):
    st = census.intersection_stats(t, 1)
    assert st.min_count == st.max_count == family_size(t) == (4**t - 2**t) // 2


def test_known_histograms():
    assert census.intersection_stats(2, 2).histogram == {2: 15}
    assert census.intersection_stats(3, 2).histogram == {12: 63}
    assert census.intersection_stats(3, 3).histogram == {4: 945, 6: 1008}


def test_parallel_matches_serial():
    serial = census.intersection_stats(3, 3)
    parallel = census.intersection_stats(3, 3, parallel=2)
    assert serial.histogram == parallel.histogram


def test_size_guard_and_arguments():
    with pytest.raises(ValueError):
        census.intersection_stats(4, 6)
    with pytest.raises(ValueError):
        census.intersection_stats(2, 0)
    with pytest.raises(ValueError):
        census.intersection_stats(1, 5)


def test_stats_json_shape():
    data = census.intersection_stats(2, 3).to_json()
    assert data["histogram"] == {"0": 45, "1": 60}
    assert data["subsets"] == comb(15, 2) and data["uniform"] is False


# --- candidates and sampling ---------------------------------------------------------------


def test_construct_candidate_t2():
    s = census.construct_candidate(2, 1, 4, seed=3)
    assert s.k == 4 and census.quad_criterion_t2(s)
    assert ppt.alpha(s).alpha < 1


def test_construct_candidate_t3_pair():
    s = census.construct_candidate(3, 2, 8, seed=1)
    assert s.k == 8 and census.common_negative_columns(s)
    res = ppt.alpha(s)
    assert res.alpha < 1 and ppt.verify_certificate(s, res.certificate)


def test_construct_candidate_impossible():
    with pytest.raises(ValueError):
        census.construct_candidate(2, 2, 3, seed=0, tries=50)


def test_random_sets_deterministic():
    assert census.random_sets(2, 4, 20, seed=5) == census.random_sets(2, 4, 20, seed=5)
    assert census.random_sets(2, 4, 20, seed=5) != census.random_sets(2, 4, 20, seed=6)


def test_sample_census_reproducible(tmp_path):
    a = census.random_sample_census(2, 4, 30, seed=2, timestamp=False)
    b = census.random_sample_census(2, 4, 30, seed=2, cache=census.ResultCache(tmp_path), timestamp=False)
    assert [e.record for e in a] == [e.record for e in b]
    with pytest.raises(ValueError):
        census.random_sample_census(2, 4, 0)


def test_five_sets_containing_a_bad_quadruple_are_bad(tmp_path):
    store = census.ResultCache(tmp_path)
    evals = census.random_sample_census(2, 5, 40, seed=9, cache=store, timestamp=False)
    for ev in evals:
        s = ev.record.state_set()
        if any(census.quad_criterion_t2(StateSet(2, tuple(x for x in s.members if x != d))) for d in s.members):
            assert not ev.record.distinguishable
    assert census.downward_closure_violations(store.records()) == []


# --- records and cache ----------------------------------------------------------------------


def _record(alpha="7/8", distinguishable=False, set_text="00,11,21,31"):
    return census.CensusRecord(2, 4, set_text, alpha, distinguishable, "exact-lp", "ab" * 32, None)


def test_record_invariants():
    with pytest.raises(ValueError):
        _record(alpha="1/8")
    with pytest.raises(ValueError):
        _record(alpha="1", distinguishable=False)
    rec = _record()
    assert census.CensusRecord.from_json(json.loads(json.dumps(rec.to_json()))) == rec


def test_cache_round_trip_and_latest_wins(tmp_path):
    store = census.ResultCache(tmp_path)
    rec = _record()
    store.write(rec)
    again = census.ResultCache(tmp_path)
    assert again.read(2, "31,21,11,00") == rec
    assert again.read(2, "00,01,02,03") is None
    newer = census.CensusRecord(2, 4, rec.set, rec.alpha, False, "exact-lp", "cd" * 32, "2026-01-01T00:00:00+00:00")
    again.write(newer)
    assert census.ResultCache(tmp_path).read(2, rec.set) == newer


def test_cache_skips_corrupt_lines(tmp_path, caplog):
    store = census.ResultCache(tmp_path)
    store.write(_record())
    with store.path.open("a") as fh:
        fh.write("{not json\n")
        fh.write(json.dumps({"t": 2}) + "\n")
    fresh = census.ResultCache(tmp_path)
    assert len(fresh) == 1 and fresh.corrupt_lines == 2


def test_cache_key_errors(tmp_path):
    store = census.ResultCache(tmp_path)
    with pytest.raises(ValueError):
        store.read(2, "00,00")
    with pytest.raises(ValueError):
        store.read(3, "00,11")


def test_cache_dir_from_environment(monkeypatch, tmp_path):
    monkeypatch.setenv(census.CACHE_ENV, str(tmp_path / "x"))
    assert census.ResultCache().directory == tmp_path / "x"
    monkeypatch.delenv(census.CACHE_ENV)
    assert str(census.default_cache_dir()) == census.DEFAULT_CACHE_DIR


def test_record_from_result():
    s = parse_set("00,11,21,31")
    res = ppt.alpha(s)
    rec = census.CensusRecord.from_result(res)
    assert rec.alpha == "7/8" and rec.timestamp is not None
    assert rec.certificate_digest == ppt.certificate_digest(res.certificate)
    assert census.CensusRecord.from_result(res, timestamp=False).timestamp is None


def test_downward_closure_detects_violation():
    small = _record()
    big = census.CensusRecord(2, 5, "00,11,21,31,33", "1", True, "exact-lp", "0" * 64, None)
    assert census.downward_closure_violations([small, big]) == [(small.set, big.set)]


def test_translation_check_on_small_store(tmp_path):
    store = census.ResultCache(tmp_path)
    s = parse_set("00,11,21,31")
    for z in range(16):
        store.write(census.CensusRecord.from_result(ppt.alpha(s.translated(z)), timestamp=False))
    compared, bad = census.translation_violations(store, t=2, seed=0)
    assert compared == 16 and bad == []


def test_theorem_report_logic():
    rep = census.TheoremReport("thm4")
    rep.add("a", 1, 1, True)
    assert rep.overall_pass
    rep.add("b", 4, 6, False)
    assert not rep.overall_pass
    assert rep.to_json()["checks"][1] == {"claim": "b", "expected": "4", "observed": "6", "passed": False}
    with pytest.raises(ValueError):
        census.verify_theorem("thm9")


def test_verify_theorem5_counting_only():
    rep = census.verify_theorem("thm5")
    by_claim = {c.claim: c for c in rep.checks}
    assert by_claim["t=4 one column: negative rows"].passed
    assert by_claim["t=4 four columns: 24 common negative rows occur"].passed
    # the five-column bound does not hold: the exhaustive maximum is 12
    five = by_claim["t=4 five columns: fewer than 8 common negative rows"]
    assert not five.passed and five.observed == "min=0 max=12"
    assert "long_running" in rep.details
