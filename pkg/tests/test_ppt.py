import json
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from lattice_ppt import lp, ppt
from lattice_ppt.lattice import StateSet, parse_set, sign_matrix

QUAD = "00,11,21,31"


@pytest.fixture(scope="module")
def quad():
    s = parse_set(QUAD)
    return s, ppt.alpha(s, "screen", cross_check=True)


def test_reference_quadruple_value(quad):
    s, res = quad
    assert res.alpha == Fraction(7, 8) and not res.distinguishable
    assert res.primal_value == res.dual_value == res.dual_std_value == Fraction(7, 8)
    assert isinstance(res.certificate, ppt.DualCertificate)
    assert ppt.verify_certificate(s, res.certificate)


def test_exact_mode_agrees(quad):
    s, res = quad
    exact = ppt.alpha(s, "exact", cross_check=True)
    assert exact.alpha == res.alpha and exact.dual_std_value == res.alpha


@pytest.mark.parametrize("v", range(16))
def test_singletons_are_distinguishable(v):
    res = ppt.alpha(StateSet(2, (v,)))
    assert res.alpha == 1 and isinstance(res.certificate, ppt.PovmCertificate)


def test_three_states_are_distinguishable():
    s = parse_set("00,01,02")
    res = ppt.alpha(s, cross_check=True)
    assert res.alpha == 1 and ppt.verify_certificate(s, res.certificate)


def test_full_set_value():
    s = StateSet(2, tuple(range(16)))
    assert ppt.beta_prime(s) == Fraction(1, 4)
    res = ppt.alpha(s, cross_check=True)
    assert Fraction(1, 16) <= res.alpha <= Fraction(1, 4)


def test_certificate_json_round_trip(quad):
    s, res = quad
    for cert in (res.certificate, res.measurement):
        data = ppt.certificate_to_json(cert)
        text = json.dumps(data)
        back = ppt.certificate_from_json(json.loads(text))
        assert back == cert
        assert ppt.certificate_digest(back) == ppt.certificate_digest(cert)
    data = ppt.certificate_to_json(res.certificate)
    assert data["type"] == "dual" and data["value"] == "7/8" and data["set"] == QUAD.split(",")


def test_uniform_povm_is_ppt_but_not_perfect():
    s = parse_set("00,01,02")
    n = 16
    vectors = tuple(tuple(Fraction(1, 3) for _ in range(n)) for _ in range(3))
    assert ppt.measurement_value(s, vectors) == Fraction(1, 3)
    assert not ppt.verify_certificate(s, ppt.PovmCertificate(2, s.members, vectors))


def test_tampered_dual_is_rejected(quad):
    s, res = quad
    cert = res.certificate
    q = [list(qj) for qj in cert.q]
    q[0][0] = Fraction(-1)
    bad = ppt.DualCertificate(cert.t, cert.members, cert.y, tuple(map(tuple, q)), cert.value)
    assert not ppt.verify_certificate(s, bad)
    lying = ppt.DualCertificate(cert.t, cert.members, cert.y, cert.q, Fraction(1, 2))
    assert not ppt.verify_certificate(s, lying)


def test_trivial_dual_has_value_one_but_proves_nothing(quad):
    s, _ = quad
    triv = ppt.trivial_dual(s)
    assert ppt.dual_value(s, triv.y, triv.q) == 1
    assert not ppt.verify_certificate(s, triv)


def test_certificate_mismatch_errors(quad):
    s, res = quad
    with pytest.raises(ValueError):
        ppt.verify_certificate(parse_set("00,11,21,32"), res.certificate)
    with pytest.raises(ValueError):
        ppt.dual_value(s, res.certificate.y[:3], res.certificate.q)


def test_beta_prime_closed_form_examples():
    assert ppt.beta_prime(parse_set(QUAD)) == Fraction(7, 8)
    for v in range(16):
        assert ppt.beta_prime(StateSet(2, (v,))) == 1


def test_beta_prime_exceeds_one_for_small_sets():
    # no common negative row: every row contributes +2**-t, so the bound is 2**t / k
    s = parse_set("00,01")
    assert ppt.beta_prime(s) == Fraction(3, 2) == ppt.beta_prime_lp(s)
    assert ppt.beta_prime(StateSet(3, (0, 1, 2, 3, 4, 5))) == Fraction(4, 3)


def test_beta_prime_matches_intersection_formula():
    from lattice_ppt.lattice import family_masks

    rng = random.Random(4)
    for _ in range(30):
        t = rng.choice([2, 3])
        k = rng.randrange(1, 9)
        s = StateSet(t, tuple(rng.sample(range(4**t), k)))
        common = (1 << 4**t) - 1
        for v in s.members:
            common &= family_masks(t)[v]
        expected = Fraction(4**t - 2 * common.bit_count(), k * 2**t)
        assert ppt.beta_prime(s) == expected


t2_sets = st.sets(st.integers(0, 15), min_size=1, max_size=10).map(lambda m: StateSet(2, tuple(m)))


@given(t2_sets)
@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_bound_chain_and_duality(s):
    res = ppt.alpha(s, cross_check=True)
    assert res.primal_value == res.dual_value == res.dual_std_value
    assert Fraction(1, s.k) <= res.alpha <= min(ppt.beta_prime(s), 1)
    assert ppt.beta_prime_lp(s, "screen") == ppt.beta_prime(s)
    assert ppt.verify_certificate(s, res.certificate) or res.alpha == 1


@given(t2_sets, st.integers(0, 15))
@settings(max_examples=20, deadline=None)
def test_translation_and_permutation_invariance(s, z):
    a = ppt.alpha(s).alpha
    assert ppt.alpha(s.translated(z)).alpha == a
    assert ppt.alpha(s.permuted((1, 0))).alpha == a


@pytest.mark.parametrize("seed", range(3))
def test_perfect_measurement_restricts_to_subsets(seed):
    rng = random.Random(seed)
    while True:
        s = StateSet(2, tuple(rng.sample(range(16), 4)))
        res = ppt.alpha(s)
        if res.distinguishable:
            break
    vectors = res.certificate.vectors
    for drop in range(s.k):
        keep = [j for j in range(s.k) if j != drop]
        merged = [list(vectors[j]) for j in keep]
        merged[0] = [a + b for a, b in zip(merged[0], vectors[drop])]
        sub = StateSet(2, tuple(s.members[j] for j in keep))
        cert = ppt.PovmCertificate(2, sub.members, tuple(map(tuple, merged)))
        assert ppt.verify_certificate(sub, cert)


def test_mode_validation():
    with pytest.raises(ValueError):
        ppt.alpha(parse_set(QUAD), "fast")


# --- tableau -----------------------------------------------------------------------


def test_tableau_invariants(quad):
    s, _ = quad
    tab = ppt.build_tableau(s)
    assert tab.inverse_ok()
    assert tab.z0 == 1
    assert tab.rank() == 64
    assert np.linalg.matrix_rank(tab.a.to_float()) == 64
    assert tab.b_prime == tab.expected_b_prime()
    assert len(tab.basis) == 64 and len(tab.nonbasis) == 6 * 16


def test_tableau_lp_matches_dense_builder(quad):
    s, res = quad
    a, b, c = ppt.dual_std_data(s)
    dense = lp.LpProblem.from_dense(a.to_fractions(), b, c)
    sparse = ppt.dual_std_lp(s)
    assert dense.columns == sparse.columns and dense.b == sparse.b and dense.c == sparse.c


def test_reduced_costs_reference_quadruple(quad):
    s, _ = quad
    report = ppt.reduced_costs(s)
    assert report.passed, report.checks
    assert report.blocks["beta_K"] == [0] * 4
    assert report.blocks["alpha_hat"] == [1] * 12
    assert report.blocks["beta_hat"] == [-1] * 12


@pytest.mark.parametrize("seed", range(5))
def test_reduced_costs_q_blocks_follow_sign_rows(seed):
    rng = random.Random(seed)
    s = StateSet(2, tuple(rng.sample(range(16), 4)))
    report = ppt.reduced_costs(s)
    assert report.passed
    for j, v in enumerate(s.members):
        assert report.blocks[f"q{j + 1}"] == [Fraction(int(x), 4) for x in sign_matrix(2)[v]]


def test_reduced_costs_t3():
    s = StateSet(3, (0, 9, 27, 40, 63))
    assert ppt.reduced_costs(s).passed
