import dataclasses
import itertools
from fractions import Fraction

import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from fqcircle.certificates import (
    CertificateError,
    FujitaCertificate,
    ParameterTuple,
    certificate_invariants,
    degree_threshold,
    frontier_scan,
    fujita_gap_check,
    fujita_plan,
    genus_correction,
    minimal_n,
    minor_arc_exponent,
    verify_thresholds,
)
from fqcircle.experiments import corrupted_variants

THRESHOLDS = {(2, 1): 14, (2, 2): 28, (3, 1): 45, (3, 2): 124, (4, 1): 145, (4, 2): 516}


# --- minor-arc exponents and thresholds -----------------------------------------------------

def test_published_thresholds():
    for (d, g), e in THRESHOLDS.items():
        assert degree_threshold(d, g) == e
    assert [minimal_n(d) for d in (2, 3, 4)] == [5, 17, 49]


@pytest.mark.parametrize("d,g", sorted(THRESHOLDS))
def test_thresholds_verify(d, g):
    v = verify_thresholds(ParameterTuple(minimal_n(d), d, g, THRESHOLDS[d, g]))
    assert v.passed and v.all_valid
    assert len(v.rows) == len(range(THRESHOLDS[d, g] - 2 * g + 2, d * THRESHOLDS[d, g] // 2 + 2))


def test_exponent_by_hand():
    # n=5, d=2, g=1, e=14, degZ=15: s=2, h0=12, 30 - 42 + 6
    r = minor_arc_exponent(ParameterTuple(5, 2, 1, 14), 15)
    assert (r.s, r.h0, r.value) == (2, 12, -6)
    # n=17, d=3, g=1, e=45, degZ=45: s=23, h0=22, 90 - 405 + (828 + 396)/4
    r = minor_arc_exponent(ParameterTuple(17, 3, 1, 45), 45)
    assert (r.s, r.h0, r.value) == (23, 22, -9)
    # genus two adds (n+1)(g+1)/2 / 2^{d-1}: n=5, d=2, g=2, e=28, degZ=26
    r = minor_arc_exponent(ParameterTuple(5, 2, 2, 28), 26)
    assert r.fg == Fraction(3, 2) and r.s == 3 and r.h0 == 24
    assert r.value == 52 - Fraction(1, 2) * 27 * 6 + Fraction(1, 2) * 6 * (3 + Fraction(3, 2))


def test_genus_correction():
    assert genus_correction(1) == 0 and genus_correction(2) == Fraction(3, 2) and genus_correction(5) == 3


def test_invalid_rows_are_flagged():
    v = verify_thresholds(ParameterTuple(5, 2, 2, 3))
    assert not v.all_valid and not v.passed
    bad = next(r for r in v.rows if not r.valid)
    assert bad.value is None and not bad.negative
    assert v.witness == v.rows[0].degZ
    with pytest.raises(CertificateError):
        minor_arc_exponent(ParameterTuple(5, 2, 1, 14), 13)


def test_parameter_validation():
    for bad in [(5, 1, 1, 3), (5, 2, 0, 3), (5, 2, 1, 0), (2, 2, 1, 3)]:
        with pytest.raises(CertificateError):
            ParameterTuple(*bad)
    t = ParameterTuple(5, 2, 1, 14)
    assert t.mu == 6 * 14 - 28 - 2 + 2 and t.mu_hat == t.mu


@pytest.mark.parametrize(
    "n,d,g,lo,hi,first",
    [(5, 2, 1, 1, 14, 9), (5, 2, 2, 1, 28, 22), (17, 3, 1, 1, 45, 19), (17, 3, 2, 1, 124, 65)],
)
def test_frontier_frozen(n, d, g, lo, hi, first):
    rows, got = frontier_scan(n, d, g, range(lo, hi + 1))
    assert got == first
    assert rows[-1].passed
    assert all(not r.passed for r in rows if r.e < first)


@given(st.sampled_from(sorted(THRESHOLDS)), st.integers(0, 40))
@settings(max_examples=60, deadline=None)
def test_thresholds_pass_above(dg, extra):
    d, g = dg
    assert verify_thresholds(ParameterTuple(minimal_n(d), d, g, THRESHOLDS[dg] + extra)).passed


# --- Fujita planner --------------------------------------------------------------------------

def test_certificate_frozen():
    c = fujita_plan(2, 5, 129, 2)
    assert (c.m, c.p, c.b, c.m_x, c.g_Cprime) == (129, 3, 7, 23, 409)
    assert c.degree == 2 * 3**8 == 13122
    assert "m_x = 21 rejected (slack 98, divisible by p)" in c.trace
    assert "m_x = 22 rejected (slack 66)" in c.trace
    assert fujita_gap_check(c).passed


@pytest.mark.parametrize(
    "d,n,g_C,e_m,expected",
    [(2, 5, 129, 2, (3, 7, 23)), (2, 5, 129, 3, (3, 7, 229)), (3, 17, 9729, 2, (5, 9, 51971)), (3, 17, 9729, 3, (5, 9, 90118))],
)
def test_certificate_grid(d, n, g_C, e_m, expected):
    c = fujita_plan(d, n, g_C, e_m)
    assert (c.p, c.b, c.m_x) == expected
    v = fujita_gap_check(c)
    assert v.passed and all(v.invariants.values())


def least_triple_bruteforce(d, n, g_C, e_m, p_max=40, b_max=12, mx_max=5000):
    """Lexicographically least (p, b, m_x) meeting the planner inequalities, written out longhand."""
    c = 2 * 4**d
    k = n + 1 - d
    for p, b in itertools.product(range(d + 1, p_max), range(b_max)):
        if p % 2 == 0 or not sympy.isprime(p):
            continue
        if not c * (p - 1) * k + c * k + 1 < p * g_C:
            continue
        deg = e_m * p ** (b + 1)
        if deg < c * p * g_C:
            continue
        for m_x in range(1, mx_max):
            slack = deg - c * (p * g_C + (p - 1) * (m_x - 1) // 2)
            if m_x % p and 0 <= slack < 2 * (p - 1) * 4**d:
                return p, b, m_x
    return None


@pytest.mark.parametrize("d,n,g_C,e_m", [(2, 5, 129, 2), (2, 5, 129, 3), (2, 5, 200, 2), (2, 6, 300, 5)])
def test_planner_is_least(d, n, g_C, e_m):
    c = fujita_plan(d, n, g_C, e_m)
    assert least_triple_bruteforce(d, n, g_C, e_m) == (c.p, c.b, c.m_x)


def test_planner_is_locally_least_for_cubics():
    c = fujita_plan(3, 17, 9729, 2)
    for field_name in ("p", "b", "m_x"):
        smaller = dataclasses.replace(c, **{field_name: getattr(c, field_name) - 1})
        smaller = dataclasses.replace(smaller, g_Cprime=smaller.p * c.g_C + (smaller.p - 1) * (smaller.m_x - 1) // 2)
        assert not all(certificate_invariants(smaller).values())


def test_every_single_field_corruption_fails():
    c = fujita_plan(2, 5, 129, 2)
    variants = list(corrupted_variants(c))
    assert len(variants) == 18
    for _, _, v in variants:
        assert not fujita_gap_check(v).passed


def test_one_fewer_frobenius_step_misses_the_threshold():
    c = fujita_plan(2, 5, 129, 2)
    short = dataclasses.replace(c, b=c.b - 1)
    assert short.degree == 4374 < degree_threshold(2, 409) == 7150
    verdict = fujita_gap_check(short)
    assert not verdict.gate_iii and not verdict.invariants["b_bound"]


def test_planner_preconditions():
    with pytest.raises(CertificateError):
        fujita_plan(2, 4, 129, 2)
    with pytest.raises(CertificateError):
        fujita_plan(2, 5, 128, 2)
    with pytest.raises(CertificateError):
        fujita_plan(2, 5, 129, 1)
    with pytest.raises(CertificateError):
        fujita_plan(2, 5, 129, 2, max_p=2)


def test_certificate_serializes():
    c = fujita_plan(2, 5, 129, 2)
    d = c.as_dict()
    assert FujitaCertificate(**{**d, "trace": tuple(d["trace"])}) == c
    assert fujita_gap_check(c).as_dict()["passed"] is True
