import itertools
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from fqcircle.algebra import CyclotomicSum, all_vectors, encode_vectors, get_field
from fqcircle.arcs import (
    ArcError,
    DivisorSearch,
    DualFunctional,
    Instance,
    SeparablePushforward,
    annihilator_span,
    artinian_count_enum,
    artinian_count_formula,
    artinian_difference_formula,
    build_pushforward,
    canonical_coords,
    census,
    census_count,
    classify_all,
    dimension_probe,
    factors_through,
    intersection_violations,
    major_arc_sum_check,
    major_mask,
    minimal_subscheme,
    minimal_sum_prediction,
    minor_arc_tail,
    partition_identity,
    s_alpha,
    section_tuples,
    to_cyclotomic,
)
from fqcircle.budget import BudgetExceeded
from fqcircle.curves import EffectiveDivisor, enumerate_closed_points, vanishing_subspace
from fqcircle.forms import evaluate_on_sections, parse_form, symmetrize


def s_alpha_bruteforce(inst, alpha):
    """Sum of zeta^Tr(alpha . f(x)) over every tuple, one tuple at a time."""
    F = inst.field
    vals = evaluate_on_sections(inst.curve, inst.form, section_tuples(inst), inst.e)
    counts = [0] * inst.p
    for v in vals:
        acc = 0
        for a, c in zip(alpha, v):
            acc = F.add(acc, F.mul(int(a), int(c)))
        counts[F.trace(acc)] += 1
    return CyclotomicSum.from_counts(inst.p, counts)


def test_s_alpha_against_bruteforce(conic3, conic3_hist, conic3_transform, conic3_alphas):
    rng = np.random.default_rng(0)
    for i in rng.choice(len(conic3_alphas), 6, replace=False):
        a = conic3_alphas[i]
        expected = s_alpha_bruteforce(conic3, a)
        assert s_alpha(conic3_hist, a) == expected
        assert to_cyclotomic(3, conic3_transform[i]) == expected


def test_direct_and_transform_paths_agree(conic3_hist, conic3_transform, conic3_alphas):
    direct = conic3_hist.sums(conic3_alphas)
    assert np.array_equal(canonical_coords(direct), canonical_coords(conic3_transform))


def test_trivial_and_conjugate_sums(conic3, conic3_hist, conic3_alphas):
    zero = np.zeros(conic3.dim_de, dtype=np.int64)
    assert s_alpha(conic3_hist, zero) == CyclotomicSum.integer(3, conic3.trivial_sum)
    F = conic3.field
    for a in conic3_alphas[1:40]:
        assert s_alpha(conic3_hist, F.vneg(a)) == s_alpha(conic3_hist, a).conjugate()
    with pytest.raises(ArcError):
        s_alpha(conic3_hist, zero[:-1])


def test_separable_pushforward_matches_plain(conic3, conic3_hist):
    sep = build_pushforward(conic3, separable=True)
    assert isinstance(sep, SeparablePushforward)
    combined = sep.combined()
    assert combined.as_dict() == conic3_hist.as_dict()
    assert sep.count_zero() == conic3_hist.count_zero() == 105
    assert np.array_equal(canonical_coords(sep.transform()), canonical_coords(conic3_hist.transform()))
    assert sep.total == conic3.trivial_sum


def test_census_frozen_values(conic3):
    res = census(conic3)
    q = conic3.q
    # every zero is a rational point of the conic times one section of P_3
    assert res.count_Me == 1 + (q + 1) * (q**3 - 1) == 105
    # ... and that section always vanishes somewhere, so no map is base point free
    assert res.count_bpf == 0 and res.mor_count == 0
    assert census_count(conic3) == 105


def test_partition_identity_frozen(conic3, conic3_transform):
    lhs, rhs = partition_identity(conic3, conic3_transform, 105)
    assert lhs == rhs == 76545


def test_pushforward_parallel_is_deterministic(conic3, conic3_hist):
    par = build_pushforward(conic3, workers=2, chunk=5000)
    assert np.array_equal(par.keys, conic3_hist.keys) and np.array_equal(par.counts, conic3_hist.counts)


def test_budget_guard(conic3):
    with pytest.raises(BudgetExceeded):
        build_pushforward(conic3, limit=100, separable=False)
    with pytest.raises(BudgetExceeded):
        census(conic3, limit=100)


# --- factoring ----------------------------------------------------------------------

def all_divisors(curve, bound):
    pts = [P for P in enumerate_closed_points(curve, bound)]
    out = [EffectiveDivisor()]

    def extend(start, parts, deg):
        for i in range(start, len(pts)):
            P = pts[i]
            for r in range(1, bound // P.degree + 1):
                if deg + r * P.degree > bound:
                    break
                new = parts + ((P, r),)
                out.append(EffectiveDivisor(new))
                extend(i + 1, new, deg + r * P.degree)

    extend(0, (), 0)
    return out


def test_search_nodes_match_direct_kernels(conic3, conic3_search):
    divs = all_divisors(conic3.curve, 4)
    assert len(divs) == len(conic3_search.nodes) == 233
    F = conic3.field
    for nd in conic3_search.nodes:
        V = vanishing_subspace(conic3.curve, 6, nd.divisor)
        assert V.shape[0] == nd.basis.shape[0]
        both = np.vstack([V, nd.basis])
        from fqcircle.algebra import rank

        assert rank(F, both) == V.shape[0]


def test_minimal_degree_distribution_frozen(conic3_classified):
    degs, minimal = conic3_classified
    assert dict(Counter(degs.tolist())) == {0: 1, 1: 8, 2: 96, 3: 522, 4: 102}
    unique = [len(m) for d, m in zip(degs, minimal) if 0 <= d <= 2]
    assert set(unique) == {1}


def test_minimal_degree_by_direct_factoring(conic3, conic3_alphas, conic3_classified):
    degs, _ = conic3_classified
    divs = sorted(all_divisors(conic3.curve, 4), key=lambda Z: Z.degree)
    rng = np.random.default_rng(9)
    for i in rng.choice(len(conic3_alphas), 15, replace=False):
        a = conic3_alphas[i]
        first = next(Z.degree for Z in divs if factors_through(conic3.curve, 6, a, Z))
        assert first == degs[i]


def test_major_mask_matches_classification(conic3, conic3_classified):
    degs, _ = conic3_classified
    mask = major_mask(conic3)
    assert mask.sum() == 105
    assert np.array_equal(mask, (degs >= 0) & (degs <= conic3.major_bound))


def test_classification_records(conic3, conic3_search, conic3_alphas):
    rec = classify_all(conic3, conic3_search, conic3_alphas[:30])
    for r, a in zip(rec, conic3_alphas[:30]):
        one = minimal_subscheme(conic3, conic3_search, a)
        assert (one.deg_alpha, one.kind, one.min_Z) == (r.deg_alpha, r.kind, r.min_Z)
        assert r.kind in {"major", "minor"}
        assert factors_through(conic3.curve, 6, a, r.min_Z)


def test_intersection_closure(conic3, conic3_search, conic3_alphas):
    assert intersection_violations(conic3, conic3_search, conic3_alphas) == []


def test_annihilator_span_size(conic3):
    Z = EffectiveDivisor(((enumerate_closed_points(conic3.curve, 1)[1], 2),))
    V = vanishing_subspace(conic3.curve, 6, Z)
    span = annihilator_span(conic3.field, V, conic3.dim_de)
    assert span.shape[0] == 3**Z.degree
    assert len(set(encode_vectors(3, span).tolist())) == span.shape[0]


def test_dual_functional_pairing(conic3):
    F = conic3.field
    a = DualFunctional(F, 6, np.array([1, 2, 0, 1, 1, 2]))
    v = np.array([2, 2, 1, 0, 1, 1])
    assert a(v) == (2 + 4 + 0 + 0 + 1 + 2) % 3
    assert (-a)(v) == F.neg(a(v))


# --- major arcs ------------------------------------------------------------------------

def small_divisors(inst, bound, max_point_degree=2):
    return [Z for Z in all_divisors(inst.curve, bound) if all(P.degree <= max_point_degree for P in Z.support())]


def test_major_arc_sums_exact(conic3, conic3_hist):
    divs = small_divisors(conic3, conic3.major_bound)
    assert len(divs) == 21
    for Z in divs:
        chk = major_arc_sum_check(conic3, conic3_hist, Z)
        assert chk.holds, Z
        assert chk.num_alphas == 3**Z.degree


def test_major_arc_rejects_large_divisor(conic3, conic3_hist):
    P = enumerate_closed_points(conic3.curve, 1)[1]
    with pytest.raises(ArcError):
        major_arc_sum_check(conic3, conic3_hist, EffectiveDivisor(((P, 3),)))


def test_minimal_sums_and_multiplicativity(conic3, conic3_transform, conic3_classified, conic3_search):
    degs, minimal = conic3_classified
    groups: dict = {}
    for i in np.nonzero((degs >= 0) & (degs <= conic3.major_bound))[0]:
        Z = conic3_search.nodes[minimal[i][0]].divisor
        groups[Z] = groups.get(Z, 0) + conic3_transform[i]
    observed = {Z: Fraction(to_cyclotomic(3, v).as_integer()) for Z, v in groups.items()}
    for Z in small_divisors(conic3, 2):
        assert observed[Z] == minimal_sum_prediction(conic3, Z)
    scale = 3 ** ((conic3.n + 1) * (conic3.e + 1 - conic3.g))
    pairs = 0
    for Z1, Z2 in itertools.combinations(observed, 2):
        if set(Z1.support()) & set(Z2.support()) or Z1 + Z2 not in observed:
            continue
        pairs += 1
        assert observed[Z1 + Z2] * scale == observed[Z1] * observed[Z2]
    assert pairs == 26


# --- Artinian counts ---------------------------------------------------------------------

def fermat(q, n, d):
    F = get_field(*{3: (3, 1), 5: (5, 1), 9: (3, 2)}[q])
    return symmetrize(F, n, d, {tuple(d if i == j else 0 for i in range(n + 1)): 1 for j in range(n + 1)})


GRID = [(q, d, n, r) for q in (3, 5) for d in (2, 3) for n in (1, 2) for r in range(1, 5) if q > d]


@pytest.mark.parametrize("q,d,n,r", GRID)
def test_artinian_closed_form(q, d, n, r):
    form = fermat(q, n, d)
    star = artinian_count_enum(form, 1, 1) - 1
    value, count = artinian_count_formula(form, 1, r, star)
    assert count == artinian_count_enum(form, 1, r)
    assert value == Fraction(count, q ** (r * n))


@pytest.mark.parametrize("q,d,n", [(3, 2, 1), (3, 2, 2), (5, 3, 1), (5, 2, 1)])
def test_artinian_difference_rule(q, d, n):
    form = fermat(q, n, d)
    counts = {r: artinian_count_enum(form, 1, r) for r in range(1, 5)}
    for r in range(2, 5):
        diff = artinian_difference_formula(form, 1, r, counts[1] - 1)
        assert diff == Fraction(counts[r], q ** (n * r)) - Fraction(counts[r - 1], q ** (n * (r - 1)))


def test_artinian_non_diagonal_and_degree_two_points():
    F = get_field(5)
    form = parse_form("x0*x1 + x2^2", F)
    for r in range(1, 4):
        assert artinian_count_formula(form, 1, r)[1] == artinian_count_enum(form, 1, r)
    F3 = get_field(3)
    conic = parse_form("x0^2 + x1^2 + x2^2", F3)
    for r in range(1, 3):
        assert artinian_count_formula(conic, 2, r)[1] == artinian_count_enum(conic, 2, r)


def test_artinian_separable_path_agrees():
    form = fermat(3, 2, 2)
    for r in range(1, 4):
        assert artinian_count_enum(form, 1, r, separable=True) == artinian_count_enum(form, 1, r, separable=False)
    with pytest.raises(ArcError):
        artinian_count_enum(parse_form("x0*x1", get_field(5)), 1, 2, separable=True)
    with pytest.raises(ArcError):
        artinian_count_enum(form, 1, 0)


def test_artinian_smooth_point_count_r1():
    # the affine cone over the conic: 1 + (q-1)(q+1) points
    assert artinian_count_enum(fermat(3, 2, 2), 1, 1) == 1 + 2 * 4
    assert artinian_count_enum(fermat(5, 2, 2), 1, 1) == 1 + 4 * 6


# --- tails and probes ----------------------------------------------------------------------

def test_minor_tail_and_ratio_frozen(conic3, conic3_transform):
    tail = minor_arc_tail(conic3, conic3_transform)
    assert tail.minor_count == 624 and tail.major_count == 105
    assert tail.tail.as_integer() == 2 * 3**9
    assert max(tail.normalized_abs) == pytest.approx(2.0)
    row = dimension_probe([conic3], [105])[0]
    assert row.ratio == Fraction(35, 9) and row.mu_hat == 3


def test_instance_validation(conic3):
    F5 = get_field(5)
    with pytest.raises(ArcError):
        Instance(conic3.curve, parse_form("x0^2 + x1^2", F5), 2)
    with pytest.raises(ArcError):
        Instance(conic3.curve, conic3.form, -1)
    assert conic3.describe()["g"] == 1


def test_search_respects_point_degree_limit(conic3):
    S = DivisorSearch(conic3.curve, 6, 3, max_point_degree=1)
    assert all(P.degree == 1 for nd in S.nodes for P in nd.divisor.support())
    with pytest.raises(BudgetExceeded):
        DivisorSearch(conic3.curve, 6, 4, node_limit=10)
    sample = all_vectors(3, 6)[:5]
    assert S.hit_matrix(sample).shape == (len(S.nodes), 5)
