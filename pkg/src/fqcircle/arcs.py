"""The dual space P_{de}^v, factoring of functionals through subschemes, and S(alpha).

A functional alpha on P_{de} is a coordinate vector in the dual basis, so
``alpha(v)`` is the dot product.  ``S(alpha)`` is evaluated through the
pushforward histogram of ``x -> f(x)`` on ``P_e^{n+1}``: either summed
directly for a handful of functionals, or for every functional at once by a
p-ary discrete Fourier transform with exact coefficients in Z[zeta_p].

Values of ``S`` travel as integer arrays of length p holding multiplicities of
zeta^0 .. zeta^(p-1); :func:`to_cyclotomic` brings them to canonical form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .algebra import (
    CyclotomicSum,
    FiniteField,
    all_vectors,
    decode_vectors,
    embedding,
    encode_vectors,
    get_field,
    kernel_basis,
)
from .budget import BudgetExceeded, check_budget, chunk_ranges, parallel_map
from .curves import (
    CurveModel,
    EffectiveDivisor,
    enumerate_closed_points,
    cup,
    jet_rows,
    rr_dim,
    vanishing_subspace,
)
from .forms import SymmetricForm, evaluate_on_sections


class ArcError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Instance:
    """A curve, a form on it, and the degree e of the line bundle O(e*inf)."""

    curve: CurveModel
    form: SymmetricForm
    e: int

    def __post_init__(self):
        if self.form.field.q != self.curve.field.q:
            raise ArcError("form and curve live over different fields")
        if self.e < 0:
            raise ArcError("e must be non-negative")

    @property
    def field(self) -> FiniteField:
        return self.curve.field

    @property
    def q(self) -> int:
        return self.curve.field.q

    @property
    def p(self) -> int:
        return self.curve.field.p

    @property
    def n(self) -> int:
        return self.form.n

    @property
    def d(self) -> int:
        return self.form.d

    @property
    def g(self) -> int:
        return self.curve.genus

    @property
    def dim_e(self) -> int:
        return rr_dim(self.curve, self.e)

    @property
    def dim_de(self) -> int:
        return rr_dim(self.curve, self.d * self.e)

    @property
    def major_bound(self) -> int:
        """Largest deg(alpha) counted as a major arc."""
        return self.e - 2 * self.g + 1

    @property
    def factoring_bound(self) -> int:
        """Every functional factors through a divisor of at most this degree."""
        return (self.d * self.e) // 2 + 1

    @property
    def trivial_sum(self) -> int:
        return self.q ** ((self.n + 1) * self.dim_e)

    @property
    def mu_hat(self) -> int:
        n, d, e, g = self.n, self.d, self.e, self.g
        return (n + 1) * (e + 1 - g) - (d * e + 1) + g

    def describe(self) -> dict:
        return {
            "curve": self.curve.describe(),
            "form": self.form.describe(),
            "e": self.e,
            "q": self.q,
            "n": self.n,
            "d": self.d,
            "g": self.g,
        }


# --- exact values in Z[zeta_p] as count vectors ---------------------------------

def to_cyclotomic(p: int, counts) -> CyclotomicSum:
    return CyclotomicSum.from_counts(p, [int(c) for c in counts])


def cyclotomic_product(a, b) -> np.ndarray:
    """Product of count vectors along the last axis (cyclic convolution)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    p = a.shape[-1]
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.int64)
    for u in range(p):
        out += a[..., u : u + 1] * np.roll(b, u, axis=-1)
    return out


def canonical_coords(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    return counts[..., :-1] - counts[..., -1:]


def embedding_values(counts) -> np.ndarray:
    """Complex value of each count vector at every embedding zeta -> e^{2 pi i j/p}."""
    counts = np.asarray(counts, dtype=np.float64)
    p = counts.shape[-1]
    j = np.arange(1, p)
    t = np.arange(p)
    w = np.exp(2j * np.pi * np.outer(t, j) / p)  # (p, p-1)
    return counts @ w


# --- the trace pairing between functionals and sections ----------------------------

@lru_cache(maxsize=None)
def trace_form_matrix(F: FiniteField) -> np.ndarray:
    """B[a, b] = Tr(t^a t^b) on the power basis of F over F_p."""
    k, p = F.k, F.p
    B = np.zeros((k, k), dtype=np.int64)
    for a in range(k):
        for b in range(k):
            B[a, b] = F.trace(F.mul(p**a, p**b))
    B.setflags(write=False)
    return B


def trace_pairing(F: FiniteField, alphas, vecs) -> np.ndarray:
    """Tr(alpha . v) in F_p for every pair of rows."""
    alphas = np.asarray(alphas, dtype=np.int64)
    vecs = np.asarray(vecs, dtype=np.int64)
    if F.k == 1:
        return (alphas @ vecs.T) % F.p
    dim = alphas.shape[-1]
    Bfull = np.kron(np.eye(dim, dtype=np.int64), trace_form_matrix(F))
    Da = F.digits[alphas].reshape(alphas.shape[0], -1)
    Dv = F.digits[vecs].reshape(vecs.shape[0], -1)
    return ((Da @ Bfull) % F.p @ Dv.T) % F.p


def _dual_digit_index(F: FiniteField, alpha_keys, dim: int) -> np.ndarray:
    """Flat F_p-digit index of the vector paired with alpha by the trace form."""
    if F.k == 1:
        return np.asarray(alpha_keys, dtype=np.int64)
    alphas = decode_vectors(F.q, alpha_keys, dim)
    Bfull = np.kron(np.eye(dim, dtype=np.int64), trace_form_matrix(F))
    D = F.digits[alphas].reshape(alphas.shape[0], -1)
    beta = (D @ Bfull) % F.p
    w = F.p ** np.arange(beta.shape[1], dtype=np.int64)
    return beta @ w


def _dft_axis(A: np.ndarray, ax: int, p: int) -> np.ndarray:
    out = np.empty_like(A)
    for b in range(p):
        acc = np.zeros_like(np.take(A, 0, axis=ax))
        for w in range(p):
            acc += np.roll(np.take(A, w, axis=ax), (b * w) % p, axis=-1)
        idx = [slice(None)] * A.ndim
        idx[ax] = b
        out[tuple(idx)] = acc
    return out


def character_transform(F: FiniteField, keys, counts, dim: int, limit: int | None = None) -> np.ndarray:
    """sum_v counts[v] zeta^{Tr(alpha . v)} for every alpha, as (q^dim, p) count vectors."""
    p, N = F.p, F.k * dim
    check_budget(p ** (N + 1), limit, "character transform")
    dense = np.zeros(p**N, dtype=np.int64)
    np.add.at(dense, np.asarray(keys, dtype=np.int64), np.asarray(counts, dtype=np.int64))
    A = np.zeros((p,) * N + (p,), dtype=np.int64)
    A[..., 0] = dense.reshape((p,) * N)
    for ax in range(N):
        A = _dft_axis(A, ax, p)
    T = A.reshape(p**N, p)
    return T[_dual_digit_index(F, np.arange(F.q**dim, dtype=np.int64), dim)]


# --- pushforward histograms -------------------------------------------------------

def merge_histograms(parts) -> tuple[np.ndarray, np.ndarray]:
    keys = np.concatenate([k for k, _ in parts]) if parts else np.zeros(0, dtype=np.int64)
    counts = np.concatenate([c for _, c in parts]) if parts else np.zeros(0, dtype=np.int64)
    u, inv = np.unique(keys, return_inverse=True)
    return u, np.bincount(inv, weights=counts, minlength=len(u)).astype(np.int64)


def convolve_histograms(F: FiniteField, a, b, dim: int, limit: int | None = None):
    """Histogram of u + v for u ~ a, v ~ b (sparse pairwise sums)."""
    (ka, ca), (kb, cb) = a, b
    check_budget(len(ka) * len(kb), limit, "histogram convolution")
    va = decode_vectors(F.q, ka, dim)
    vb = decode_vectors(F.q, kb, dim)
    parts = []
    step = max(1, 2_000_000 // max(1, len(kb)))
    for s in range(0, len(ka), step):
        sums = F.vadd(va[s : s + step, None, :], vb[None, :, :])
        keys = encode_vectors(F.q, sums).ravel()
        cnt = (ca[s : s + step, None] * cb[None, :]).ravel()
        parts.append(merge_histograms([(keys, cnt)]))
    return merge_histograms(parts)


@dataclass(frozen=True, eq=False)
class PushforwardHistogram:
    """Counts of f(x) in P_{de} over x in P_e^{n+1}, keyed by base-q coordinates."""

    field: FiniteField
    dim: int
    keys: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def count_zero(self) -> int:
        hit = np.nonzero(self.keys == 0)[0]
        return int(self.counts[hit[0]]) if hit.size else 0

    def as_dict(self) -> dict:
        return {int(k): int(c) for k, c in zip(self.keys, self.counts)}

    def sums(self, alphas) -> np.ndarray:
        alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
        p = self.field.p
        vecs = decode_vectors(self.field.q, self.keys, self.dim)
        out = np.zeros((alphas.shape[0], p), dtype=np.int64)
        step = max(1, 4_000_000 // max(1, len(self.keys)))
        for s in range(0, alphas.shape[0], step):
            tr = trace_pairing(self.field, alphas[s : s + step], vecs)
            for t in range(p):
                out[s : s + step, t] = (tr == t) @ self.counts
        return out

    def transform(self, limit: int | None = None) -> np.ndarray:
        return character_transform(self.field, self.keys, self.counts, self.dim, limit)


@dataclass(frozen=True, eq=False)
class SeparablePushforward:
    """Pushforward of a diagonal form, kept as one histogram per variable."""

    field: FiniteField
    dim: int
    factors: tuple[PushforwardHistogram, ...]

    @property
    def total(self) -> int:
        return math.prod(f.total for f in self.factors)

    def combined(self, limit: int | None = None) -> PushforwardHistogram:
        acc = (self.factors[0].keys, self.factors[0].counts)
        for f in self.factors[1:]:
            acc = convolve_histograms(self.field, acc, (f.keys, f.counts), self.dim, limit)
        return PushforwardHistogram(self.field, self.dim, *acc)

    def count_zero(self, limit: int | None = None) -> int:
        """Zeros of the sum: convolve all but the last factor, then look up negatives."""
        F = self.field
        head = self.factors[:-1]
        last = self.factors[-1]
        acc = (head[0].keys, head[0].counts)
        for f in head[1:]:
            acc = convolve_histograms(F, acc, (f.keys, f.counts), self.dim, limit)
        neg = encode_vectors(F.q, F.vneg(decode_vectors(F.q, last.keys, self.dim)))
        lookup = dict(zip(acc[0].tolist(), acc[1].tolist()))
        return int(sum(lookup.get(int(k), 0) * int(c) for k, c in zip(neg, last.counts)))

    def sums(self, alphas) -> np.ndarray:
        out = None
        for f in self.factors:
            s = f.sums(alphas)
            out = s if out is None else cyclotomic_product(out, s)
        return out

    def transform(self, limit: int | None = None) -> np.ndarray:
        out = None
        for f in self.factors:
            s = f.transform(limit)
            out = s if out is None else cyclotomic_product(out, s)
        return out


def section_tuples(inst: Instance, start: int = 0, stop: int | None = None) -> np.ndarray:
    n1, dim = inst.n + 1, inst.dim_e
    return all_vectors(inst.q, n1 * dim, start, stop).reshape(-1, n1, dim)


def _histogram_chunk(args):
    inst, start, stop = args
    vals = evaluate_on_sections(inst.curve, inst.form, section_tuples(inst, start, stop), inst.e)
    keys = encode_vectors(inst.q, vals)
    u, c = np.unique(keys, return_counts=True)
    return u, c.astype(np.int64)


def _single_variable_histogram(inst: Instance, var: int) -> PushforwardHistogram:
    F, curve, e, d = inst.field, inst.curve, inst.e, inst.d
    X = all_vectors(inst.q, inst.dim_e)
    exps = [0] * (inst.n + 1)
    exps[var] = d
    c = inst.form.coefficient(exps)
    acc, level = X, e
    for _ in range(d - 1):

        acc = cup(curve, acc, level, X, e)
        level += e
    vals = F.vmul(c, acc)
    keys, counts = np.unique(encode_vectors(inst.q, vals), return_counts=True)
    return PushforwardHistogram(F, inst.dim_de, keys, counts.astype(np.int64))


def build_pushforward(
    inst: Instance,
    limit: int | None = None,
    workers: int = 1,
    chunk: int = 200_000,
    separable: bool | None = None,
):
    """Histogram of f over P_e^{n+1}; diagonal forms may stay factored."""
    if separable is None:
        separable = inst.form.is_diagonal and inst.trivial_sum > (limit or 4_000_000)
    if separable:
        if not inst.form.is_diagonal:
            raise ArcError("separable pushforward needs a diagonal form")
        check_budget(inst.q ** inst.dim_e, limit, "single-variable histogram")
        factors = tuple(_single_variable_histogram(inst, v) for v in range(inst.n + 1))
        return SeparablePushforward(inst.field, inst.dim_de, factors)
    total = inst.trivial_sum
    check_budget(total, limit, "pushforward histogram")
    parts = parallel_map(_histogram_chunk, [(inst, s, t) for s, t in chunk_ranges(total, chunk)], workers)
    keys, counts = merge_histograms(parts)
    return PushforwardHistogram(inst.field, inst.dim_de, keys, counts)


def s_alpha(hist, alpha) -> CyclotomicSum:
    """S(alpha) = sum over x in P_e^{n+1} of psi(alpha(f(x)))."""
    alpha = np.asarray(alpha, dtype=np.int64)
    if alpha.shape != (hist.dim,):
        raise ArcError(f"functional has {alpha.shape} coordinates, expected ({hist.dim},)")
    return to_cyclotomic(hist.field.p, hist.sums(alpha[None, :])[0])


@dataclass(frozen=True, eq=False)
class DualFunctional:
    """alpha in P_m^v, paired with sections by the dot product of coordinates."""

    field: FiniteField
    level: int
    coords: np.ndarray

    def __call__(self, v) -> int:
        F = self.field
        return int(F.vsum(F.vmul(self.coords, np.asarray(v, dtype=np.int64)), axis=-1))

    def __neg__(self) -> DualFunctional:
        return DualFunctional(self.field, self.level, self.field.vneg(self.coords))


def all_functionals(inst: Instance) -> np.ndarray:
    check_budget(inst.q**inst.dim_de, None, "functionals")
    return all_vectors(inst.q, inst.dim_de)


# --- factoring through subschemes ----------------------------------------------------

def annihilates(F: FiniteField, alphas, V) -> np.ndarray:
    """Boolean per alpha: alpha vanishes on every row of V."""
    alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
    V = np.asarray(V, dtype=np.int64)
    if V.shape[0] == 0:
        return np.ones(alphas.shape[0], dtype=bool)
    return np.all(F.matmul(alphas, V.T) == 0, axis=1)


def factors_through(curve: CurveModel, m: int, alpha, Z: EffectiveDivisor) -> bool:
    """alpha ~ Z: alpha kills H^0(O(m*inf)(-Z))."""
    alpha = np.asarray(alpha, dtype=np.int64)
    if alpha.shape != (rr_dim(curve, m),):
        raise ArcError("functional does not match the dimension of P_m")
    return bool(annihilates(curve.field, alpha, vanishing_subspace(curve, m, Z))[0])


def annihilator_span(F: FiniteField, V, dim: int) -> np.ndarray:
    """Every functional killing the rows of V."""
    if np.asarray(V).shape[0] == 0:
        W = np.eye(dim, dtype=np.int64)
    else:
        W = kernel_basis(F, V)
    if W.shape[0] == 0:
        return np.zeros((1, dim), dtype=np.int64)
    coeffs = all_vectors(F.q, W.shape[0])
    return F.matmul(coeffs, W)


@dataclass(frozen=True, eq=False)
class DivisorNode:
    divisor: EffectiveDivisor
    sort_key: tuple
    basis: np.ndarray  # rows span H^0(O(m*inf)(-Z))


class DivisorSearch:
    """All effective divisors of bounded degree with their vanishing subspaces.

    Nodes are ordered by (degree, support), where points are indexed as in
    :func:`enumerate_closed_points`.  The kernel is refined one jet
    coefficient at a time along a depth-first walk.
    """

    def __init__(
        self,
        curve: CurveModel,
        m: int,
        degree_bound: int,
        max_point_degree: int | None = None,
        max_mult: int | None = None,
        node_limit: int = 500_000,
    ):
        self.curve, self.m, self.degree_bound = curve, m, degree_bound
        self.max_point_degree = max(1, degree_bound if max_point_degree is None else max_point_degree)
        self.max_mult = degree_bound if max_mult is None else max_mult
        pts = [P for P in enumerate_closed_points(curve, self.max_point_degree) if P.degree <= max(degree_bound, 1)]
        self.points = pts
        self.index = {P: i for i, P in enumerate(pts)}
        self._rows = []
        for P in pts:
            rmax = min(self.max_mult, degree_bound // P.degree)
            self._rows.append(jet_rows(curve, m, P, rmax) if rmax >= 1 else None)
        dim = rr_dim(curve, m)
        nodes = [DivisorNode(EffectiveDivisor(), (0, ()), np.eye(dim, dtype=np.int64))]
        for parts, deg, V in self._walk(0, (), 0, nodes[0].basis):
            if len(nodes) >= node_limit:
                raise BudgetExceeded(f"more than {node_limit} divisors of degree <= {degree_bound}")
            key = (deg, tuple((self.index[P], r) for P, r in parts))
            nodes.append(DivisorNode(EffectiveDivisor(parts), key, V))
        nodes.sort(key=lambda nd: nd.sort_key)
        self.nodes = nodes
        self.by_divisor = {nd.divisor: i for i, nd in enumerate(nodes)}

    def _walk(self, start, parts, deg, V):
        F = self.curve.field
        for i in range(start, len(self.points)):
            P = self.points[i]
            rows = self._rows[i]
            if rows is None or deg + P.degree > self.degree_bound:
                continue
            Vc = V
            for r in range(1, rows.shape[0] + 1):
                if deg + r * P.degree > self.degree_bound:
                    break
                if Vc.shape[0]:
                    K = kernel_basis(F, F.matmul(rows[r - 1], Vc.T))
                    Vc = F.matmul(K, Vc) if K.shape[0] else np.zeros((0, Vc.shape[1]), dtype=np.int64)
                new_parts = parts + ((P, r),)
                yield new_parts, deg + r * P.degree, Vc
                yield from self._walk(i + 1, new_parts, deg + r * P.degree, Vc)

    def degree(self, i: int) -> int:
        return self.nodes[i].sort_key[0]

    def hit_matrix(self, alphas) -> np.ndarray:
        """(nodes, alphas) booleans: alpha ~ Z."""
        F = self.curve.field
        alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
        return np.stack([annihilates(F, alphas, nd.basis) for nd in self.nodes])

    def classify(self, alphas) -> tuple[np.ndarray, list[list[int]]]:
        """Minimal factoring degree per alpha (-1 if none) and the minimal nodes."""
        F = self.curve.field
        alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
        A = alphas.shape[0]
        degs = np.full(A, -1, dtype=np.int64)
        minimal: list[list[int]] = [[] for _ in range(A)]
        open_ = np.ones(A, dtype=bool)
        current = -1
        for i, nd in enumerate(self.nodes):
            deg = nd.sort_key[0]
            if deg != current:
                open_ &= degs < 0
                current = deg
                if not open_.any():
                    break
            idx = np.nonzero(open_)[0]
            hits = idx[annihilates(F, alphas[idx], nd.basis)]
            for a in hits:
                degs[a] = deg
                minimal[a].append(i)
        return degs, minimal


@dataclass(frozen=True)
class ArcClass:
    alpha: tuple[int, ...]
    min_Z: EffectiveDivisor | None
    deg_alpha: int | None
    kind: str  # "major", "minor" or "unresolved"
    minimal_count: int = 0


def arc_kind(inst: Instance, deg: int | None) -> str:
    if deg is None or deg < 0:
        return "unresolved"
    return "major" if deg <= inst.major_bound else "minor"


def minimal_subscheme(inst: Instance, search: DivisorSearch, alpha) -> ArcClass:
    alpha = np.asarray(alpha, dtype=np.int64)
    degs, minimal = search.classify(alpha[None, :])
    deg = int(degs[0])
    if deg < 0:
        return ArcClass(tuple(int(a) for a in alpha), None, None, "unresolved", 0)
    Z = search.nodes[minimal[0][0]].divisor
    return ArcClass(tuple(int(a) for a in alpha), Z, deg, arc_kind(inst, deg), len(minimal[0]))


def classify_all(inst: Instance, search: DivisorSearch, alphas) -> list[ArcClass]:
    alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
    degs, minimal = search.classify(alphas)
    out = []
    for a, deg, mins in zip(alphas, degs, minimal):
        deg = int(deg)
        Z = search.nodes[mins[0]].divisor if mins else None
        out.append(ArcClass(tuple(int(v) for v in a), Z, deg if deg >= 0 else None, arc_kind(inst, deg), len(mins)))
    return out


def intersection_violations(inst: Instance, search: DivisorSearch, alphas, hits=None) -> list:
    """Pairs alpha ~ Z1, Z2 with small union but alpha not ~ Z1 cap Z2."""
    alphas = np.atleast_2d(np.asarray(alphas, dtype=np.int64))
    hits = search.hit_matrix(alphas) if hits is None else hits
    limit = inst.d * inst.e - 2 * inst.g + 2
    bad = []
    for a in range(alphas.shape[0]):
        found = np.nonzero(hits[:, a])[0]
        if len(found) > 400:
            found = found[:400]
        for i, j in itertools.combinations(found, 2):
            Z1, Z2 = search.nodes[i].divisor, search.nodes[j].divisor
            if Z1.union(Z2).degree >= limit:
                continue
            k = search.by_divisor.get(Z1.intersection(Z2))
            if k is None or not hits[k, a]:
                bad.append((a, Z1, Z2))
    return bad


def major_mask(inst: Instance, search: DivisorSearch | None = None) -> np.ndarray:
    """Boolean over all functionals (key order): deg(alpha) <= e - 2g + 1."""
    bound = inst.major_bound
    mask = np.zeros(inst.q**inst.dim_de, dtype=bool)
    if bound < 0:
        return mask
    search = search or DivisorSearch(inst.curve, inst.d * inst.e, bound)
    for nd in search.nodes:
        if nd.sort_key[0] <= bound:
            mask[encode_vectors(inst.q, annihilator_span(inst.field, nd.basis, inst.dim_de))] = True
    return mask


# --- Artinian point counts --------------------------------------------------------------

def _series_batch_mul(F: FiniteField, a, b, r: int) -> np.ndarray:
    out = np.zeros(np.broadcast_shapes(a.shape, b.shape), dtype=np.int64)
    for i in range(r):
        out[..., i:] = F.vadd(out[..., i:], F.vmul(a[..., i : i + 1], b[..., : r - i]))
    return out


def _form_on_series(form: SymmetricForm, F: FiniteField, X, r: int) -> np.ndarray:
    """f on (..., n+1, r) truncated power series over F."""

    emb = embedding(form.field, F)
    out = np.zeros(X.shape[:-2] + (r,), dtype=np.int64)
    for exps, c in form.monomials:
        term = np.zeros(X.shape[:-2] + (r,), dtype=np.int64)
        term[..., 0] = emb[c]
        for i, k in enumerate(exps):
            for _ in range(k):
                term = _series_batch_mul(F, term, X[..., i, :], r)
        out = F.vadd(out, term)
    return out


def residue_field(form: SymmetricForm, degree: int) -> FiniteField:

    return get_field(form.field.p, form.field.k * degree)


def artinian_count_enum(
    form: SymmetricForm, degree: int, r: int, limit: int | None = None, separable: bool | None = None
) -> int:
    """#CX(O_x/m_x^r) for a closed point x of the given degree, by enumeration.

    O_x/m_x^r is kappa(x)[t]/t^r, so only the residue field size matters.
    Diagonal forms may be counted by convolving one histogram per variable.
    """
    if r < 1:
        raise ArcError("r must be >= 1")
    F = residue_field(form, degree)
    N = form.nvars
    if separable is None:
        separable = form.is_diagonal and F.q ** (N * r) > (limit or 4_000_000)
    if separable:
        if not form.is_diagonal:
            raise ArcError("separable count needs a diagonal form")
        check_budget(F.q ** (2 * r), limit, "Artinian convolution")

        S = all_vectors(F.q, r)
        emb = embedding(form.field, F)
        hists = []
        for v in range(N):
            exps = [0] * N
            exps[v] = form.d
            c = form.coefficient(exps)
            if c == 0:
                hists.append((np.zeros(1, dtype=np.int64), np.array([S.shape[0]], dtype=np.int64)))
                continue
            power = S
            for _ in range(form.d - 1):
                power = _series_batch_mul(F, power, S, r)
            vals = F.vmul(emb[c], power)
            keys, counts = np.unique(encode_vectors(F.q, vals), return_counts=True)
            hists.append((keys, counts.astype(np.int64)))
        acc = hists[0]
        for h in hists[1:]:
            acc = convolve_histograms(F, acc, h, r, limit)
        hit = np.nonzero(acc[0] == 0)[0]
        return int(acc[1][hit[0]]) if hit.size else 0
    total = F.q ** (N * r)
    check_budget(total, limit, "Artinian enumeration")
    count = 0
    for s, t in chunk_ranges(total, 500_000):
        X = all_vectors(F.q, N * r, s, t).reshape(-1, N, r)
        vals = _form_on_series(form, F, X, r)
        count += int(np.all(vals == 0, axis=-1).sum())
    return count


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def artinian_count_formula(form: SymmetricForm, degree: int, r: int, cx_star: int | None = None):
    """Closed form for |CX(O_x/m_x^r)| from the smooth-cone Hensel argument.

    Returns (normalized value, integer count); ``cx_star`` is #(CX minus 0)(kappa),
    enumerated when not supplied.
    """
    if r < 1:
        raise ArcError("r must be >= 1")
    Q = residue_field(form, degree).q
    n, d = form.n, form.d
    if cx_star is None:
        cx_star = artinian_count_enum(form, degree, 1) - 1
    star = Fraction(cx_star, Q**n)
    c = _ceil_div(r, d)
    k = d - n - 1
    if k == 0:
        ratio = Fraction(c)
    else:
        ratio = (1 - Fraction(Q) ** (c * k)) / (1 - Fraction(Q) ** k)
    value = ratio * star + Fraction(Q) ** (-(n + 1) * c + r)
    count = value * Q ** (r * n)
    if count.denominator != 1:  # pragma: no cover - the closed form is integral
        raise ArcError("closed form did not produce an integer count")
    return value, int(count)


def artinian_difference_formula(form: SymmetricForm, degree: int, r: int, cx_star: int) -> Fraction:
    """|CX(r x)| - |CX((r-1) x)| by the two-case rule (r >= 2)."""
    if r < 2:
        raise ArcError("the difference rule needs r >= 2")
    Q = Fraction(residue_field(form, degree).q)
    n, d = form.n, form.d
    star = Fraction(cx_star) / Q**n
    c, c1 = _ceil_div(r, d), _ceil_div(r - 1, d)
    tail = Q ** (-(n + 1) * c + r) - Q ** (-(n + 1) * c1 + r - 1)
    if r % d == 1 % d:
        return star * Q ** ((c - 1) * (d - n - 1)) + tail
    return tail


# --- major arcs, census, partition identity ---------------------------------------------------

@dataclass(frozen=True)
class MajorArcCheck:
    divisor: EffectiveDivisor
    lhs: CyclotomicSum
    rhs: Fraction
    num_alphas: int

    @property
    def holds(self) -> bool:
        return self.lhs.is_integer() and Fraction(self.lhs.as_integer()) == self.rhs


def cx_of_divisor(form: SymmetricForm, Z: EffectiveDivisor, limit: int | None = None) -> int:
    """#CX(Z) as the product of local Artinian counts."""
    return math.prod(artinian_count_enum(form, P.degree, r, limit) for P, r in Z.parts)


def sum_over_factoring(inst: Instance, hist, Z: EffectiveDivisor) -> tuple[np.ndarray, int]:
    """sum_{alpha ~ Z} S(alpha) as a count vector, with the number of such alpha."""
    V = vanishing_subspace(inst.curve, inst.d * inst.e, Z)
    alphas = annihilator_span(inst.field, V, inst.dim_de)
    return hist.sums(alphas).sum(axis=0), alphas.shape[0]


def major_arc_sum_check(inst: Instance, hist, Z: EffectiveDivisor, limit: int | None = None) -> MajorArcCheck:
    if Z.degree > inst.major_bound:
        raise ArcError(f"deg Z = {Z.degree} exceeds the major-arc range e-2g+1 = {inst.major_bound}")
    total, count = sum_over_factoring(inst, hist, Z)
    lhs = to_cyclotomic(inst.p, total)
    q, n = inst.q, inst.n
    rhs = Fraction(q ** ((n + 1) * (inst.e + 1 - inst.g)) * cx_of_divisor(inst.form, Z, limit), q ** (n * Z.degree))
    return MajorArcCheck(Z, lhs, rhs, count)


def minimal_sum_prediction(inst: Instance, Z: EffectiveDivisor) -> Fraction:
    """q^{(n+1)(e+1-g)} prod_i (|CX(r_i x_i)| - |CX((r_i - 1) x_i)|)."""
    out = Fraction(inst.q ** ((inst.n + 1) * (inst.e + 1 - inst.g)))
    for P, r in Z.parts:
        Q = residue_field(inst.form, P.degree).q
        hi = Fraction(artinian_count_enum(inst.form, P.degree, r), Q ** (inst.n * r))
        lo = Fraction(artinian_count_enum(inst.form, P.degree, r - 1), Q ** (inst.n * (r - 1))) if r > 1 else Fraction(1)
        out *= hi - lo
    return out


@dataclass(frozen=True)
class CensusResult:
    count_Me: int
    count_bpf: int | None
    mor_count: Fraction | None


def _vanishing_masks(inst: Instance, sections) -> np.ndarray:
    """(num sections, words) bitmasks of closed points of degree <= e where each vanishes."""
    curve, e, F = inst.curve, inst.e, inst.field
    pts = enumerate_closed_points(curve, max(1, e))
    words = (len(pts) + 62) // 63
    masks = np.zeros((sections.shape[0], words), dtype=np.int64)
    for i, P in enumerate(pts):
        rows = jet_rows(curve, e, P, 1)[0]  # (deg, dim)
        vanish = np.all(F.matmul(sections, rows.T) == 0, axis=1)
        masks[vanish, i // 63] |= np.int64(1) << np.int64(i % 63)
    return masks


def census(inst: Instance, limit: int | None = None, bpf: bool = True) -> CensusResult:
    """Count f(s) = 0 over P_e^{n+1}, and the base-point-free solutions.

    A nonzero section of O(e*inf) has zeros of total degree e, so common zeros
    of a nonzero tuple only occur at points of degree <= e; the zero tuple
    vanishes at infinity.  The degree-e truncation is therefore exact.
    """
    total = inst.trivial_sum
    check_budget(total, limit, "census")
    q, n1, dim = inst.q, inst.n + 1, inst.dim_e
    masks = _vanishing_masks(inst, all_vectors(q, dim)) if bpf else None
    count_me = 0
    count_bpf = 0
    for s, t in chunk_ranges(total, 200_000):
        X = section_tuples(inst, s, t)
        vals = evaluate_on_sections(inst.curve, inst.form, X, inst.e)
        zero = np.all(vals == 0, axis=-1)
        count_me += int(zero.sum())
        if bpf:
            keys = encode_vectors(q, X[zero])  # (Z, n+1)
            common = masks[keys[:, 0]]
            for i in range(1, n1):
                common = common & masks[keys[:, i]]
            count_bpf += int(np.all(common == 0, axis=1).sum())
    if not bpf:
        return CensusResult(count_me, None, None)
    return CensusResult(count_me, count_bpf, Fraction(count_bpf, q - 1))


def census_count(inst: Instance, hist=None, limit: int | None = None) -> int:
    """count_Me through the pushforward (fast path for large separable instances)."""
    if hist is None:
        hist = build_pushforward(inst, limit)
    if isinstance(hist, SeparablePushforward):
        return hist.count_zero(limit)
    return hist.count_zero()


def partition_identity(inst: Instance, transform: np.ndarray, count_me: int) -> tuple[int, int]:
    """(sum_alpha S(alpha), q^{de-g+1} count_Me), equal when the identity holds."""
    total = to_cyclotomic(inst.p, transform.sum(axis=0))
    lhs = total.as_integer() if total.is_integer() else None
    return lhs, inst.q ** inst.dim_de * count_me


@dataclass(frozen=True)
class MinorArcTail:
    q: int
    minor_count: int
    major_count: int
    tail: CyclotomicSum
    normalized_abs: tuple[float, ...]


def minor_arc_tail(inst: Instance, transform: np.ndarray, mask: np.ndarray | None = None) -> MinorArcTail:
    """q^{-(n+1)(e+1-g)} sum over minor alpha of S(alpha), at every embedding."""
    mask = major_mask(inst) if mask is None else mask
    minor_total = transform[~mask].sum(axis=0)
    tail = to_cyclotomic(inst.p, minor_total)
    scale = float(inst.q ** ((inst.n + 1) * (inst.e + 1 - inst.g)))
    vals = embedding_values(minor_total[None, :])[0]
    return MinorArcTail(inst.q, int((~mask).sum()), int(mask.sum()), tail, tuple(float(abs(v)) / scale for v in vals))


@dataclass(frozen=True)
class DimensionRow:
    q: int
    count: int
    mu_hat: int
    ratio: Fraction
    log_ratio: float


def dimension_probe(instances, counts) -> list[DimensionRow]:
    """count_Me / q^{mu_hat} for each level of a field tower."""
    rows = []
    for inst, c in zip(instances, counts):
        ratio = Fraction(c, 1) / Fraction(inst.q) ** inst.mu_hat
        rows.append(DimensionRow(inst.q, c, inst.mu_hat, ratio, math.log(c) / math.log(inst.q) - inst.mu_hat))
    return rows
