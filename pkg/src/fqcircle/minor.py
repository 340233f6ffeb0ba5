"""Counts behind Weyl differencing and the shrinking argument.

Every count here has the shape ``#{tuples : alpha(Psi_j(tuple) * x) = 0 for all
test sections x and all j}``.  The conditions are linear in each slot, so the
last slot is never enumerated: for a fixed choice of the other slots the
solutions form a kernel, whose size is ``q^nullity``.

With outer slots fixed, write ``W[j, k]`` for the part of ``Psi_j`` that
multiplies ``y_k`` (a section of level ``lt``), and
``H[t, b, c] = alpha(basis_t * basis_b * basis_c)``.  The linear system on the
last slot ``y`` has matrix ``M[(j, c), (k, b)] = sum_t W[j, k, t] H[t, b, c]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .algebra import all_vectors, batch_rank
from .arcs import (
    DivisorSearch,
    Instance,
    embedding_values,
)
from .budget import check_budget, chunk_ranges
from .curves import contract, cup, cup_tensor, rr_dim
from .forms import psi_j


class MinorArcError(ValueError):
    pass


# --- the linear systems ---------------------------------------------------------

@lru_cache(maxsize=None)
def _triple_constants(curve, lt: int, lb: int, lc: int) -> np.ndarray:
    """G[t, b, c, u]: coordinate u of basis_t * basis_b * basis_c in P_{lt+lb+lc}."""
    T1 = cup_tensor(curve, lt, lb)
    T2 = cup_tensor(curve, lt + lb, lc)
    G = contract(curve.field, T1, T2)
    G.setflags(write=False)
    return G


def functional_tensor(inst: Instance, alpha, lt: int, lb: int, lc: int) -> np.ndarray:
    """H[t, b, c] = alpha(basis_t * basis_b * basis_c), levels summing to de."""
    if lt + lb + lc != inst.d * inst.e:
        raise MinorArcError("levels must add up to de")
    F = inst.field
    G = _triple_constants(inst.curve, lt, lb, lc)
    return F.vsum(F.vmul(G, np.asarray(alpha, dtype=np.int64)), axis=-1)


def outer_weights(inst: Instance, outer, levels) -> tuple[np.ndarray, int]:
    """W[..., j, k, t]: coefficient section of y_k in Psi_j with outer slots fixed."""
    F, curve, form = inst.field, inst.curve, inst.form
    d, N = form.d, form.nvars
    dfact = F.from_int(math.factorial(d))
    lt = sum(levels)
    if not outer:
        W = np.zeros((N, N, 1), dtype=np.int64)
        for j in range(N):
            for k in range(N):
                W[j, k, 0] = F.mul(dfact, int(form.tensor[k, j]))
        return W, 0
    outer = [np.asarray(x, dtype=np.int64) for x in outer]
    batch = np.broadcast_shapes(*[x.shape[:-2] for x in outer])
    W = np.zeros(batch + (N, N, rr_dim(curve, lt)), dtype=np.int64)
    for idx in itertools.product(range(N), repeat=d - 2):
        coeffs = form.tensor[idx]  # (k, j)
        if not coeffs.any():
            continue
        acc, level = outer[0][..., idx[0], :], levels[0]
        for x, lv, i in zip(outer[1:], levels[1:], idx[1:]):
            acc = cup(curve, acc, level, x[..., i, :], lv)
            level += lv
        for j in range(N):
            for k in range(N):
                a = int(coeffs[k, j])
                if a:
                    W[..., j, k, :] = F.vadd(W[..., j, k, :], F.vmul(F.mul(dfact, a), acc))
    return W, lt


def system_matrices(inst: Instance, W, H) -> np.ndarray:
    """M[..., (j, c), (k, b)] from W[..., j, k, t] and H[t, b, c]."""
    F = inst.field
    N = inst.n + 1
    dt, db, dc = H.shape
    if F.k == 1:
        M = np.einsum("...jkt,tbc->...jckb", W, H) % F.p
    else:
        M = np.zeros(W.shape[:-3] + (N, dc, N, db), dtype=np.int64)
        for t in range(dt):
            term = F.vmul(W[..., :, None, :, None, t], np.transpose(H[t])[None, :, None, :])
            M = F.vadd(M, term)
    return M.reshape(W.shape[:-3] + (N * dc, N * db))


def _slot_space_size(inst: Instance, levels) -> int:
    return math.prod(inst.q ** ((inst.n + 1) * rr_dim(inst.curve, lv)) for lv in levels)


def _outer_tuples(inst: Instance, levels, start: int, stop: int):
    """Slice [start, stop) of the product of slot spaces, as a list of slot arrays."""
    N = inst.n + 1
    dims = [N * rr_dim(inst.curve, lv) for lv in levels]
    flat = all_vectors(inst.q, sum(dims), start, stop)
    out, pos = [], 0
    for lv, dm in zip(levels, dims):
        out.append(flat[:, pos : pos + dm].reshape(-1, N, rr_dim(inst.curve, lv)))
        pos += dm
    return out


def _kernel_count(inst: Instance, alpha, outer_levels, slot_level: int, test_level: int, limit=None):
    """sum over outer tuples of q^nullity of the last-slot system."""
    if slot_level < 0 or rr_dim(inst.curve, slot_level) == 0:
        return _slot_space_size(inst, outer_levels)
    lt = sum(outer_levels)
    H = functional_tensor(inst, alpha, lt, slot_level, test_level)
    ncols = (inst.n + 1) * rr_dim(inst.curve, slot_level)
    total_outer = _slot_space_size(inst, outer_levels)
    check_budget(total_outer, limit, "outer-slot enumeration")
    if not outer_levels:
        W, _ = outer_weights(inst, [], [])
        M = system_matrices(inst, W, H)[None]
        return inst.q ** int(ncols - batch_rank(inst.field, M)[0])
    count = 0
    for s, t in chunk_ranges(total_outer, 20_000):
        outer = _outer_tuples(inst, outer_levels, s, t)
        W, _ = outer_weights(inst, outer, outer_levels)
        M = system_matrices(inst, W, H)
        nullity = ncols - batch_rank(inst.field, M)
        vals, cnt = np.unique(nullity, return_counts=True)
        count += sum(int(c) * inst.q ** int(v) for v, c in zip(vals, cnt))
    return count


def slot_levels(inst: Instance, s: int, ell: int) -> list[int]:
    return [inst.e - s] * ell + [inst.e] * (inst.d - 1 - ell)


def n_s_ell(inst: Instance, alpha, s: int, ell: int, limit=None) -> int:
    """N_{s,l}: first l slots in P_{e-s}, the rest in P_e, tested against P_{e+ls}."""
    if not 0 <= ell <= inst.d - 1:
        raise MinorArcError("l must lie in [0, d-1]")
    levels = slot_levels(inst, s, ell)
    return _kernel_count(inst, alpha, levels[:-1], levels[-1], inst.e + ell * s, limit)


def n_alpha(inst: Instance, alpha, limit=None) -> int:
    return n_s_ell(inst, alpha, 0, 0, limit)


def n_s(inst: Instance, alpha, s: int, limit=None) -> int:
    return n_s_ell(inst, alpha, s, inst.d - 1, limit)


def n_brute_force(inst: Instance, alpha, s: int = 0, ell: int = 0, limit=None) -> int:
    """Oracle: enumerate every slot and test alpha(Psi_j * basis_c) directly."""
    levels = slot_levels(inst, s, ell)
    test = inst.e + ell * s
    total = _slot_space_size(inst, levels)
    check_budget(total, limit, "brute-force N")
    F, curve = inst.field, inst.curve
    alpha = np.asarray(alpha, dtype=np.int64)
    dt = rr_dim(curve, test)
    basis = np.eye(dt, dtype=np.int64)
    plevel = sum(levels)
    count = 0
    for a, b in chunk_ranges(total, 50_000):
        slots = _outer_tuples(inst, levels, a, b)
        ok = np.ones(b - a, dtype=bool)
        for j in range(inst.n + 1):
            psi = psi_j(curve, inst.form, j, slots, levels)
            prods = cup(curve, psi[:, None, :], plevel, basis[None, :, :], test)
            vals = F.vsum(F.vmul(prods, alpha), axis=-1)
            ok &= np.all(vals == 0, axis=1)
        count += int(ok.sum())
    return count


def k_counts(inst: Instance, alpha, s: int, ell: int, fixed) -> tuple[int, int]:
    """(K_{s,l}, K'_{s,l}) for fixed slots other than the (l+1)st.

    ``fixed`` lists the d-2 fixed slots in order: l of level e-s, then the
    rest of level e.  Slot symmetry of Psi_j lets the variable slot go last.
    """
    if not 0 <= ell <= inst.d - 2:
        raise MinorArcError("l must lie in [0, d-2]")
    levels = [inst.e - s] * ell + [inst.e] * (inst.d - 2 - ell)
    if len(fixed) != len(levels):
        raise MinorArcError(f"expected {len(levels)} fixed slots")
    fixed = [np.asarray(x, dtype=np.int64)[None] for x in fixed]
    lt = sum(levels)
    out = []
    for slot_level, test_level in ((inst.e, inst.e + ell * s), (inst.e - s, inst.e + (ell + 1) * s)):
        if slot_level < 0 or rr_dim(inst.curve, slot_level) == 0:
            out.append(1)
            continue
        H = functional_tensor(inst, alpha, lt, slot_level, test_level)
        W, _ = outer_weights(inst, fixed, levels)
        M = system_matrices(inst, W if fixed else W[None], H)
        ncols = (inst.n + 1) * rr_dim(inst.curve, slot_level)
        out.append(inst.q ** int(ncols - batch_rank(inst.field, M)[0]))
    return out[0], out[1]


# --- parameter choices and bounds ---------------------------------------------------

def choose_s(degZ: int, d: int, e: int, g: int) -> int:
    """s = max(floor((degZ-e+2g-2)/(d-1)), floor(e-degZ/(d-1)), 2g-2, 1) + 1."""
    a = math.floor(Fraction(degZ - e + 2 * g - 2, d - 1))
    b = math.floor(e - Fraction(degZ, d - 1))
    return max(a, b, 2 * g - 2, 1) + 1


def psi_vanishing_hypothesis(degZ: int, d: int, e: int, g: int, s: int) -> bool:
    return s > max(Fraction(degZ - e + 2 * g - 2, d - 1), e - Fraction(degZ, d - 1))


def shrink_exponent(inst: Instance, s: int) -> Fraction:
    """Exponent of q bounding N / N_s."""
    base = Fraction((inst.d - 1) * (inst.n + 1) * s)
    if inst.g == 1:
        return base
    return base + Fraction((inst.n + 1) * (inst.g + 1), 2)


def k_exponent(inst: Instance, s: int, ell: int) -> Fraction:
    """Exponent of q bounding K_{s,l} / K'_{s,l}."""
    if inst.g == 1 or ell >= 1:
        return Fraction((inst.n + 1) * s)
    return (inst.n + 1) * (s + Fraction(inst.g + 1, 2))


def ratio_within(num: int, den: int, q: int, exponent: Fraction) -> bool:
    """num / den <= q^exponent, compared with integers only."""
    a, b = exponent.numerator, exponent.denominator
    if a >= 0:
        return num**b <= q**a * den**b
    return num**b * q ** (-a) <= den**b


@dataclass(frozen=True)
class KRatio:
    ell: int
    s: int
    K: int
    K_prime: int
    exponent: Fraction

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.K, self.K_prime)

    def holds(self, q: int) -> bool:
        return ratio_within(self.K, self.K_prime, q, self.exponent)


def k_ratio_check(inst: Instance, alpha, s: int, ell: int, fixed) -> KRatio:
    if s < max(2 * inst.g - 1, 2):
        raise MinorArcError("the section-count bound needs s >= max(2g-1, 2)")
    K, Kp = k_counts(inst, alpha, s, ell, fixed)
    return KRatio(ell, s, K, Kp, k_exponent(inst, s, ell))


@dataclass(frozen=True)
class ShrinkRecord:
    deg_alpha: int
    s: int
    N: int
    N_s: int
    exponent: Fraction
    holds: bool
    h0_valid: bool


def shrink_check(inst: Instance, alpha, deg_alpha: int, limit=None) -> ShrinkRecord:
    """N(alpha) / N_s(alpha) against the shrinking bound, s from the degree of alpha."""
    s = choose_s(deg_alpha, inst.d, inst.e, inst.g)
    if s < max(2 * inst.g - 1, 2):
        raise MinorArcError("choose_s returned s below max(2g-1, 2)")
    N = n_alpha(inst, alpha, limit)
    Ns = n_s(inst, alpha, s, limit)
    exp = shrink_exponent(inst, s)
    return ShrinkRecord(deg_alpha, s, N, Ns, exp, ratio_within(N, Ns, inst.q, exp), inst.e - s > 2 * inst.g - 2)


@dataclass(frozen=True)
class PsiVanishingResult:
    s: int
    hypothesis: bool
    tuples_checked: int
    counterexamples: int


def psi_vanishing_check(inst: Instance, alpha, s: int, deg_alpha: int, limit=None) -> PsiVanishingResult:
    """Tuples in P_{e-s} killed by alpha against P_{e+(d-1)s} must have Psi_j = 0.

    Counterexamples are counted exactly: for fixed outer slots, the last slot
    ranges over ker M, and those with every Psi_j zero form ker M cap ker Phi.
    """
    curve, F = inst.curve, inst.field
    hyp = psi_vanishing_hypothesis(deg_alpha, inst.d, inst.e, inst.g, s)
    lv = inst.e - s
    if lv < 0 or rr_dim(curve, lv) == 0:
        return PsiVanishingResult(s, hyp, 1, 0)
    outer_levels = [lv] * (inst.d - 2)
    test = inst.e + (inst.d - 1) * s
    lt = sum(outer_levels)
    H = functional_tensor(inst, alpha, lt, lv, test)
    T = cup_tensor(curve, lt, lv)  # (t, b, u)
    N = inst.n + 1
    ncols = N * rr_dim(curve, lv)
    total_outer = _slot_space_size(inst, outer_levels)
    check_budget(total_outer, limit, "psi-vanishing outer slots")
    bad = 0
    for a, b in chunk_ranges(total_outer, 20_000):
        if outer_levels:
            outer = _outer_tuples(inst, outer_levels, a, b)
            W, _ = outer_weights(inst, outer, outer_levels)
        else:
            W, _ = outer_weights(inst, [], [])
            W = W[None]
        M = system_matrices(inst, W, H)
        Phi = system_matrices(inst, W, T)
        both = np.concatenate([M, Phi], axis=-2)
        k1 = ncols - batch_rank(F, M)
        k2 = ncols - batch_rank(F, both)
        bad += int(sum(inst.q ** int(x) - inst.q ** int(y) for x, y in zip(k1, k2)))
    return PsiVanishingResult(s, hyp, total_outer * inst.q**ncols, bad)


# --- Weyl differencing -------------------------------------------------------------------

@dataclass(frozen=True)
class WeylRecord:
    lhs: tuple[float, ...]
    rhs: float
    N: int
    holds: bool
    margin: float


def weyl_check(inst: Instance, s_counts, N: int, rel_tol: float = 1e-6) -> WeylRecord:
    """|S(alpha)|^{2^{d-1}} <= (#P_e^{n+1})^{2^{d-1}-d+1} N(alpha) at each embedding."""
    k = 2 ** (inst.d - 1)
    vals = embedding_values(np.asarray(s_counts)[None, :])[0]
    lhs = tuple(float(abs(v)) ** k for v in vals)
    rhs = float(inst.trivial_sum ** (k - inst.d + 1) * N)
    worst = max(lhs)
    holds = all(x * (1 - rel_tol) <= rhs for x in lhs)
    return WeylRecord(lhs, rhs, N, holds, rhs - worst)


# --- sampling minor arcs and the N_s scaling probe -------------------------------------

def sample_functionals(inst: Instance, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.integers(0, inst.q, size=(count, inst.dim_de), dtype=np.int64)


def classify_degrees(inst: Instance, alphas, search: DivisorSearch | None = None) -> np.ndarray:
    """deg(alpha) by a complete search up to the factoring bound."""
    bound = inst.factoring_bound
    search = search or DivisorSearch(inst.curve, inst.d * inst.e, bound)
    degs, _ = search.classify(alphas)
    return degs


def minor_s_values(inst: Instance) -> dict[int, int]:
    """s chosen for each minor degree between e-2g+2 and the factoring bound."""
    return {D: choose_s(D, inst.d, inst.e, inst.g) for D in range(inst.major_bound + 1, inst.factoring_bound + 1)}


@dataclass(frozen=True)
class ScalingRow:
    q: int
    s: int
    h0: int
    N_s: int
    ratio: Fraction


def ns_scaling_row(inst: Instance, alpha, s: int) -> ScalingRow:
    """N_s(alpha) / q^{(d-2)(n+1) h0(L(-s inf))}."""
    h0 = rr_dim(inst.curve, inst.e - s)
    Ns = n_s(inst, alpha, s)
    return ScalingRow(inst.q, s, h0, Ns, Fraction(Ns, inst.q ** ((inst.d - 2) * (inst.n + 1) * h0)))
