"""Exact arithmetic over F_q and Z[zeta_p], and dense linear algebra over F_q.

Field elements are encoded as Python/numpy integers ``0 <= a < q``: the
element ``c_0 + c_1 t + ... + c_{k-1} t^{k-1}`` of ``F_p[t]/(modulus)`` is the
integer ``sum c_i p^i``.  With this encoding the prime field F_p sits inside
every F_{p^k} as the integers ``0..p-1``.

Hot loops work on numpy arrays of encoded elements through the ``v*`` methods
of :class:`FiniteField`; :class:`FieldElement` is a thin operator-overloading
wrapper for interactive use and tests.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy

# tables of size q*q are only materialised below this order
TABLE_LIMIT = 1024


class FieldError(ValueError):
    pass


def is_prime(n: int) -> bool:
    return bool(sympy.isprime(n))


# --- polynomials over F_p, coefficient lists low -> high ---------------------

def _trim(a):
    a = list(a)
    while a and a[-1] == 0:
        a.pop()
    return a


def _pmod(a, m, p):
    a = _trim(a)
    m = _trim(m)
    inv = pow(m[-1], -1, p)
    while len(a) >= len(m):
        c = a[-1] * inv % p
        shift = len(a) - len(m)
        for i, mi in enumerate(m):
            a[shift + i] = (a[shift + i] - c * mi) % p
        a = _trim(a)
    return a


def _pmul(a, b, p):
    if not a or not b:
        return []
    out = [0] * (len(a) + len(b) - 1)
    for i, ai in enumerate(a):
        if ai:
            for j, bj in enumerate(b):
                out[i + j] = (out[i + j] + ai * bj) % p
    return _trim(out)


def is_irreducible(poly, p: int) -> bool:
    """Irreducibility over F_p of a coefficient list (low -> high)."""
    poly = _trim([c % p for c in poly])
    if len(poly) < 2:
        return False
    x = sympy.Symbol("x")
    return bool(sympy.Poly(list(reversed(poly)), x, modulus=p).is_irreducible)


@lru_cache(maxsize=None)
def least_irreducible(p: int, k: int) -> tuple[int, ...]:
    """Lexicographically least monic irreducible of degree k (low -> high)."""
    for code in range(p**k):
        coeffs = [(code // p**i) % p for i in range(k)] + [1]
        if is_irreducible(coeffs, p):
            return tuple(coeffs)
    raise FieldError(f"no irreducible polynomial of degree {k} over F_{p}")


# --- the field ---------------------------------------------------------------

class FiniteField:
    """F_{p^k} with int-encoded elements and log/exp tables."""

    def __init__(self, p: int, k: int = 1):
        if not is_prime(p):
            raise FieldError(f"{p} is not prime")
        if k < 1:
            raise FieldError("extension degree must be >= 1")
        self.p, self.k, self.q = p, k, p**k
        self.modulus = least_irreducible(p, k)
        q = self.q
        self.weights = p ** np.arange(k, dtype=np.int64)
        idx = np.arange(q, dtype=np.int64)
        self.digits = (idx[:, None] // self.weights[None, :]) % p
        self._build_log_tables()
        self.neg_table = self.recompose((-self.digits) % p)
        self.inv_table = np.zeros(q, dtype=np.int64)
        nz = idx[1:]
        self.inv_table[1:] = self.exp[(-self.log[nz]) % (q - 1)]
        if q <= TABLE_LIMIT:
            d = self.digits
            self.add_table = self.recompose((d[:, None, :] + d[None, :, :]) % p)
            a, b = np.meshgrid(idx, idx, indexing="ij")
            self.mul_table = self._mul_logs(a, b)
        else:
            self.add_table = None
            self.mul_table = None
        self.trace_table = self._trace_all()

    def __repr__(self):
        return f"FiniteField(p={self.p}, k={self.k})"

    def __reduce__(self):
        return (get_field, (self.p, self.k))

    # table construction
    def _mul_raw(self, a: int, b: int) -> int:
        p, k = self.p, self.k
        da = [(a // p**i) % p for i in range(k)]
        db = [(b // p**i) % p for i in range(k)]
        prod = _pmod(_pmul(_trim(da), _trim(db), p), list(self.modulus), p)
        return sum(c * p**i for i, c in enumerate(prod))

    def _build_log_tables(self):
        q = self.q
        if q == 2:
            self.generator = 1
            self.exp = np.array([1, 1], dtype=np.int64)
            self.log = np.array([-1, 0], dtype=np.int64)
            return
        for g in range(2 if q > 2 else 1, q):
            powers = [1]
            x = g
            while x != 1:
                powers.append(x)
                x = self._mul_raw(x, g)
                if len(powers) > q - 1:
                    break
            if len(powers) == q - 1:
                break
        else:  # pragma: no cover - a finite field always has a generator
            raise FieldError("no primitive element found")
        self.generator = g
        exp = np.array(powers + powers, dtype=np.int64)
        log = np.full(q, -1, dtype=np.int64)
        log[exp[: q - 1]] = np.arange(q - 1)
        self.exp, self.log = exp, log

    def _mul_logs(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        zero = (a == 0) | (b == 0)
        out = self.exp[(self.log[a] + self.log[b]) % (self.q - 1)]
        return np.where(zero, 0, out)

    def _trace_all(self) -> np.ndarray:
        total = np.zeros(self.q, dtype=np.int64)
        x = np.arange(self.q, dtype=np.int64)
        for _ in range(self.k):
            total = self.vadd(total, x)
            x = self.vpow(x, self.p)
        if np.any(total >= self.p):  # pragma: no cover - guards a broken modulus
            raise FieldError("trace left the prime field")
        return total

    def recompose(self, digits):
        return (np.asarray(digits, dtype=np.int64) * self.weights).sum(axis=-1)

    # scalar arithmetic
    def add(self, a: int, b: int) -> int:
        if self.k == 1:
            return (a + b) % self.p
        if self.add_table is not None:
            return int(self.add_table[a, b])
        return int(self.recompose((self.digits[a] + self.digits[b]) % self.p))

    def neg(self, a: int) -> int:
        return int(self.neg_table[a])

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        if self.k == 1:
            return a * b % self.p
        return int(self.exp[self.log[a] + self.log[b]])

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("inverse of zero in a finite field")
        return int(self.inv_table[a])

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            if e < 0:
                raise ZeroDivisionError("zero to a negative power")
            return 1 if e == 0 else 0
        return int(self.exp[(int(self.log[a]) * e) % (self.q - 1)])

    def from_int(self, n: int) -> int:
        """Image of the rational integer n."""
        return n % self.p

    def trace(self, a: int) -> int:
        return int(self.trace_table[a])

    def frobenius(self, a: int, j: int = 1) -> int:
        return self.pow(a, self.p**j)

    def element(self, value: int) -> FieldElement:
        """Element with encoding ``value``; negative integers are read in F_p."""
        value = int(value)
        if value < 0:
            return FieldElement(self, self.from_int(value))
        if value >= self.q:
            raise FieldError(f"{value} is not an encoding of an element of F_{self.q}")
        return FieldElement(self, value)

    def from_coeffs(self, coeffs) -> FieldElement:
        coeffs = [int(c) % self.p for c in coeffs]
        if len(coeffs) > self.k:
            raise FieldError("too many coefficients for this field")
        return FieldElement(self, sum(c * self.p**i for i, c in enumerate(coeffs)))

    def elements(self):
        return [FieldElement(self, a) for a in range(self.q)]

    # vectorised arithmetic on arrays of encoded elements
    def vadd(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.k == 1:
            return (a + b) % self.p
        if self.add_table is not None:
            return self.add_table[a, b]
        return self.recompose((self.digits[a] + self.digits[b]) % self.p)

    def vneg(self, a):
        a = np.asarray(a, dtype=np.int64)
        if self.k == 1:
            return (-a) % self.p
        return self.neg_table[a]

    def vsub(self, a, b):
        return self.vadd(a, self.vneg(b))

    def vmul(self, a, b):
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.k == 1:
            return (a * b) % self.p
        if self.mul_table is not None:
            return self.mul_table[a, b]
        return self._mul_logs(a, b)

    def vinv(self, a):
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("inverse of zero in a finite field")
        return self.inv_table[a]

    def vpow(self, a, e: int):
        a = np.asarray(a, dtype=np.int64)
        if e == 0:
            return np.ones_like(a)
        out = self.exp[(self.log[a] * e) % (self.q - 1)]
        return np.where(a == 0, 0, out)

    def vsum(self, a, axis):
        a = np.asarray(a, dtype=np.int64)
        if self.k == 1:
            return a.sum(axis=axis) % self.p
        axis = axis % a.ndim
        return self.recompose(self.digits[a].sum(axis=axis) % self.p)

    def vtrace(self, a):
        return self.trace_table[np.asarray(a, dtype=np.int64)]

    def matmul(self, a, b):
        """Matrix product over F_q."""
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.k == 1:
            return (a @ b) % self.p
        out = np.zeros(a.shape[:-1] + b.shape[1:], dtype=np.int64)
        for i in range(a.shape[-1]):
            out = self.vadd(out, self.vmul(a[..., i, None], b[i][None, :]))
        return out

    def scale_fp(self, a, t):
        """Contract the last axis of F_q array ``a`` with an F_p tensor ``t``.

        ``t`` has shape ``a.shape[-1] + rest``; entries must lie in F_p.  Works
        through the digit decomposition because F_p-scalars act coordinatewise.
        """
        a = np.asarray(a, dtype=np.int64)
        t = np.asarray(t, dtype=np.int64)
        if self.k == 1:
            return np.tensordot(a, t, axes=([a.ndim - 1], [0])) % self.p
        d = self.digits[a]  # (..., n, k)
        out = np.tensordot(d, t, axes=([a.ndim - 1], [0]))  # (..., k, rest)
        out = np.moveaxis(out, a.ndim - 1, -1) % self.p
        return self.recompose(out)


@lru_cache(maxsize=None)
def get_field(p: int, k: int = 1) -> FiniteField:
    return FiniteField(p, k)


@dataclass(frozen=True)
class FieldElement:
    field: FiniteField
    value: int

    @property
    def coeffs(self) -> tuple[int, ...]:
        return tuple(int(c) for c in self.field.digits[self.value])

    def _coerce(self, other):
        if isinstance(other, FieldElement):
            if other.field is not self.field:
                raise FieldError("elements of different fields")
            return other.value
        if isinstance(other, int):
            return self.field.from_int(other)
        return NotImplemented

    def __add__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.add(self.value, o))

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.sub(self.value, o))

    def __rsub__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.sub(o, self.value))

    def __mul__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.mul(self.value, o))

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        return FieldElement(self.field, self.field.div(self.value, o))

    def __neg__(self):
        return FieldElement(self.field, self.field.neg(self.value))

    def __pow__(self, e: int):
        return FieldElement(self.field, self.field.pow(self.value, e))

    def __bool__(self):
        return self.value != 0

    def __repr__(self):
        return f"GF({self.field.q})({self.value})"


def trace_to_prime(x: FieldElement) -> int:
    """Absolute trace Tr_{F_q/F_p}(x) as an integer in [0, p)."""
    return x.field.trace(x.value)


# --- subfield embeddings -----------------------------------------------------

@lru_cache(maxsize=None)
def embedding(small: FiniteField, big: FiniteField) -> np.ndarray:
    """Table of a field embedding F_{p^a} -> F_{p^b} (a | b).

    The generator t of ``small`` goes to the least (by encoding) root of
    ``small.modulus`` in ``big``, so the choice is reproducible.
    """
    if small.p != big.p or big.k % small.k:
        raise FieldError(f"{small} does not embed in {big}")
    if small.k == 1:
        return np.arange(small.q, dtype=np.int64)
    mod = small.modulus
    xs = np.arange(big.q, dtype=np.int64)
    acc = np.zeros(big.q, dtype=np.int64)
    for c in reversed(mod):
        acc = big.vadd(big.vmul(acc, xs), np.full_like(xs, c))
    roots = np.nonzero(acc == 0)[0]
    beta = int(roots[0])
    table = np.zeros(small.q, dtype=np.int64)
    for a in range(small.q):
        val = 0
        for c in reversed([int(c) for c in small.digits[a]]):
            val = big.add(big.mul(val, beta), c)
        table[a] = val
    return table


@lru_cache(maxsize=None)
def restriction_inverse(small: FiniteField, big: FiniteField) -> dict:
    table = embedding(small, big)
    return {int(v): a for a, v in enumerate(table)}


def relative_trace(small: FiniteField, big: FiniteField, z: int) -> int:
    """Tr_{big/small}(z), returned in ``small``'s encoding."""
    m = big.k // small.k
    total, x = 0, z
    for _ in range(m):
        total = big.add(total, x)
        x = big.pow(x, small.q)
    inv = restriction_inverse(small, big)
    if total not in inv:  # pragma: no cover
        raise FieldError("relative trace left the subfield")
    return inv[total]


# --- cyclotomic integers -----------------------------------------------------

@dataclass(frozen=True)
class CyclotomicSum:
    """Element of Z[zeta_p] in the basis 1, zeta, ..., zeta^(p-2)."""

    p: int
    coords: tuple[int, ...]

    @classmethod
    def from_counts(cls, p: int, counts) -> CyclotomicSum:
        """sum_t counts[t] * zeta^t for t in [0, p)."""
        counts = [int(c) for c in counts]
        if len(counts) != p:
            raise ValueError("need one count per residue mod p")
        top = counts[p - 1]
        return cls(p, tuple(c - top for c in counts[: p - 1]))

    @classmethod
    def integer(cls, p: int, c: int) -> CyclotomicSum:
        return cls(p, (int(c),) + (0,) * (p - 2))

    @classmethod
    def zeta_power(cls, p: int, t: int) -> CyclotomicSum:
        counts = [0] * p
        counts[t % p] = 1
        return cls.from_counts(p, counts)

    def _full(self):
        return list(self.coords) + [0]

    def __add__(self, other):
        if isinstance(other, int):
            other = CyclotomicSum.integer(self.p, other)
        return CyclotomicSum(self.p, tuple(a + b for a, b in zip(self.coords, other.coords)))

    __radd__ = __add__

    def __neg__(self):
        return CyclotomicSum(self.p, tuple(-a for a in self.coords))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, int):
            return CyclotomicSum(self.p, tuple(other * a for a in self.coords))
        p = self.p
        out = [0] * p
        for i, a in enumerate(self.coords):
            if a:
                for j, b in enumerate(other.coords):
                    if b:
                        out[(i + j) % p] += a * b
        return CyclotomicSum.from_counts(p, out)

    __rmul__ = __mul__

    def conjugate(self) -> CyclotomicSum:
        full = self._full()
        out = [0] * self.p
        for i, a in enumerate(full):
            out[(-i) % self.p] += a
        return CyclotomicSum.from_counts(self.p, out)

    def is_integer(self) -> bool:
        return all(c == 0 for c in self.coords[1:])

    def as_integer(self) -> int:
        if not self.is_integer():
            raise ValueError(f"{self} is not a rational integer")
        return self.coords[0]

    def embed(self, j: int) -> complex:
        if not 1 <= j <= self.p - 1:
            raise ValueError("embedding index must lie in [1, p-1]")
        w = cmath.exp(2j * math.pi * j / self.p)
        return sum(c * w**i for i, c in enumerate(self.coords))

    def abs2(self, j: int) -> float:
        return abs(self.embed(j)) ** 2


def char_eval(x: FieldElement) -> CyclotomicSum:
    """psi(x) = zeta_p^Tr(x)."""
    return CyclotomicSum.zeta_power(x.field.p, trace_to_prime(x))


def embedding_abs2(s: CyclotomicSum, j: int) -> float:
    return s.abs2(j)


def sums_from_trace_counts(p: int, counts: np.ndarray) -> list[CyclotomicSum]:
    """Rows of an (N, p) count array -> CyclotomicSums."""
    counts = np.asarray(counts)
    coords = counts[:, : p - 1] - counts[:, p - 1 : p]
    return [CyclotomicSum(p, tuple(int(c) for c in row)) for row in coords]


# --- dense linear algebra ----------------------------------------------------

def rref(field: FiniteField, m) -> tuple[np.ndarray, list[int]]:
    a = np.array(m, dtype=np.int64, copy=True)
    if a.ndim != 2:
        raise ValueError("expected a matrix")
    rows, cols = a.shape
    pivots: list[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(a[r:, c])[0]
        if nz.size == 0:
            continue
        i = r + int(nz[0])
        if i != r:
            a[[r, i]] = a[[i, r]]
        a[r] = field.vmul(field.inv(int(a[r, c])), a[r])
        factors = a[:, c].copy()
        factors[r] = 0
        hit = np.nonzero(factors)[0]
        if hit.size:
            a[hit] = field.vsub(a[hit], field.vmul(factors[hit, None], a[r][None, :]))
        pivots.append(c)
        r += 1
    return a, pivots


def rank(field: FiniteField, m) -> int:
    m = np.asarray(m)
    if m.size == 0:
        return 0
    return len(rref(field, m)[1])


def kernel_basis(field: FiniteField, m) -> np.ndarray:
    """Basis of {v : m v = 0}, one vector per row."""
    m = np.asarray(m, dtype=np.int64)
    cols = m.shape[1]
    if m.shape[0] == 0:
        return np.eye(cols, dtype=np.int64)
    r, pivots = rref(field, m)
    free = [c for c in range(cols) if c not in pivots]
    basis = np.zeros((len(free), cols), dtype=np.int64)
    for n, f in enumerate(free):
        basis[n, f] = 1
        for i, c in enumerate(pivots):
            basis[n, c] = field.neg(int(r[i, f]))
    return basis


def solve(field: FiniteField, m, b):
    """One solution of m x = b, or None when inconsistent."""
    m = np.asarray(m, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64).reshape(-1, 1)
    aug, pivots = rref(field, np.hstack([m, b]))
    cols = m.shape[1]
    if cols in pivots:
        return None
    x = np.zeros(cols, dtype=np.int64)
    for i, c in enumerate(pivots):
        x[c] = aug[i, cols]
    return x


def batch_rank(field: FiniteField, mats) -> np.ndarray:
    """Ranks of a stack of matrices with shape (B, R, C)."""
    a = np.array(mats, dtype=np.int64, copy=True)
    nb, nr, nc = a.shape
    ranks = np.zeros(nb, dtype=np.int64)
    if nb == 0 or nr == 0:
        return ranks
    used = np.zeros((nb, nr), dtype=bool)
    for c in range(nc):
        cand = (a[:, :, c] != 0) & ~used
        has = cand.any(axis=1)
        if not has.any():
            continue
        b = np.nonzero(has)[0]
        pr = np.argmax(cand[b], axis=1)
        prow = a[b, pr, :]
        prow = field.vmul(field.vinv(prow[:, c])[:, None], prow)
        a[b, pr, :] = prow
        factors = a[b, :, c].copy()
        factors[np.arange(b.size), pr] = 0
        a[b] = field.vsub(a[b], field.vmul(factors[:, :, None], prow[:, None, :]))
        used[b, pr] = True
        ranks[b] += 1
    return ranks


@dataclass(frozen=True, eq=False)
class MatrixFq:
    field: FiniteField
    entries: np.ndarray

    @classmethod
    def zeros(cls, field, rows, cols):
        return cls(field, np.zeros((rows, cols), dtype=np.int64))

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    def rank(self) -> int:
        return rank(self.field, self.entries)

    def nullity(self) -> int:
        return self.cols - self.rank()

    def kernel_basis(self) -> np.ndarray:
        return kernel_basis(self.field, self.entries)

    def apply(self, v) -> np.ndarray:
        return self.field.matmul(self.entries, np.asarray(v, dtype=np.int64))

    def solve(self, b):
        return solve(self.field, self.entries, b)


def encode_vectors(q: int, vecs) -> np.ndarray:
    """Base-q integer key of each row."""
    vecs = np.asarray(vecs, dtype=np.int64)
    w = q ** np.arange(vecs.shape[-1], dtype=np.int64)
    return (vecs * w).sum(axis=-1)


def decode_vectors(q: int, keys, dim: int) -> np.ndarray:
    keys = np.asarray(keys, dtype=np.int64)
    w = q ** np.arange(dim, dtype=np.int64)
    return (keys[..., None] // w) % q


def all_vectors(q: int, dim: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Rows of F_q^dim in key order, optionally a slice [start, stop)."""
    stop = q**dim if stop is None else stop
    return decode_vectors(q, np.arange(start, stop, dtype=np.int64), dim)
