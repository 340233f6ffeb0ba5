"""Curves with a marked rational point at infinity and their Riemann-Roch spaces.

Two models are supported: the projective line, and odd-degree hyperelliptic
curves ``y^2 = h(x)`` with ``deg h = 2g + 1``.  Sections of ``O(m*inf)`` are
spanned by monomials ``x^i y^j`` (``j <= 1``) of pole order at most ``m``,
listed by increasing pole order so that ``P_a`` is a prefix of ``P_b`` for
``a <= b``.

Closed points of degree ``m`` are stored as Frobenius-orbit representatives
with coordinates in ``F_{q^m}``.  Local expansions are power series in a fixed
uniformizer:

* ``x - x0`` at affine points where the map to the x-line is unramified,
* ``y`` at affine Weierstrass points,
* ``1/x`` at infinity on the line and ``x^g / y`` at infinity otherwise.

At infinity a section of ``O(m*inf)`` is expanded after multiplying by
``t^m``, so its jet is a genuine element of ``O/t^r``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property, lru_cache, total_ordering

import numpy as np

from .algebra import (
    FieldError,
    FiniteField,
    embedding,
    get_field,
    kernel_basis,
    rank,
)


class CurveError(ValueError):
    pass


# --- power series over a field, truncated at precision r -------------------

def ps_mul(F: FiniteField, a, b, r: int) -> np.ndarray:
    a = np.asarray(a, dtype=np.int64)[:r]
    b = np.asarray(b, dtype=np.int64)[:r]
    out = np.zeros(r, dtype=np.int64)
    for i in range(min(len(a), r)):
        if a[i]:
            n = min(len(b), r - i)
            out[i : i + n] = F.vadd(out[i : i + n], F.vmul(a[i], b[:n]))
    return out


def ps_inv(F: FiniteField, a, r: int) -> np.ndarray:
    a = np.zeros(r, dtype=np.int64) if len(a) == 0 else np.asarray(a, dtype=np.int64)
    if a[0] == 0:
        raise ZeroDivisionError("power series with zero constant term")
    inv0 = F.inv(int(a[0]))
    out = np.zeros(r, dtype=np.int64)
    out[0] = inv0
    for n in range(1, r):
        acc = 0
        for i in range(1, min(n, len(a) - 1) + 1):
            acc = F.add(acc, F.mul(int(a[i]), int(out[n - i])))
        out[n] = F.neg(F.mul(inv0, acc))
    return out


def ps_pow(F: FiniteField, a, e: int, r: int) -> np.ndarray:
    if e < 0:
        return ps_pow(F, ps_inv(F, a, r), -e, r)
    result = np.zeros(r, dtype=np.int64)
    result[0] = 1
    base = np.asarray(a, dtype=np.int64)[:r]
    while e:
        if e & 1:
            result = ps_mul(F, result, base, r)
        base = ps_mul(F, base, base, r)
        e >>= 1
    return result


def ps_compose(F: FiniteField, poly, w, r: int) -> np.ndarray:
    """poly(w) for a polynomial with coefficients low -> high."""
    acc = np.zeros(r, dtype=np.int64)
    for c in reversed(list(poly)):
        acc = ps_mul(F, acc, w, r)
        acc[0] = F.add(int(acc[0]), int(c))
    return acc


def _poly_eval(F: FiniteField, poly, xs):
    xs = np.asarray(xs, dtype=np.int64)
    acc = np.zeros_like(xs)
    for c in reversed(list(poly)):
        acc = F.vadd(F.vmul(acc, xs), np.full_like(xs, c))
    return acc


# --- curve models ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CurveModel:
    """P^1 (``h == ()``) or ``y^2 = h(x)`` with h monic squarefree of odd degree."""

    field: FiniteField
    h: tuple[int, ...] = ()

    def __post_init__(self):
        F = self.field
        if F.p == 2:
            raise CurveError("the hyperelliptic model needs odd characteristic")
        if self.h:
            h = tuple(int(c) for c in self.h)
            if len(h) < 4 or len(h) % 2 == 1:
                raise CurveError("h must have odd degree 2g+1 >= 3")
            if h[-1] != 1:
                raise CurveError("h must be monic")
            if not _squarefree(F, h):
                raise CurveError("h is not squarefree")

    @property
    def kind(self) -> str:
        return "hyperelliptic" if self.h else "p1"

    @property
    def genus(self) -> int:
        return (len(self.h) - 2) // 2 if self.h else 0

    @property
    def q(self) -> int:
        return self.field.q

    def pole_order(self, i: int, j: int) -> int:
        if not self.h:
            return i
        return 2 * i + (2 * self.genus + 1) * j

    def describe(self) -> str:
        if not self.h:
            return f"p={self.field.p} k={self.field.k} kind=p1"
        terms = []
        for i, c in reversed(list(enumerate(self.h))):
            if c:
                mono = "1" if i == 0 else ("x" if i == 1 else f"x^{i}")
                terms.append(mono if c == 1 and i > 0 else f"{c}*{mono}" if i > 0 else str(c))
        return f"p={self.field.p} k={self.field.k} kind=hyperelliptic h={'+'.join(terms)}"

    def __repr__(self):
        return f"CurveModel({self.describe()})"

    def __eq__(self, other):
        return isinstance(other, CurveModel) and (self.field.q, self.h) == (other.field.q, other.h)

    def __hash__(self):
        return hash((self.field.q, self.h))

    def base_change(self, m: int) -> tuple[FiniteField, np.ndarray]:
        """F_{q^m} and the curve coefficients embedded in it."""
        big = get_field(self.field.p, self.field.k * m)
        emb = embedding(self.field, big)
        return big, emb[np.asarray(self.h, dtype=np.int64)] if self.h else np.zeros(0, dtype=np.int64)


def _squarefree(F: FiniteField, h) -> bool:
    # gcd(h, h') == 1 over F_q via Euclid on encoded coefficients
    def trim(a):
        a = list(a)
        while a and a[-1] == 0:
            a.pop()
        return a

    def rem(a, b):
        a, b = trim(a), trim(b)
        inv = F.inv(b[-1])
        while len(a) >= len(b):
            c = F.mul(a[-1], inv)
            s = len(a) - len(b)
            for i, bi in enumerate(b):
                a[s + i] = F.sub(a[s + i], F.mul(c, bi))
            a = trim(a)
        return a

    dh = [F.mul(F.from_int(i), c) for i, c in enumerate(h)][1:]
    a, b = trim(h), trim(dh)
    if not b:
        return False
    while b:
        a, b = b, rem(a, b)
    return len(a) == 1


_TERM = re.compile(r"^\s*(?:(\d+)\s*\*?\s*)?(x(?:\s*\^\s*(\d+))?)?\s*$")


def parse_polynomial(text: str, F: FiniteField) -> tuple[int, ...]:
    """Parse an integer-coefficient polynomial in x such as ``x^3+2*x+1``."""
    text = text.replace(" ", "").replace("**", "^")
    if not text:
        raise CurveError("empty polynomial")
    text = text.replace("-", "+-")
    coeffs: dict[int, int] = {}
    for raw in text.split("+"):
        if not raw:
            continue
        sign = -1 if raw.startswith("-") else 1
        term = raw.lstrip("-")
        m = _TERM.match(term)
        if not m or (m.group(1) is None and m.group(2) is None):
            raise CurveError(f"cannot parse term {raw!r}")
        c = int(m.group(1)) if m.group(1) is not None else 1
        deg = 0 if m.group(2) is None else int(m.group(3) or 1)
        coeffs[deg] = coeffs.get(deg, 0) + sign * c
    top = max(coeffs)
    return tuple(F.from_int(coeffs.get(i, 0)) for i in range(top + 1))


def parse_curve_spec(text: str) -> CurveModel:
    """Parse ``p=3 k=1 kind=hyperelliptic h=x^3+x+1`` or ``p=5 kind=p1``."""
    fields = {}
    for token in text.split():
        if "=" not in token:
            raise CurveError(f"malformed token {token!r} in curve spec")
        key, value = token.split("=", 1)
        fields[key.strip()] = value.strip()
    unknown = set(fields) - {"p", "k", "kind", "h"}
    if unknown:
        raise CurveError(f"unknown curve keys {sorted(unknown)}")
    try:
        p = int(fields["p"])
        k = int(fields.get("k", "1"))
    except (KeyError, ValueError) as exc:
        raise CurveError("curve spec needs integer p (and optional k)") from exc
    try:
        F = get_field(p, k)
    except FieldError as exc:
        raise CurveError(str(exc)) from exc
    kind = fields.get("kind", "hyperelliptic" if "h" in fields else "p1")
    if kind == "p1":
        if "h" in fields:
            raise CurveError("kind=p1 takes no h")
        return CurveModel(F)
    if kind != "hyperelliptic":
        raise CurveError(f"unknown curve kind {kind!r}")
    if "h" not in fields:
        raise CurveError("hyperelliptic curve needs h=...")
    return CurveModel(F, parse_polynomial(fields["h"], F))


# --- Riemann-Roch spaces and the cup product ---------------------------------

@dataclass(frozen=True)
class RiemannRochBasis:
    curve: CurveModel
    m: int
    monomials: tuple[tuple[int, int], ...]

    @property
    def dim(self) -> int:
        return len(self.monomials)

    @cached_property
    def poles(self) -> tuple[int, ...]:
        return tuple(self.curve.pole_order(i, j) for i, j in self.monomials)

    def index(self, mono: tuple[int, int]) -> int:
        return self.monomials.index(mono)

    def labels(self) -> list[str]:
        out = []
        for i, j in self.monomials:
            parts = []
            if i:
                parts.append("x" if i == 1 else f"x^{i}")
            if j:
                parts.append("y")
            out.append("*".join(parts) or "1")
        return out


@lru_cache(maxsize=None)
def rr_basis(curve: CurveModel, m: int) -> RiemannRochBasis:
    if m < 0:
        raise CurveError("pole-order bound must be non-negative")
    monos = []
    jmax = 1 if curve.h else 0
    for j in range(jmax + 1):
        i = 0
        while curve.pole_order(i, j) <= m:
            monos.append((i, j))
            i += 1
    monos.sort(key=lambda ij: (curve.pole_order(*ij), ij))
    return RiemannRochBasis(curve, m, tuple(monos))


def rr_dim(curve: CurveModel, m: int) -> int:
    return rr_basis(curve, m).dim if m >= 0 else 0


@lru_cache(maxsize=None)
def cup_tensor(curve: CurveModel, a: int, b: int) -> np.ndarray:
    """T[i, j, k]: coefficient of basis_k of P_{a+b} in basis_i(P_a) * basis_j(P_b)."""
    A, B, Cb = rr_basis(curve, a), rr_basis(curve, b), rr_basis(curve, a + b)
    pos = {mono: n for n, mono in enumerate(Cb.monomials)}
    T = np.zeros((A.dim, B.dim, Cb.dim), dtype=np.int64)
    for u, (i1, j1) in enumerate(A.monomials):
        for v, (i2, j2) in enumerate(B.monomials):
            i, j = i1 + i2, j1 + j2
            if j < 2:
                T[u, v, pos[(i, j)]] = 1
            else:
                for kdeg, c in enumerate(curve.h):
                    if c:
                        T[u, v, pos[(i + kdeg, 0)]] = c
    T.setflags(write=False)
    return T


def contract(F: FiniteField, a, T) -> np.ndarray:
    """Contract the last axis of F_q-array ``a`` with the first axis of ``T``."""
    T = np.asarray(T, dtype=np.int64)
    if np.all(T < F.p):
        return F.scale_fp(a, T)
    a = np.asarray(a, dtype=np.int64)
    out = np.zeros(a.shape[:-1] + T.shape[1:], dtype=np.int64)
    extra = (None,) * (T.ndim - 1)
    for i in range(T.shape[0]):
        out = F.vadd(out, F.vmul(a[(..., i) + extra], T[i]))
    return out


def cup(curve: CurveModel, u, a: int, v, b: int) -> np.ndarray:
    """Product of sections u in P_a and v in P_b, in coordinates of P_{a+b}.

    Works on batches: ``u`` and ``v`` broadcast over leading axes.
    """
    F = curve.field
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    da, db = rr_dim(curve, a), rr_dim(curve, b)
    if u.shape[-1] != da or v.shape[-1] != db:
        raise CurveError("coordinate length does not match the Riemann-Roch dimension")
    outer = F.vmul(u[..., :, None], v[..., None, :])
    outer = outer.reshape(outer.shape[:-2] + (da * db,))
    T = cup_tensor(curve, a, b).reshape(da * db, -1)
    return contract(F, outer, T)


def include(curve: CurveModel, v, a: int, b: int) -> np.ndarray:
    """Coordinates of a section of P_a viewed in P_b (a <= b)."""
    if a > b:
        raise CurveError("can only include P_a in P_b for a <= b")
    v = np.asarray(v, dtype=np.int64)
    pad = rr_dim(curve, b) - rr_dim(curve, a)
    return np.concatenate([v, np.zeros(v.shape[:-1] + (pad,), dtype=np.int64)], axis=-1)


# --- closed points -----------------------------------------------------------

@total_ordering
@dataclass(frozen=True)
class ClosedPoint:
    """Frobenius-orbit representative; ``x is None`` marks infinity."""

    degree: int
    x: int | None = None
    y: int | None = None

    @property
    def is_infinity(self) -> bool:
        return self.x is None

    def sort_key(self):
        return (self.degree, -1 if self.x is None else self.x, -1 if self.y is None else self.y)

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        if self.is_infinity:
            return "inf"
        if self.y is None:
            return f"({self.x})@{self.degree}"
        return f"({self.x},{self.y})@{self.degree}"


INFINITY = ClosedPoint(1)


def _frobenius_orbit_size(big: FiniteField, q: int, xs, ys, m: int):
    sizes = np.zeros(len(xs), dtype=np.int64)
    cx, cy = xs.copy(), ys.copy()
    is_min = np.ones(len(xs), dtype=bool)
    for j in range(1, m + 1):
        cx = big.vpow(cx, q)
        cy = big.vpow(cy, q)
        back = (cx == xs) & (cy == ys) & (sizes == 0)
        sizes[back] = j
        smaller = (cx < xs) | ((cx == xs) & (cy < ys))
        is_min &= ~(smaller & (sizes == 0))
    return sizes, is_min


def points_of_degree(curve: CurveModel, m: int) -> list[ClosedPoint]:
    """Closed points of exact degree m, affine ones only (infinity is added separately)."""
    big, hb = curve.base_change(m)
    xs = np.arange(big.q, dtype=np.int64)
    if not curve.h:
        ys = np.zeros_like(xs)
        sizes, is_min = _frobenius_orbit_size(big, curve.q, xs, ys, m)
        keep = (sizes == m) & is_min
        return [ClosedPoint(m, int(x)) for x in xs[keep]]
    hx = _poly_eval(big, hb, xs)
    px, py = [], []
    zero = hx == 0
    px.append(xs[zero])
    py.append(np.zeros(int(zero.sum()), dtype=np.int64))
    sq = (~zero) & (big.log[hx] % 2 == 0) if big.q > 2 else ~zero
    roots = big.exp[big.log[hx[sq]] // 2]
    px += [xs[sq], xs[sq]]
    py += [roots, big.vneg(roots)]
    ax = np.concatenate(px)
    ay = np.concatenate(py)
    sizes, is_min = _frobenius_orbit_size(big, curve.q, ax, ay, m)
    keep = (sizes == m) & is_min
    pts = [ClosedPoint(m, int(x), int(y)) for x, y in zip(ax[keep], ay[keep])]
    return sorted(pts)


@lru_cache(maxsize=None)
def enumerate_closed_points(curve: CurveModel, max_degree: int) -> tuple[ClosedPoint, ...]:
    if max_degree < 1:
        raise CurveError("max_degree must be >= 1")
    pts = [INFINITY]
    for m in range(1, max_degree + 1):
        pts.extend(points_of_degree(curve, m))
    return tuple(pts)


def count_rational_points(curve: CurveModel) -> int:
    return len([P for P in enumerate_closed_points(curve, 1)])


def point_field(curve: CurveModel, P: ClosedPoint) -> FiniteField:
    return get_field(curve.field.p, curve.field.k * P.degree)


# --- local expansions ----------------------------------------------------------

def _is_weierstrass(curve: CurveModel, P: ClosedPoint) -> bool:
    return bool(curve.h) and not P.is_infinity and P.y == 0


@lru_cache(maxsize=None)
def basis_jets(curve: CurveModel, m: int, P: ClosedPoint, r: int) -> np.ndarray:
    """(dim P_m, r) array: jet of each basis section at P, over F_{q^deg P}."""
    if r < 1:
        raise CurveError("jet precision must be >= 1")
    B = rr_basis(curve, m)
    big, hb = curve.base_change(P.degree)
    out = np.zeros((B.dim, r), dtype=np.int64)
    g = curve.genus
    if P.is_infinity:
        if not curve.h:
            for n, (i, _) in enumerate(B.monomials):
                if m - i < r:
                    out[n, m - i] = 1
            return _frozen(out)
        # t = x^g / y; w = 1/x solves w = t^2 * H(w) with H monic-reversed h
        H = list(reversed([int(c) for c in hb]))
        t2 = np.zeros(r + 2, dtype=np.int64)
        if r + 2 > 2:
            t2[2] = 1
        w = np.zeros(r + 2, dtype=np.int64)
        for _ in range(r + 2):
            w = ps_mul(big, t2, ps_compose(big, H, w, r + 2), r + 2)
        u = ps_compose(big, H, w, r)
        for n, (i, j) in enumerate(B.monomials):
            shift = m - B.poles[n]
            if shift < r:
                series = ps_pow(big, u, -(i + g * j), r - shift)
                out[n, shift:] = series
        return _frozen(out)
    if not curve.h:
        xs = np.zeros(r, dtype=np.int64)
        xs[0] = P.x
        if r > 1:
            xs[1] = 1
        for n, (i, _) in enumerate(B.monomials):
            out[n] = ps_pow(big, xs, i, r)
        return _frozen(out)
    if _is_weierstrass(curve, P):
        # t = y; x = x0 + z with h(x0 + z) = t^2
        G = ps_compose(big, [int(c) for c in hb], np.array([P.x, 1] + [0] * r, dtype=np.int64), r + 2)
        G1 = G[1:]
        t2 = np.zeros(r + 1, dtype=np.int64)
        if r + 1 > 2:
            t2[2] = 1
        z = np.zeros(r + 1, dtype=np.int64)
        for _ in range(r + 1):
            g1z = ps_compose(big, G1, z, r + 1)
            z = ps_mul(big, t2, ps_inv(big, g1z, r + 1), r + 1)
        xs = z[:r].copy()
        xs[0] = big.add(int(xs[0]), P.x)
        ys = np.zeros(r, dtype=np.int64)
        if r > 1:
            ys[1] = 1
    else:
        xs = np.zeros(r, dtype=np.int64)
        xs[0] = P.x
        if r > 1:
            xs[1] = 1
        Ht = ps_compose(big, [int(c) for c in hb], xs, r)
        ys = np.zeros(r, dtype=np.int64)
        ys[0] = P.y
        inv2y = big.inv(big.mul(2 % big.p, P.y))
        for k in range(1, r):
            acc = int(Ht[k])
            for i in range(1, k):
                acc = big.sub(acc, big.mul(int(ys[i]), int(ys[k - i])))
            ys[k] = big.mul(acc, inv2y)
    for n, (i, j) in enumerate(B.monomials):
        s = ps_pow(big, xs, i, r)
        if j:
            s = ps_mul(big, s, ys, r)
        out[n] = s
    return _frozen(out)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LocalJet:
    point: ClosedPoint
    precision: int
    coefficients: tuple[int, ...]


def local_expand(curve: CurveModel, coords, m: int, P: ClosedPoint, r: int) -> LocalJet:
    """Image of the section ``coords`` of P_m in O_P / m_P^r."""
    coords = np.asarray(coords, dtype=np.int64)
    big, _ = curve.base_change(P.degree)
    emb = embedding(curve.field, big)
    J = basis_jets(curve, m, P, r)
    vals = big.vsum(big.vmul(emb[coords][:, None], J), axis=0)
    return LocalJet(P, r, tuple(int(v) for v in vals))


# --- effective divisors and restriction ------------------------------------------

@dataclass(frozen=True)
class EffectiveDivisor:
    parts: tuple[tuple[ClosedPoint, int], ...] = ()

    def __post_init__(self):
        pts = [P for P, _ in self.parts]
        if len(set(pts)) != len(pts):
            raise CurveError("repeated point in divisor")
        if any(r < 1 for _, r in self.parts):
            raise CurveError("multiplicities must be positive")
        object.__setattr__(self, "parts", tuple(sorted(self.parts, key=lambda pr: pr[0].sort_key())))

    @classmethod
    def from_dict(cls, d) -> EffectiveDivisor:
        return cls(tuple((P, r) for P, r in d.items() if r > 0))

    @property
    def degree(self) -> int:
        return sum(P.degree * r for P, r in self.parts)

    def as_dict(self) -> dict:
        return dict(self.parts)

    def __add__(self, other: EffectiveDivisor) -> EffectiveDivisor:
        d = self.as_dict()
        for P, r in other.parts:
            d[P] = d.get(P, 0) + r
        return EffectiveDivisor.from_dict(d)

    def union(self, other: EffectiveDivisor) -> EffectiveDivisor:
        d = self.as_dict()
        for P, r in other.parts:
            d[P] = max(d.get(P, 0), r)
        return EffectiveDivisor.from_dict(d)

    def intersection(self, other: EffectiveDivisor) -> EffectiveDivisor:
        a, b = self.as_dict(), other.as_dict()
        return EffectiveDivisor.from_dict({P: min(r, b[P]) for P, r in a.items() if P in b})

    def is_subdivisor(self, other: EffectiveDivisor) -> bool:
        b = other.as_dict()
        return all(b.get(P, 0) >= r for P, r in self.parts)

    def support(self) -> tuple[ClosedPoint, ...]:
        return tuple(P for P, _ in self.parts)

    def __repr__(self):
        if not self.parts:
            return "0"
        return " + ".join(f"{r}*{P!r}" if r > 1 else repr(P) for P, r in self.parts)


@lru_cache(maxsize=None)
def _trace_form(curve: CurveModel, deg: int):
    """F_q-valued trace rows z -> (Tr(beta^a z))_a for F_{q^deg} over F_q."""
    big, _ = curve.base_change(deg)
    small = curve.field
    emb = embedding(small, big)
    back = np.full(big.q, -1, dtype=np.int64)
    back[emb] = np.arange(small.q)
    z = np.arange(big.q, dtype=np.int64)
    rows = []
    for a in range(deg):
        w = big.vmul(big.pow(big.generator, a), z)
        total = np.zeros_like(w)
        for _ in range(deg):
            total = big.vadd(total, w)
            w = big.vpow(w, small.q)
        rows.append(back[total])
    table = np.stack(rows)  # (deg, Q)
    if np.any(table < 0):  # pragma: no cover
        raise CurveError("relative trace left the base field")
    table.setflags(write=False)
    return table


@lru_cache(maxsize=None)
def jet_rows(curve: CurveModel, m: int, P: ClosedPoint, r: int) -> np.ndarray:
    """(r, deg P, dim) array over F_q; block i cuts out the t^i coefficient at P."""
    J = basis_jets(curve, m, P, r)  # (dim, r)
    tf = _trace_form(curve, P.degree)  # (deg, Q)
    out = np.transpose(tf[:, J], (2, 0, 1)).copy()
    out.setflags(write=False)
    return out


def restriction_matrix(curve: CurveModel, m: int, Z: EffectiveDivisor) -> np.ndarray:
    """F_q-matrix (deg Z x dim P_m) with kernel H^0(O(m*inf)(-Z))."""
    dim = rr_dim(curve, m)
    blocks = [np.zeros((0, dim), dtype=np.int64)]
    for P, r in Z.parts:
        blocks.append(jet_rows(curve, m, P, r).reshape(r * P.degree, dim))
    return np.vstack(blocks)


def vanishing_subspace(curve: CurveModel, m: int, Z: EffectiveDivisor) -> np.ndarray:
    return kernel_basis(curve.field, restriction_matrix(curve, m, Z))


def restriction_rank(curve: CurveModel, m: int, Z: EffectiveDivisor) -> int:
    return rank(curve.field, restriction_matrix(curve, m, Z))
