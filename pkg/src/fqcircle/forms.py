"""Homogeneous forms, their symmetric tensors, and the multilinear forms Psi_j, f_d.

A form is kept twice: as a monomial map (exponent tuple -> coefficient), which
is what evaluation wants, and as the dense symmetric tensor ``a`` with
``sum a[j1..jd] x_j1 ... x_jd = f``, which is what the multilinear forms want.

Sections of ``P_m`` enter as coordinate arrays whose last axis is the
Riemann-Roch basis and whose second-to-last axis is the variable index, so a
batch of tuples has shape ``(..., n+1, dim P_m)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import sympy

from .algebra import FiniteField, all_vectors, embedding, get_field
from .curves import CurveModel, cup, include, rr_dim


class FormError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SymmetricForm:
    field: FiniteField
    n: int
    d: int
    monomials: tuple[tuple[tuple[int, ...], int], ...]
    tensor: np.ndarray = field(repr=False)

    @property
    def nvars(self) -> int:
        return self.n + 1

    def coefficient(self, exps) -> int:
        return dict(self.monomials).get(tuple(exps), 0)

    def describe(self) -> str:
        terms = []
        for exps, c in self.monomials:
            mono = "*".join(f"x{i}" if e == 1 else f"x{i}^{e}" for i, e in enumerate(exps) if e)
            terms.append(mono if c == 1 else f"{c}*{mono}")
        return "f = " + " + ".join(terms)

    @cached_property
    def is_diagonal(self) -> bool:
        return all(sum(1 for e in exps if e) == 1 for exps, _ in self.monomials)

    def evaluate(self, values, F: FiniteField | None = None):
        """f at points of F^{n+1} (last axis), F an extension of the base field."""
        F = F or self.field
        emb = embedding(self.field, F)
        values = np.asarray(values, dtype=np.int64)
        out = np.zeros(values.shape[:-1], dtype=np.int64)
        for exps, c in self.monomials:
            term = np.full(values.shape[:-1], emb[c], dtype=np.int64)
            for i, e in enumerate(exps):
                if e:
                    term = F.vmul(term, F.vpow(values[..., i], e))
            out = F.vadd(out, term)
        return out

    def gradient(self, values, F: FiniteField | None = None):
        F = F or self.field
        emb = embedding(self.field, F)
        values = np.asarray(values, dtype=np.int64)
        grads = []
        for v in range(self.nvars):
            out = np.zeros(values.shape[:-1], dtype=np.int64)
            for exps, c in self.monomials:
                if exps[v] == 0:
                    continue
                coef = self.field.mul(c, self.field.from_int(exps[v]))
                if coef == 0:
                    continue
                term = np.full(values.shape[:-1], emb[coef], dtype=np.int64)
                for i, e in enumerate(exps):
                    e2 = e - 1 if i == v else e
                    if e2:
                        term = F.vmul(term, F.vpow(values[..., i], e2))
                out = F.vadd(out, term)
            grads.append(out)
        return np.stack(grads, axis=-1)


def symmetrize(F: FiniteField, n: int, d: int, monomials) -> SymmetricForm:
    """Build the symmetric tensor of a degree-d form given as {exponents: coeff}."""
    if F.p <= d:
        raise FormError(f"characteristic {F.p} does not exceed the degree {d}; d! is not invertible")
    if d < 1:
        raise FormError("degree must be positive")
    clean = {}
    for exps, c in dict(monomials).items():
        exps = tuple(int(e) for e in exps)
        if len(exps) != n + 1 or sum(exps) != d or min(exps) < 0:
            raise FormError(f"monomial {exps} is not homogeneous of degree {d} in {n + 1} variables")
        c = int(c) % F.q if c >= 0 else F.from_int(c)
        if c:
            clean[exps] = c
    if not clean:
        raise FormError("the zero form is not a hypersurface")
    tensor = np.zeros((n + 1,) * d, dtype=np.int64)
    for exps, c in clean.items():
        idx = [i for i, e in enumerate(exps) for _ in range(e)]
        mult = math.factorial(d)
        for e in exps:
            mult //= math.factorial(e)
        entry = F.div(c, F.from_int(mult))
        for perm in set(itertools.permutations(idx)):
            tensor[perm] = entry
    tensor.setflags(write=False)
    return SymmetricForm(F, n, d, tuple(sorted(clean.items(), reverse=True)), tensor)


def expand_tensor(form: SymmetricForm) -> dict:
    """Monomial map recovered from the tensor (used to check round trips)."""
    F = form.field
    out: dict = {}
    for idx in itertools.product(range(form.nvars), repeat=form.d):
        a = int(form.tensor[idx])
        if a:
            exps = [0] * form.nvars
            for i in idx:
                exps[i] += 1
            key = tuple(exps)
            out[key] = F.add(out.get(key, 0), a)
    return {k: v for k, v in out.items() if v}


def parse_form(text: str, F: FiniteField, n: int | None = None) -> SymmetricForm:
    """Parse ``f = x0^2 + x1^2 + x2^2`` (integer coefficients, reduced mod p)."""
    body = text.split("=", 1)[1] if "=" in text else text
    body = body.replace("^", "**")
    try:
        expr = sympy.sympify(body)
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise FormError(f"cannot parse form {text!r}") from exc
    names = sorted((str(s) for s in expr.free_symbols), key=lambda s: (len(s), s))
    for s in names:
        if not (s.startswith("x") and s[1:].isdigit()):
            raise FormError(f"variables must be named x0..xn, got {s!r}")
    top = max((int(s[1:]) for s in names), default=-1)
    if n is None:
        n = top
    if top > n or n < 1:
        raise FormError(f"form uses x{top} but n = {n}")
    gens = sympy.symbols(f"x0:{n + 1}")
    try:
        poly = sympy.Poly(sympy.expand(expr), *gens, domain="ZZ")
    except sympy.PolynomialError as exc:
        raise FormError(f"form {text!r} is not a polynomial with integer coefficients") from exc
    degs = {sum(m) for m in poly.monoms()}
    if len(degs) != 1:
        raise FormError("form is not homogeneous")
    d = degs.pop()
    mons = {tuple(m): F.from_int(int(c)) for m, c in zip(poly.monoms(), poly.coeffs())}
    return symmetrize(F, n, d, mons)


def smoothness_check(form: SymmetricForm, max_ext: int = 2) -> bool:
    """No nonzero common zero of the gradient over F_{q^m}, m <= max_ext.

    Enumerates projective representatives (first nonzero coordinate 1).
    Since p > d, Euler's identity makes f vanish at gradient zeros too.
    """
    base = form.field
    N = form.nvars
    for m in range(1, max_ext + 1):
        F = get_field(base.p, base.k * m)
        for lead in range(N):
            tail = N - lead - 1
            rest = all_vectors(F.q, tail)
            vals = np.zeros((rest.shape[0], N), dtype=np.int64)
            vals[:, lead] = 1
            vals[:, lead + 1 :] = rest
            g = form.gradient(vals, F)
            if np.any(np.all(g == 0, axis=-1)):
                return False
    return True


# --- forms on sections ---------------------------------------------------------

def _monomial_product(curve: CurveModel, X, exps, e: int):
    """prod_i X[..., i, :]^exps[i] as sections; returns (coords, level)."""
    acc, level = None, 0
    for i, k in enumerate(exps):
        for _ in range(k):
            if acc is None:
                acc, level = X[..., i, :], e
            else:
                acc = cup(curve, acc, level, X[..., i, :], e)
                level += e
    return acc, level


def evaluate_on_sections(curve: CurveModel, form: SymmetricForm, X, e: int) -> np.ndarray:
    """f(X) in P_{de}; X has shape (..., n+1, dim P_e)."""
    F = curve.field
    X = np.asarray(X, dtype=np.int64)
    out = np.zeros(X.shape[:-2] + (rr_dim(curve, form.d * e),), dtype=np.int64)
    for exps, c in form.monomials:
        prod, _ = _monomial_product(curve, X, exps, e)
        out = F.vadd(out, F.vmul(c, prod))
    return out


def _check_slots(form: SymmetricForm, slots, levels, curve):
    if len(slots) != len(levels):
        raise FormError("one pole bound per slot is required")
    for x, lv in zip(slots, levels):
        x = np.asarray(x)
        if x.shape[-2:] != (form.nvars, rr_dim(curve, lv)):
            raise FormError(f"slot of shape {x.shape} does not match (n+1, dim P_{lv})")


def psi_j(curve: CurveModel, form: SymmetricForm, j: int, slots, levels) -> np.ndarray:
    """Psi_j(x^(1), ..., x^(d-1)) in P_{sum levels}.

    Psi_j = d! * sum a[j1..j_{d-1}, j] x^(1)_{j1} ... x^(d-1)_{j_{d-1}}.
    """
    F = curve.field
    d = form.d
    if len(slots) != d - 1:
        raise FormError(f"Psi_j takes {d - 1} slots")
    _check_slots(form, slots, levels, curve)
    slots = [np.asarray(s, dtype=np.int64) for s in slots]
    total = sum(levels)
    batch = np.broadcast_shapes(*[s.shape[:-2] for s in slots]) if slots else ()
    out = np.zeros(batch + (rr_dim(curve, total),), dtype=np.int64)
    dfact = F.from_int(math.factorial(d))
    if d == 1:
        out[..., 0] = F.mul(dfact, int(form.tensor[j]))
        return out
    for idx in itertools.product(range(form.nvars), repeat=d - 1):
        a = int(form.tensor[idx + (j,)])
        if not a:
            continue
        acc, level = slots[0][..., idx[0], :], levels[0]
        for s, lv, i in zip(slots[1:], levels[1:], idx[1:]):
            acc = cup(curve, acc, level, s[..., i, :], lv)
            level += lv
        out = F.vadd(out, F.vmul(F.mul(dfact, a), acc))
    return out


def f_d(curve: CurveModel, form: SymmetricForm, slots, e: int) -> np.ndarray:
    """Alternating sum over eps in {0,1}^d of (-1)^{|eps|} f(sum eps_i x^(i))."""
    F = curve.field
    d = form.d
    if len(slots) != d:
        raise FormError(f"f_d takes {d} slots")
    _check_slots(form, slots, [e] * d, curve)
    slots = [np.asarray(s, dtype=np.int64) for s in slots]
    batch = np.broadcast_shapes(*[s.shape[:-2] for s in slots])
    out = np.zeros(batch + (rr_dim(curve, d * e),), dtype=np.int64)
    for eps in itertools.product((0, 1), repeat=d):
        x = np.zeros(batch + slots[0].shape[-2:], dtype=np.int64)
        for bit, s in zip(eps, slots):
            if bit:
                x = F.vadd(x, s)
        val = evaluate_on_sections(curve, form, x, e)
        out = F.vsub(out, val) if sum(eps) % 2 else F.vadd(out, val)
    return out


def pair_with_sections(curve: CurveModel, psis, level: int, X, e: int) -> np.ndarray:
    """sum_j Psi_j * X_j in P_{level+e}; ``psis`` has shape (..., n+1, dim P_level)."""
    F = curve.field
    prod = cup(curve, psis, level, X, e)
    return F.vsum(prod, axis=-2)


def to_level(curve: CurveModel, v, a: int, b: int) -> np.ndarray:
    return include(curve, v, a, b)
