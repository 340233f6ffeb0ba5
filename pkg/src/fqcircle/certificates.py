"""Exact threshold arithmetic: minor-arc budgets, degree thresholds, and the
Artin-Schreier/Frobenius parameter planner used to bound Fujita invariants.

Everything here is integer or ``Fraction`` arithmetic; no floats.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from .algebra import is_prime
from .minor import choose_s

THRESHOLD_VERSION = "degree-thresholds/1"


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class ParameterTuple:
    n: int
    d: int
    g: int
    e: int

    def __post_init__(self):
        if self.d < 2 or self.g < 1 or self.e < 1 or self.n < 3:
            raise CertificateError(f"need d >= 2, g >= 1, e >= 1, n >= 3; got {self}")

    @property
    def mu(self) -> int:
        return (self.n + 1) * (self.e + 1 - self.g) - self.d * self.e - 2 + 2 * self.g

    @property
    def mu_hat(self) -> int:
        return self.mu - self.g + 1

    @property
    def degz_range(self) -> range:
        return range(self.e - 2 * self.g + 2, self.d * self.e // 2 + 2)


def genus_correction(g: int) -> Fraction:
    return Fraction(0) if g == 1 else Fraction(g + 1, 2)


@dataclass(frozen=True)
class MinorArcBudget:
    degZ: int
    s: int
    h0: int | None
    fg: Fraction
    value: Fraction | None

    @property
    def valid(self) -> bool:
        return self.h0 is not None

    @property
    def negative(self) -> bool:
        return self.valid and self.value < 0


def minor_arc_exponent(t: ParameterTuple, degZ: int) -> MinorArcBudget:
    """Exponent of q in the minor-arc contribution of divisors of degree degZ.

    Rows where e - s <= 2g - 2 are returned with ``h0 = None`` and no value:
    Riemann-Roch alone does not fix h0 there.
    """
    if degZ not in t.degz_range:
        raise CertificateError(f"degZ = {degZ} outside [{t.degz_range.start}, {t.degz_range.stop - 1}]")
    n, d, g, e = t.n, t.d, t.g, t.e
    s = choose_s(degZ, d, e, g)
    fg = genus_correction(g)
    if e - s <= 2 * g - 2:
        return MinorArcBudget(degZ, s, None, fg, None)
    h0 = e - s - g + 1
    scale = Fraction(1, 2 ** (d - 1))
    value = (
        2 * degZ
        - (d - 1) * scale * (e + 1 - g) * (n + 1)
        + scale * ((n + 1) * ((d - 1) * s + fg) + h0 * (d - 2) * (n + 1))
    )
    return MinorArcBudget(degZ, s, h0, fg, value)


@dataclass(frozen=True)
class ThresholdVerdict:
    params: ParameterTuple
    rows: tuple[MinorArcBudget, ...]
    witness: int | None

    @property
    def passed(self) -> bool:
        return self.witness is None

    @property
    def all_valid(self) -> bool:
        return all(r.valid for r in self.rows)


def verify_thresholds(t: ParameterTuple) -> ThresholdVerdict:
    """PASS iff every row in the degZ range is valid and strictly negative."""
    rows = tuple(minor_arc_exponent(t, z) for z in t.degz_range)
    witness = next((r.degZ for r in rows if not r.negative), None)
    return ThresholdVerdict(t, rows, witness)


@dataclass(frozen=True)
class FrontierRow:
    e: int
    passed: bool
    witness: int | None


def frontier_scan(n: int, d: int, g: int, e_range) -> tuple[list[FrontierRow], int | None]:
    """Verdict per e, plus the least passing e (None if nothing passes)."""
    rows = []
    for e in e_range:
        v = verify_thresholds(ParameterTuple(n, d, g, e))
        rows.append(FrontierRow(e, v.passed, v.witness))
    first = next((r.e for r in rows if r.passed), None)
    return rows, first


def minimal_n(d: int) -> int:
    return 2**d * (d - 1) + 1


def degree_threshold(d: int, g: int) -> int:
    """Least integer degree e covered by the asymptotic count for (d, g)."""
    if d < 2 or g < 1:
        raise CertificateError("need d >= 2 and g >= 1")
    if d == 2:
        bound = Fraction(14) if g == 1 else Fraction(35 * g - 15, 2)
    elif d == 3:
        bound = Fraction(45) if g == 1 else Fraction(170 * g + 32, 3)
    elif g == 1:
        bound = Fraction(2**d * (d - 1) ** 2 + 1)
    else:
        bound = Fraction(
            2 ** (d - 1) * (d - 1) ** 2 * (3 * g + 1) + d * -((1 - 3 * g) // 2) + (g - 1) // 2
        )
    return math.ceil(bound)


# --- Fujita planner -------------------------------------------------------------

@dataclass(frozen=True)
class FujitaCertificate:
    d: int
    n: int
    g_C: int
    e_m: int
    m: int
    p: int
    b: int
    m_x: int
    g_Cprime: int
    trace: tuple[str, ...] = field(default=(), compare=False)

    @property
    def degree(self) -> int:
        """e_m p^(b+1), the degree after Frobenius pullback."""
        return self.e_m * self.p ** (self.b + 1)

    def as_dict(self) -> dict:
        out = asdict(self)
        out["trace"] = list(self.trace)
        return out


def _c(d: int) -> int:
    return 2 * 4**d


def _prime_ok(d: int, n: int, g_C: int, p: int) -> bool:
    c = _c(d)
    return c * (p - 1) * (n + 1 - d) + c * (n + 1 - d) + 1 < p * g_C


def _genus_after_cover(g_C: int, p: int, m_x: int) -> int:
    return p * g_C + (p - 1) * (m_x - 1) // 2


def _window(c: FujitaCertificate) -> int:
    return c.degree - _c(c.d) * c.g_Cprime


def fujita_plan(d: int, n: int, g_C: int, e_m: int, max_p: int = 10**4, max_b: int = 200) -> FujitaCertificate:
    """Least (p, b, m_x) meeting every planner inequality."""
    if d < 2 or e_m < 2:
        raise CertificateError("need d >= 2 and e_m >= 2")
    if n < minimal_n(d):
        raise CertificateError(f"need n >= {minimal_n(d)} for d = {d}")
    c = _c(d)
    if g_C <= c * (n + 1 - d):
        raise CertificateError(f"need g_C > {c * (n + 1 - d)}")
    m = c * (n + 1 - d) + 1
    trace = [f"m = {m}"]
    p = next((p for p in range(d + 1, max_p + 1) if p % 2 and is_prime(p) and _prime_ok(d, n, g_C, p)), None)
    if p is None:
        raise CertificateError(f"no admissible prime p <= {max_p}")
    trace.append(f"p = {p}")
    b = next((b for b in range(max_b + 1) if e_m * p ** (b + 1) >= c * p * g_C), None)
    if b is None:
        raise CertificateError(f"no b <= {max_b}")
    trace.append(f"b = {b}: e_m p^(b+1) = {e_m * p ** (b + 1)} >= {c * p * g_C}")
    top = e_m * p ** (b + 1)
    m_x = 1
    rejected = []  # only the last two are kept verbatim
    while True:
        gp = _genus_after_cover(g_C, p, m_x)
        slack = top - c * gp
        if slack < 0:
            trace.append(f"window empty at m_x = {m_x}")
            raise CertificateError("infeasible window: " + "; ".join(trace))
        if m_x % p and slack < 2 * (p - 1) * 4**d:
            break
        rejected = rejected[-1:] + [f"m_x = {m_x} rejected (slack {slack}{', divisible by p' if m_x % p == 0 else ''})"]
        m_x += 1
    if m_x > 3:
        trace.append(f"m_x = 1..{m_x - 3} rejected")
    trace.extend(rejected)
    trace.append(f"m_x = {m_x}, g(C') = {gp}, slack {slack}")
    return FujitaCertificate(d, n, g_C, e_m, m, p, b, m_x, gp, tuple(trace))


@dataclass(frozen=True)
class FujitaVerdict:
    invariants: dict
    gate_i: bool
    gate_ii: bool
    gate_iii: bool

    @property
    def passed(self) -> bool:
        return all(self.invariants.values()) and self.gate_i and self.gate_ii and self.gate_iii

    def as_dict(self) -> dict:
        return {
            "invariants": dict(self.invariants),
            "gate_i": self.gate_i,
            "gate_ii": self.gate_ii,
            "gate_iii": self.gate_iii,
            "passed": self.passed,
        }


def certificate_invariants(c: FujitaCertificate) -> dict:
    """Recheck every defining relation of the certificate from its fields."""
    k = _c(c.d)
    return {
        "m_formula": c.m == k * (c.n + 1 - c.d) + 1,
        "n_range": c.n >= minimal_n(c.d),
        "g_C_bound": c.g_C > k * (c.n + 1 - c.d),
        "p_prime": c.p > c.d and c.p % 2 == 1 and is_prime(c.p),
        "p_inequality": _prime_ok(c.d, c.n, c.g_C, c.p),
        "b_bound": c.b >= 0 and c.degree >= k * c.p * c.g_C,
        "m_x_coprime": c.m_x >= 1 and c.m_x % c.p != 0,
        "genus_formula": c.g_Cprime == _genus_after_cover(c.g_C, c.p, c.m_x),
        "window": 0 <= _window(c) < 2 * (c.p - 1) * 4**c.d,
    }


def fujita_gap_check(c: FujitaCertificate) -> FujitaVerdict:
    k = _c(c.d)
    inv = certificate_invariants(c)
    gate_i = Fraction(c.degree * (c.n + 1 - c.d), c.m) < c.g_Cprime - 1
    chain = c.g_Cprime * (k * (c.n + 1 - c.d) - c.n + 1) + c.n - 1
    gate_ii = c.degree >= k * c.g_Cprime and all(chain >= n1 for n1 in range(1, c.n - 1))
    gate_iii = c.d >= 2 and c.g_Cprime >= 1 and c.degree >= degree_threshold(c.d, c.g_Cprime)
    return FujitaVerdict(inv, gate_i, gate_ii, gate_iii)
