"""Experiment runners behind the command-line subcommands.

Each runner takes an :class:`ExperimentConfig` and returns a :class:`Report`
whose ``checks`` are the verdicts (any False means exit code 1) and whose
``observations`` are measured quantities without a pass/fail meaning.
Reports contain no timing, so equal configs give byte-identical output.
"""

from __future__ import annotations

import configparser
import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import __version__
from .algebra import CyclotomicSum, embedding, encode_vectors, get_field, is_prime
from .arcs import (
    DivisorSearch,
    Instance,
    all_functionals,
    artinian_count_enum,
    artinian_count_formula,
    artinian_difference_formula,
    build_pushforward,
    census,
    census_count,
    dimension_probe,
    embedding_values,
    intersection_violations,
    major_arc_sum_check,
    major_mask,
    minimal_sum_prediction,
    minor_arc_tail,
    partition_identity,
    to_cyclotomic,
)
from .budget import DEFAULT_MAX_ENUM
from .certificates import (
    THRESHOLD_VERSION,
    FujitaCertificate,
    ParameterTuple,
    degree_threshold,
    frontier_scan,
    fujita_gap_check,
    fujita_plan,
    verify_thresholds,
)
from .curves import CurveModel, parse_curve_spec, rr_dim
from .forms import SymmetricForm, parse_form, symmetrize
from .minor import (
    k_ratio_check,
    n_alpha,
    psi_vanishing_check,
    sample_functionals,
    shrink_check,
    weyl_check,
)


class ConfigError(ValueError):
    pass


DEFAULT_THRESHOLD_ROWS = "5,2,1,14; 5,2,2,28; 17,3,1,45; 17,3,2,124; 49,4,1,145; 49,4,2,516"


@dataclass(frozen=True)
class ExperimentConfig:
    sections: dict
    seed: int = 0
    workers: int = 1
    max_enum: int = DEFAULT_MAX_ENUM

    @classmethod
    def from_text(cls, text: str, overrides: dict | None = None) -> ExperimentConfig:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable config: {exc}") from exc
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
        if not sections:
            raise ConfigError("config has no sections")
        run = sections.get("run", {})
        budget = sections.get("budget", {})
        try:
            cfg = cls(
                sections,
                seed=int(run.get("seed", 0)),
                workers=int(run.get("workers", 1)),
                max_enum=int(budget.get("max_enum", DEFAULT_MAX_ENUM)),
            )
        except ValueError as exc:
            raise ConfigError(f"bad numeric value in [run]/[budget]: {exc}") from exc
        overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
        return replace(cfg, **overrides)

    def get(self, section: str, key: str, default=None):
        return self.sections.get(section, {}).get(key, default)

    def require(self, section: str, key: str) -> str:
        value = self.get(section, key)
        if value is None or not str(value).strip():
            raise ConfigError(f"missing [{section}] {key}")
        return value

    def integer(self, section: str, key: str, default=None) -> int | None:
        value = self.get(section, key)
        if value is None or not str(value).strip():
            return default
        try:
            return int(value)
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}") from exc

    def int_list(self, section: str, key: str, default) -> list[int]:
        value = self.get(section, key)
        if value is None or not str(value).strip():
            return list(default)
        try:
            return [int(v) for v in value.replace(",", " ").split()]
        except ValueError as exc:
            raise ConfigError(f"[{section}] {key} must list integers, got {value!r}") from exc

    def echo(self) -> dict:
        out = {s: dict(sorted(v.items())) for s, v in sorted(self.sections.items())}
        out["effective"] = {"seed": self.seed, "max_enum": self.max_enum}
        return out


@dataclass
class Report:
    experiment: str
    config: dict
    seed: int
    records: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    observations: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_dict(self) -> dict:
        return jsonable(
            {
                "experiment": self.experiment,
                "version": __version__,
                "threshold_version": THRESHOLD_VERSION,
                "seed": self.seed,
                "config": self.config,
                "records": self.records,
                "checks": self.checks,
                "observations": self.observations,
                "passed": self.passed,
            }
        )


def jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, CyclotomicSum):
        vals = embedding_values(np.asarray(_count_vector(obj))[None, :])[0]
        return {"coords": list(obj.coords), "abs": [float(abs(v)) for v in vals]}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def _count_vector(s: CyclotomicSum) -> list[int]:
    return list(s.coords) + [0]


# --- instances -------------------------------------------------------------------

DEFAULT_MAX_Q = 64


def _check_field_size(cfg: ExperimentConfig, q: int) -> None:
    max_q = cfg.integer("budget", "max_q", DEFAULT_MAX_Q)
    if q > max_q:
        raise ConfigError(f"field size q = {q} exceeds [budget] max_q = {max_q}")


def build_instance(cfg: ExperimentConfig) -> Instance:
    curve = parse_curve_spec(cfg.require("curve", "spec"))
    _check_field_size(cfg, curve.q)
    n = cfg.integer("form", "n")
    form = parse_form(cfg.require("form", "spec"), curve.field, n)
    e = cfg.integer("instance", "e")
    if e is None:
        raise ConfigError("missing [instance] e")
    return Instance(curve, form, e)


def base_change_form(form: SymmetricForm, F) -> SymmetricForm:
    emb = embedding(form.field, F)
    return symmetrize(F, form.n, form.d, {exps: int(emb[c]) for exps, c in form.monomials})


def instance_over_extension(inst: Instance, m: int) -> Instance:
    """The same curve and form over F_{q^m}."""
    if m == 1:
        return inst
    F, h = inst.curve.base_change(m)
    curve = CurveModel(F, tuple(int(c) for c in h))
    return Instance(curve, base_change_form(inst.form, F), inst.e)


def _alpha_key(inst: Instance, alpha) -> int:
    return int(encode_vectors(inst.q, np.asarray(alpha, dtype=np.int64)[None, :])[0])


def _functionals(cfg: ExperimentConfig, inst: Instance, section: str) -> tuple[np.ndarray, str]:
    samples = cfg.integer(section, "samples", 0)
    if samples:
        return sample_functionals(inst, samples, cfg.seed), f"sampled {samples} with seed {cfg.seed}"
    return all_functionals(inst), "all"


def _search(cfg: ExperimentConfig, inst: Instance, section: str, bound: int) -> DivisorSearch:
    return DivisorSearch(
        inst.curve,
        inst.d * inst.e,
        bound,
        max_point_degree=cfg.integer(section, "max_point_degree"),
        max_mult=cfg.integer(section, "max_mult"),
    )


# --- census ------------------------------------------------------------------------

def run_census(cfg: ExperimentConfig) -> Report:
    base = build_instance(cfg)
    report = Report("census", cfg.echo(), cfg.seed)
    levels = cfg.int_list("census", "tower", [1])
    insts, counts = [], []
    for m in levels:
        _check_field_size(cfg, base.q**m)
        inst = instance_over_extension(base, m)
        direct = inst.trivial_sum <= cfg.max_enum
        hist = build_pushforward(inst, cfg.max_enum, workers=cfg.workers, separable=not direct)
        count = census_count(inst, hist, cfg.max_enum)
        rec = {"q": inst.q, "count_Me": count}
        if direct:
            cen = census(inst, cfg.max_enum)
            rec.update(count_bpf=cen.count_bpf, mor_count=cen.mor_count)
            report.checks[f"census_agrees_q{inst.q}"] = cen.count_Me == count
        transform = hist.transform(cfg.max_enum)
        lhs, rhs = partition_identity(inst, transform, count)
        rec.update(sum_S=lhs, q_dim_times_count=rhs)
        report.checks[f"partition_identity_q{inst.q}"] = lhs == rhs
        tail = minor_arc_tail(inst, transform, major_mask(inst))
        scale = inst.q ** ((inst.n + 1) * (inst.e + 1 - inst.g))
        rec.update(
            minor_count=tail.minor_count,
            major_count=tail.major_count,
            minor_tail_normalized=max(tail.normalized_abs),
            minor_tail_exact=Fraction(tail.tail.as_integer(), scale) if tail.tail.is_integer() else None,
        )
        report.records.append(rec)
        insts.append(inst)
        counts.append(count)
    probe = dimension_probe(insts, counts)
    report.observations["dimension_probe"] = [
        {"q": r.q, "count": r.count, "mu_hat": r.mu_hat, "ratio": r.ratio, "log_excess": round(r.log_ratio, 12)}
        for r in probe
    ]
    tails = [r["minor_tail_normalized"] for r in report.records]
    report.observations["minor_tail_decreasing"] = all(b < a for a, b in zip(tails, tails[1:]))
    ratios = [abs(float(r.ratio) - 1) for r in probe]
    report.observations["ratio_approaches_one"] = all(b < a for a, b in zip(ratios, ratios[1:]))
    return report


# --- arcs ---------------------------------------------------------------------------

def run_arcs(cfg: ExperimentConfig) -> Report:
    inst = build_instance(cfg)
    report = Report("arcs", cfg.echo(), cfg.seed)
    alphas = all_functionals(inst)
    search = _search(cfg, inst, "arcs", inst.factoring_bound)
    degs, minimal = search.classify(alphas)
    hist_deg = Counter(int(x) for x in degs)
    report.observations["degree_histogram"] = dict(sorted(hist_deg.items()))
    report.observations["divisors_searched"] = len(search.nodes)
    report.checks["factoring_bound"] = bool(np.all((degs >= 0) & (degs <= inst.factoring_bound)))
    major = (degs >= 0) & (degs <= inst.major_bound)
    report.checks["unique_minimal_below_major_bound"] = all(len(minimal[i]) == 1 for i in np.nonzero(major)[0])

    hits_size = len(search.nodes) * alphas.shape[0]
    if hits_size <= cfg.max_enum:
        bad = intersection_violations(inst, search, alphas)
        report.checks["intersection_closure"] = not bad
        report.observations["intersection_violations"] = len(bad)

    hist = build_pushforward(inst, cfg.max_enum, workers=cfg.workers)
    max_pd = cfg.integer("arcs", "major_point_degree", 2)
    small = [
        nd.divisor
        for nd in search.nodes
        if nd.sort_key[0] <= inst.major_bound and all(P.degree <= max_pd for P in nd.divisor.support())
    ]
    major_ok = True
    for Z in small:
        chk = major_arc_sum_check(inst, hist, Z, cfg.max_enum)
        major_ok &= chk.holds
        report.records.append(
            {"check": "major_arc_sum", "divisor": str(Z), "alphas": chk.num_alphas, "lhs": chk.lhs, "rhs": chk.rhs, "holds": chk.holds}
        )
    report.checks["major_arc_sums"] = bool(major_ok)

    transform = hist.transform(cfg.max_enum)
    by_min: dict = defaultdict(lambda: np.zeros(inst.p, dtype=np.int64))
    for i in np.nonzero(major)[0]:
        by_min[minimal[i][0]] += transform[i]
    observed = {}
    min_ok = True
    for node, total in sorted(by_min.items()):
        Z = search.nodes[node].divisor
        if not all(P.degree <= max_pd for P in Z.support()):
            continue
        val = to_cyclotomic(inst.p, total)
        pred = minimal_sum_prediction(inst, Z)
        holds = val.is_integer() and Fraction(val.as_integer()) == pred
        min_ok &= holds
        observed[Z] = Fraction(val.as_integer()) if val.is_integer() else None
        report.records.append({"check": "minimal_sum", "divisor": str(Z), "observed": val, "predicted": pred, "holds": holds})
    report.checks["minimal_sums"] = bool(min_ok)

    scale = Fraction(inst.q ** ((inst.n + 1) * (inst.e + 1 - inst.g)))
    mult_ok, pairs = True, 0
    for Z1, Z2 in itertools.combinations(observed, 2):
        if set(Z1.support()) & set(Z2.support()):
            continue
        Z = Z1 + Z2
        if Z not in observed:
            continue
        pairs += 1
        if observed[Z] is None or observed[Z1] is None or observed[Z2] is None:
            mult_ok = False
        else:
            mult_ok &= observed[Z] * scale == observed[Z1] * observed[Z2]
    report.checks["disjoint_multiplicativity"] = bool(mult_ok)
    report.observations["multiplicativity_pairs"] = pairs
    return report


# --- Artinian counts -----------------------------------------------------------------

def fermat_form(F, n: int, d: int) -> SymmetricForm:
    return symmetrize(F, n, d, {tuple(d if i == j else 0 for i in range(n + 1)): 1 for j in range(n + 1)})


def run_artinian(cfg: ExperimentConfig) -> Report:
    report = Report("artinian", cfg.echo(), cfg.seed)
    qs = cfg.int_list("artinian", "q", [3, 5])
    ds = cfg.int_list("artinian", "d", [2, 3])
    ns = cfg.int_list("artinian", "n", [1, 2])
    r_max = cfg.integer("artinian", "r_max", 4)
    point_degrees = cfg.int_list("artinian", "point_degree", [1])
    ok_formula = ok_diff = True
    for q in qs:
        p = next((p for p in range(2, q + 1) if q % p == 0), None)
        k = round(math.log(q, p)) if p else 0
        if p is None or p**k != q or not is_prime(p):
            raise ConfigError(f"q = {q} is not a prime power")
        F = get_field(p, k)
        for d, n, deg in itertools.product(ds, ns, point_degrees):
            if p <= d:
                continue
            form = fermat_form(F, n, d)
            counts = {r: artinian_count_enum(form, deg, r, cfg.max_enum) for r in range(1, r_max + 1)}
            star = counts[1] - 1
            Q = q**deg
            for r in range(1, r_max + 1):
                _, formula = artinian_count_formula(form, deg, r, star)
                rec = {"q": q, "d": d, "n": n, "point_degree": deg, "r": r, "enumerated": counts[r], "formula": formula}
                rec["holds"] = formula == counts[r]
                ok_formula &= rec["holds"]
                if r >= 2:
                    diff = artinian_difference_formula(form, deg, r, star)
                    observed = Fraction(counts[r], Q ** (n * r)) - Fraction(counts[r - 1], Q ** (n * (r - 1)))
                    rec["difference_holds"] = diff == observed
                    ok_diff &= rec["difference_holds"]
                report.records.append(rec)
    report.checks["closed_form"] = bool(ok_formula)
    report.checks["difference_rule"] = bool(ok_diff)
    return report


# --- Weyl -------------------------------------------------------------------------------

def run_weyl(cfg: ExperimentConfig) -> Report:
    inst = build_instance(cfg)
    report = Report("weyl", cfg.echo(), cfg.seed)
    alphas, how = _functionals(cfg, inst, "weyl")
    tol = float(cfg.get("weyl", "rel_tol", "1e-6"))
    hist = build_pushforward(inst, cfg.max_enum, workers=cfg.workers, separable=False)
    sums = hist.sums(alphas)
    ok = True
    worst = math.inf
    for a, sc in zip(alphas, sums):
        N = n_alpha(inst, a, cfg.max_enum)
        rec = weyl_check(inst, sc, N, tol)
        ok &= rec.holds
        worst = min(worst, rec.margin / rec.rhs)
        report.records.append({"alpha": _alpha_key(inst, a), "N": N, "lhs_max": max(rec.lhs), "rhs": rec.rhs, "holds": rec.holds})
    report.checks["weyl_inequality"] = bool(ok)
    report.observations["functionals"] = how
    report.observations["min_relative_margin"] = worst
    return report


# --- shrinking ---------------------------------------------------------------------------

def run_shrink(cfg: ExperimentConfig) -> Report:
    inst = build_instance(cfg)
    report = Report("shrink", cfg.echo(), cfg.seed)
    alphas, how = _functionals(cfg, inst, "shrink")
    search = _search(cfg, inst, "shrink", inst.factoring_bound)
    degs, _ = search.classify(alphas)
    rng = np.random.default_rng(cfg.seed + 1)
    fixed_samples = cfg.integer("shrink", "fixed_samples", 2)
    ok_shrink = ok_k = ok_psi = True
    resolved = True
    for a, deg in zip(alphas, degs):
        deg = int(deg)
        if deg < 0:
            resolved = False
            continue
        if deg <= inst.major_bound:
            continue
        sh = shrink_check(inst, a, deg, cfg.max_enum)
        ok_shrink &= sh.holds
        k_ok = True
        for ell in range(inst.d - 1):
            levels = [inst.e - sh.s] * ell + [inst.e] * (inst.d - 2 - ell)
            trials = 1 if not levels else fixed_samples
            for _ in range(trials):
                fixed = [rng.integers(0, inst.q, size=(inst.n + 1, rr_dim(inst.curve, lv)), dtype=np.int64) for lv in levels]
                k_ok &= k_ratio_check(inst, a, sh.s, ell, fixed).holds(inst.q)
        ok_k &= k_ok
        pv = psi_vanishing_check(inst, a, sh.s, deg, cfg.max_enum)
        if pv.hypothesis:
            ok_psi &= pv.counterexamples == 0
        report.records.append(
            {
                "alpha": _alpha_key(inst, a),
                "deg_alpha": deg,
                "s": sh.s,
                "N": sh.N,
                "N_s": sh.N_s,
                "exponent": sh.exponent,
                "shrink_holds": sh.holds,
                "k_ratio_holds": k_ok,
                "psi_vanishing_hypothesis": pv.hypothesis,
                "psi_vanishing_counterexamples": pv.counterexamples,
            }
        )
    report.checks["degrees_resolved"] = resolved
    report.checks["shrink_bound"] = bool(ok_shrink)
    report.checks["k_ratio_bound"] = bool(ok_k)
    report.checks["psi_vanishing_no_counterexamples"] = bool(ok_psi)
    report.observations["functionals"] = how
    report.observations["minor_tested"] = len(report.records)
    return report


# --- thresholds and the Fujita planner ------------------------------------------------------

def _tuples(text: str, width: int, what: str) -> list[tuple[int, ...]]:
    out = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        try:
            vals = tuple(int(v) for v in chunk.replace(",", " ").split())
        except ValueError as exc:
            raise ConfigError(f"{what}: {chunk!r} is not a list of integers") from exc
        if len(vals) != width:
            raise ConfigError(f"{what}: expected {width} integers, got {chunk!r}")
        out.append(vals)
    return out


def run_bounds(cfg: ExperimentConfig) -> Report:
    report = Report("bounds", cfg.echo(), cfg.seed)
    rows = _tuples(cfg.get("bounds", "rows", DEFAULT_THRESHOLD_ROWS), 4, "[bounds] rows")
    for n, d, g, e in rows:
        v = verify_thresholds(ParameterTuple(n, d, g, e))
        report.checks[f"row_{n}_{d}_{g}_{e}"] = v.passed and v.all_valid
        report.records.append(
            {
                "n": n,
                "d": d,
                "g": g,
                "e": e,
                "degree_threshold": degree_threshold(d, g),
                "passed": v.passed,
                "witness": v.witness,
                "all_valid": v.all_valid,
                "max_value": max((r.value for r in v.rows if r.value is not None), default=None),
                "rows": len(v.rows),
            }
        )
    frontier = cfg.get("bounds", "frontier")
    if frontier:
        for n, d, g, lo, hi in _tuples(frontier, 5, "[bounds] frontier"):
            table, first = frontier_scan(n, d, g, range(lo, hi + 1))
            report.observations[f"frontier_{n}_{d}_{g}"] = {
                "minimal_passing_e": first,
                "table": [{"e": r.e, "passed": r.passed, "witness": r.witness} for r in table],
            }
    return report


def corrupted_variants(c: FujitaCertificate):
    """Each numeric field shifted by -1 and +1."""
    for name in ("d", "n", "g_C", "e_m", "m", "p", "b", "m_x", "g_Cprime"):
        for delta in (-1, 1):
            yield name, delta, replace(c, **{name: getattr(c, name) + delta})


def run_fujita(cfg: ExperimentConfig) -> Report:
    report = Report("fujita", cfg.echo(), cfg.seed)
    cases = _tuples(cfg.get("fujita", "cases", "2,5,129,2"), 4, "[fujita] cases")
    for d, n, g_C, e_m in cases:
        cert = fujita_plan(d, n, g_C, e_m)
        verdict = fujita_gap_check(cert)
        undetected = [f"{name}{delta:+d}" for name, delta, bad in corrupted_variants(cert) if fujita_gap_check(bad).passed]
        tag = f"{d}_{n}_{g_C}_{e_m}"
        report.checks[f"gates_{tag}"] = verdict.passed
        report.checks[f"corruption_detected_{tag}"] = not undetected
        report.records.append({"certificate": cert.as_dict(), "verdict": verdict.as_dict(), "undetected_corruptions": undetected})
    return report


RUNNERS = {
    "census": run_census,
    "arcs": run_arcs,
    "artinian": run_artinian,
    "weyl": run_weyl,
    "shrink": run_shrink,
    "bounds": run_bounds,
    "fujita": run_fujita,
}
