import json
from fractions import Fraction

import pytest

from fqcircle.experiments import RUNNERS, ConfigError, ExperimentConfig, jsonable

from .conftest import CONFIGS_DIR


def load(name, extra=""):
    return ExperimentConfig.from_text((CONFIGS_DIR / name).read_text() + extra)


def test_config_parsing_and_overrides():
    cfg = ExperimentConfig.from_text("[run]\nseed = 3\nworkers = 2\n[census]\ntower = 1 2\n", {"seed": 9, "workers": None})
    assert cfg.seed == 9 and cfg.workers == 2
    assert cfg.int_list("census", "tower", [1]) == [1, 2]
    assert cfg.integer("census", "missing", 5) == 5
    assert cfg.echo()["effective"] == {"seed": 9, "max_enum": cfg.max_enum}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[run]\nseed = x\n")
    with pytest.raises(ConfigError):
        cfg.require("form", "spec")
    with pytest.raises(ConfigError):
        ExperimentConfig.from_text("[a]\nk = v\n").integer("a", "k")


def test_field_size_cap():
    spec = "[curve]\nspec = p=3 k=4 kind=p1\n[form]\nspec = x0^2 + x1^2\n[instance]\ne = 1\n"
    with pytest.raises(ConfigError):
        RUNNERS["census"](ExperimentConfig.from_text(spec))
    with pytest.raises(ConfigError):
        RUNNERS["census"](load("conic_q3.ini", "\n[census]\ntower = 1 4\n"))
    report = RUNNERS["census"](ExperimentConfig.from_text(spec.replace("k=4", "k=2") + "[budget]\nmax_q = 9\n"))
    assert report.records[0]["q"] == 9


def test_jsonable():
    assert jsonable({"a": Fraction(1, 3), "b": (1, 2)}) == {"a": "1/3", "b": [1, 2]}


def test_arcs_runner():
    report = RUNNERS["arcs"](load("conic_q3.ini"))
    assert report.passed and len(report.checks) == 6
    obs = report.observations
    assert obs["degree_histogram"] == {0: 1, 1: 8, 2: 96, 3: 522, 4: 102}
    assert obs["divisors_searched"] == 233 and obs["intersection_violations"] == 0
    assert obs["multiplicativity_pairs"] == 26


def test_weyl_runner():
    report = RUNNERS["weyl"](load("conic_q3.ini"))
    assert report.passed
    # quadrics meet the bound with equality, so only rounding separates the sides
    assert report.observations["min_relative_margin"] > -1e-9


def test_shrink_runner_on_conic():
    report = RUNNERS["shrink"](load("conic_q3.ini", "\n[shrink]\nsamples = 60\n"))
    assert report.passed
    assert {r["s"] for r in report.records} == {2}
    json.dumps(report.to_dict())


def test_artinian_runner_small_grid():
    extra = "\n[artinian]\nq = 3\nd = 2\nn = 1 2\nr_max = 3\npoint_degree = 1\n"
    report = RUNNERS["artinian"](ExperimentConfig.from_text(extra))
    assert report.passed and len(report.records) == 6


def test_reports_are_reproducible():
    a = RUNNERS["shrink"](load("conic_q3.ini", "\n[shrink]\nsamples = 20\n")).to_dict()
    b = RUNNERS["shrink"](load("conic_q3.ini", "\n[shrink]\nsamples = 20\n")).to_dict()
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
