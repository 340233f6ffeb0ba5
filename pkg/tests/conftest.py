from pathlib import Path

import pytest

from fqcircle.arcs import DivisorSearch, Instance, all_functionals, build_pushforward
from fqcircle.curves import parse_curve_spec
from fqcircle.forms import parse_form

ACCEPTANCE_LINES: dict[int, str] = {}
CONFIGS_DIR = Path(__file__).resolve().parent.parent / "configs"


def make_instance(curve: str, form: str, e: int, n: int | None = None) -> Instance:
    C = parse_curve_spec(curve)
    return Instance(C, parse_form(form, C.field, n), e)


@pytest.fixture(scope="session")
def conic3():
    return make_instance("p=3 kind=hyperelliptic h=x^3+x+1", "x0^2 + x1^2 + x2^2", 3)


@pytest.fixture(scope="session")
def conic3_hist(conic3):
    return build_pushforward(conic3)


@pytest.fixture(scope="session")
def conic3_transform(conic3_hist):
    return conic3_hist.transform()


@pytest.fixture(scope="session")
def conic3_alphas(conic3):
    return all_functionals(conic3)


@pytest.fixture(scope="session")
def conic3_search(conic3):
    return DivisorSearch(conic3.curve, 6, conic3.factoring_bound)


@pytest.fixture(scope="session")
def conic3_classified(conic3_search, conic3_alphas):
    return conic3_search.classify(conic3_alphas)


@pytest.fixture(scope="session")
def cubic5():
    return make_instance("p=5 kind=hyperelliptic h=x^3+x+1", "x0^3 - x1^3 + x0*x1^2", 3)


@pytest.fixture(scope="session")
def cubic5_search(cubic5):
    return DivisorSearch(cubic5.curve, 9, cubic5.factoring_bound)


@pytest.fixture(scope="session")
def genus2():
    return make_instance("p=3 kind=hyperelliptic h=x^5+2*x+1", "x0^2 + x1^2 + x2^2", 7)


@pytest.fixture(scope="session")
def genus2_search(genus2):
    return DivisorSearch(genus2.curve, 14, genus2.factoring_bound)


@pytest.fixture(scope="session")
def acceptance_lines():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
