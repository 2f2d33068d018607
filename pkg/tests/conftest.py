import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from saddlescope import henon
from saddlescope.greens import GreenEvaluator

settings.register_profile(
    "saddlescope",
    deadline=None,
    derandomize=True,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("saddlescope")

A0, B0 = 6.0, 0.8
A_STAR = 4.64339843  # published boundary parameter for b = 0.8


@pytest.fixture(scope="session")
def f6():
    return henon(A0, B0)


@pytest.fixture(scope="session")
def gev6(f6):
    return GreenEvaluator(f6)


def quadratic_fixed_points(a, b):
    """Fixed points x = y of (x, y) -> (y, y^2 - a - b x): x^2 - (1 + b) x - a = 0."""
    disc = np.sqrt((1 + b) ** 2 + 4 * a)
    return sorted([((1 + b) - disc) / 2, ((1 + b) + disc) / 2])


def quadratic_multipliers(x, b):
    """Eigenvalues of [[0, 1], [-b, 2x]]: lambda^2 - 2x lambda + b = 0."""
    disc = np.sqrt(x * x - b)
    return x + disc, x - disc


# -- acceptance reporting --------------------------------------------------------------

_ACCEPTANCE: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = getattr(item, "acceptance_detail", "")
        _ACCEPTANCE[number] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        line = f"criterion {number}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
