"""Shared fixtures and the acceptance summary printed at the end of a run."""

import numpy as np
import pytest

from fgplab.generators import Affine, DiversityPower, GeometricMean, MinOfAffines

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion check")


def pytest_runtest_logreport(report):
    number = getattr(report, "acceptance", None)
    if number is None:
        return
    if report.when == "call" or report.failed or report.skipped:
        title, ok = _ACCEPTANCE.get(number, (report.acceptance_title, True))
        _ACCEPTANCE[number] = (title, ok and report.passed)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        rep.acceptance = marker.args[0]
        rep.acceptance_title = marker.args[1]


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, ok = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def builtin_generators():
    """One instance of each built-in kind on three stocks."""
    return [
        GeometricMean([0.2, 0.3, 0.5]),
        DiversityPower(0.5),
        Affine([1.0, 2.0, 3.0]),
        MinOfAffines([[1.0, 2.0, 3.0], [3.0, 1.0, 1.0], [2.0, 2.0, 0.5]]),
    ]


@pytest.fixture(params=range(4), ids=["geometric_mean", "diversity", "affine", "min_affine"])
def generator(request):
    return builtin_generators()[request.param]
