import numpy as np
import pytest

from lfholo.field import ComplexField, GridSpec


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(rng, grid):
    return ComplexField(grid, rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape))


def inner(a, b):
    """<a, b> = sum conj(a) b."""
    return np.vdot(np.asarray(a).ravel(), np.asarray(b).ravel())


def dft_matrix(n):
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


# -- acceptance summary: one line per criterion --------------------------------

_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        detail = dict(item.user_properties).get("detail", "")
        if rep.failed and not detail:
            detail = str(rep.longrepr).strip().splitlines()[-1][:160]
        _CRITERIA.append((mark.args[0], mark.args[1], rep.outcome, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, outcome, detail in sorted(_CRITERIA):
        status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{status}] criterion {num:>2}: {title} | {detail}")
