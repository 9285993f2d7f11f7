import numpy as np
import pytest

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    num, title = mark.args
    passed, _ = _CRITERIA.get(num, (True, title))
    if report.when == "call" or report.failed:
        passed = passed and report.passed
        _CRITERIA[num] = (passed, title)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        passed, title = _CRITERIA[num]
        terminalreporter.write_line(f"criterion {num:>2} {'PASS' if passed else 'FAIL'}  {title}")
