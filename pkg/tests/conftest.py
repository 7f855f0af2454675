import numpy as np
import pytest


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = getattr(report, "acceptance", None)
    if marker is not None:
        _ACCEPTANCE.append((marker, report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is not None:
        report.acceptance = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (code, title), outcome in sorted(_ACCEPTANCE, key=lambda r: int(r[0][0][2:])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{verdict}  {code}  {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

