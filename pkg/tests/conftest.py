import pytest

_outcomes = {}
_titles = {}


def pytest_runtest_logreport(report):
    crit = getattr(report, "criterion", None)
    if crit is None:
        return
    n, title = crit
    _titles[n] = title
    failed = report.failed or (report.when == "call" and report.skipped)
    if failed or n not in _outcomes:
        _outcomes[n] = _outcomes.get(n, True) and not failed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = (mark.args[0], mark.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        status = "PASS" if _outcomes[n] else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d} {status}  {_titles[n]}")
