"""Collects one pass/fail line per acceptance criterion for the terminal summary."""
import pytest

_CRITERIA: dict[int, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k): acceptance criterion number k")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.failed):
        return
    k = mark.args[0]
    details = [v for name, v in item.user_properties if name == "detail"]
    entry = _CRITERIA.setdefault(k, [True, []])
    entry[0] = entry[0] and rep.passed
    entry[1].extend(details)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        ok, details = _CRITERIA[k]
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}"
        if details:
            line += "  " + "; ".join(details)
        terminalreporter.write_line(line)
