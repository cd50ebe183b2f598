"""Collects one summary line per acceptance criterion and prints them after the run."""

import pytest

ACCEPTANCE: list[tuple[int, str, bool, float]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None and rep.when == "call":
        number, title = marker.args
        ACCEPTANCE.append((number, title, rep.passed, rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, seconds in sorted(ACCEPTANCE):
        flag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"{flag} criterion {number:>2}: {title} ({seconds:.2f} s)")
