import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when not in ("setup", "call"):
        return
    number, title = marker.args
    if report.failed or report.when == "call":
        entry = _RESULTS.setdefault(number, [title, "PASS", 0.0, []])
        if report.failed:
            entry[1] = "FAIL"
        entry[2] += report.duration
        entry[3].extend(str(v) for k, v in report.user_properties if k == "note")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, duration, notes = _RESULTS[number]
        extra = f" -- {'; '.join(notes)}" if notes else ""
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} ({duration:.2f}s){extra}")
