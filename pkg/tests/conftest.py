import pytest

_ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    number, title = marker.args
    verdict = "PASS" if report.passed else "FAIL"
    _ACCEPTANCE.append((number, title, verdict))
    # shown inline under -v, and again in the summary below
    print(f"\ncriterion {number:2d} {verdict}: {title}")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, verdict in sorted(_ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d} {verdict}: {title}")
