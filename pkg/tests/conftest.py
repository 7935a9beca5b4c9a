import pytest

_LINES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number n")


@pytest.fixture
def note(request):
    """Attach a one-line summary to the running acceptance test."""
    def add(text: str) -> None:
        request.node.criterion_note = text
    return add


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    n = marker.args[0]
    status = "PASS" if report.passed else "FAIL"
    line = f"criterion {n:>2}: {status}  {getattr(item, 'criterion_note', '')}".rstrip()
    _LINES[n] = line
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_LINES):
            terminalreporter.write_line(_LINES[n])
