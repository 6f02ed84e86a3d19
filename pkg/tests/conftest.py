"""Shared test plumbing: the acceptance summary printed at the end of a run."""
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.fixture
def detail(request):
    """Append a human-readable measurement to the acceptance summary line."""
    notes: list[str] = []
    request.node.user_properties.append(("detail", notes))
    return notes.append


def pytest_runtest_logreport(report):
    marker = getattr(report, "_criterion", None)
    if marker is None:
        return
    number, title = marker
    notes = next((v for k, v in report.user_properties if k == "detail"), [])
    if report.when == "call" or (report.when == "setup" and report.failed):
        outcome = "PASS" if report.passed else "FAIL"
        _RESULTS[number] = (outcome, title, "; ".join(notes))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report._criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        outcome, title, notes = _RESULTS[number]
        line = f"C{number:<3d}{outcome}  {title}"
        if notes:
            line += f"  [{notes}]"
        terminalreporter.write_line(line)
