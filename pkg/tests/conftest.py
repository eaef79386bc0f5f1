"""Collects one verdict line per acceptance criterion and prints them after the run."""

import pytest

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


@pytest.fixture
def record_criterion(request):
    lines = request.config.stash[_LINES]

    def record(number, title, passed, detail):
        verdict = "PASS" if passed else "FAIL"
        lines.append((number, f"criterion {number:>2}  {verdict}  {title}: {detail}"))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash[_LINES]
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
