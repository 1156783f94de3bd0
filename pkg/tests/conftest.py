"""Shared reporting: acceptance tests register one verdict line apiece."""

import pytest

_criterion_lines = []


@pytest.fixture
def record():
    return _criterion_lines.append


def pytest_terminal_summary(terminalreporter):
    if _criterion_lines:
        terminalreporter.section("acceptance criteria")
        for line in _criterion_lines:
            terminalreporter.write_line(line)
