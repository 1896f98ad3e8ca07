"""Collects the one-line acceptance verdicts and repeats them after the run."""

import pytest

_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    def record(number: int, passed: bool, detail: str) -> None:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _VERDICTS.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
