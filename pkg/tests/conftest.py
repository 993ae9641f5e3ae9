"""Shared fixtures and the acceptance-criteria report printed after the run."""

from __future__ import annotations

from collections import defaultdict

import pytest

# criterion number -> list of (part, passed, detail)
_CRITERIA: dict[int, list[tuple[str, bool, str]]] = defaultdict(list)
_TITLES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one checked part of an acceptance criterion.

    Usage: ``assert criterion(7, "title", "part", ok, "detail")``.
    """

    def record(number: int, title: str, part: str, passed: bool, detail: str = "") -> bool:
        _TITLES[number] = title
        _CRITERIA[number].append((part, bool(passed), detail))
        status = "PASS" if passed else "FAIL"
        print(f"[{status}] criterion {number} {part}: {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        parts = _CRITERIA[number]
        ok = all(p for _, p, _ in parts)
        details = "; ".join(f"{name} {'ok' if p else 'FAILED'} ({d})" for name, p, d in parts)
        terminalreporter.write_line(
            f"{'PASS' if ok else 'FAIL'}  {number:>2}. {_TITLES[number]} | {details}"
        )
