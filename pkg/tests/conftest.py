from collections import defaultdict

import pytest

_RESULTS: dict[int, list[tuple[bool, str]]] = defaultdict(list)


@pytest.fixture
def criterion():
    """Record one part of an acceptance criterion and echo a pass/fail line."""

    def record(number: int, ok: bool, detail: str) -> bool:
        _RESULTS[number].append((bool(ok), detail))
        print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_RESULTS):
        parts = _RESULTS[number]
        ok = all(p for p, _ in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: " + "; ".join(d for _, d in parts))
