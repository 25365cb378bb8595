import time

import pytest

_LINES: list[str] = []


class Criterion:
    """Times one acceptance criterion and records a PASS/FAIL line.

    Use as a context manager; an exception inside the block, or exceeding
    ``budget`` seconds, marks the criterion failed.  ``detail`` is appended
    to the line.
    """

    def __init__(self, number: int, title: str, budget: float | None = None):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        over = self.budget is not None and elapsed >= self.budget
        ok = exc_type is None and not over
        why = self.detail
        if exc_type is not None:
            why = f"{exc_type.__name__}: {exc}".splitlines()[0]
        elif over:
            why = f"runtime {elapsed:.2f}s exceeds {self.budget:g}s; {self.detail}"
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number:2d} {self.title} ({elapsed:.2f}s) {why}"
        _LINES.append(line)
        print(line)
        if over:
            raise AssertionError(line)
        return False


@pytest.fixture
def criterion():
    return Criterion


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split("criterion")[1].split()[0])):
            terminalreporter.write_line(line)
