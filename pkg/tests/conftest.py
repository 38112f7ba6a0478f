import contextlib
import time

import pytest

_RESULTS = []


@pytest.fixture
def criterion():
    """``with criterion(3, "BIC correctness"):`` records PASS/FAIL and elapsed time."""

    @contextlib.contextmanager
    def record(number, title):
        start = time.perf_counter()
        try:
            yield
        except BaseException as exc:
            _RESULTS.append((number, title, "FAIL", time.perf_counter() - start, type(exc).__name__))
            raise
        _RESULTS.append((number, title, "PASS", time.perf_counter() - start, ""))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, elapsed, note in sorted(_RESULTS, key=lambda r: (r[0], r[1])):
        extra = f" ({note})" if note else ""
        terminalreporter.write_line(f"[{status}] criterion {number}: {title} [{elapsed:.2f}s]{extra}")
