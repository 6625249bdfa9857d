import time
from contextlib import contextmanager

import pytest

RESULTS = pytest.StashKey[dict]()


class _Outcome:
    def __init__(self):
        self.detail = ""


@pytest.fixture(scope="session")
def criterion(request):
    """``with criterion(3, "title") as c:`` records one pass/fail line for the summary."""
    results = request.config.stash.setdefault(RESULTS, {})

    @contextmanager
    def record(number, title):
        out = _Outcome()
        start = time.perf_counter()
        try:
            yield out
        except BaseException as exc:
            reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            results[number] = (False, title, f"{out.detail} | {reason}".strip(" |"), time.perf_counter() - start)
            raise
        results[number] = (True, title, out.detail, time.perf_counter() - start)

    return record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(RESULTS, {})
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for number in sorted(results):
        passed, title, detail, elapsed = results[number]
        line = f"[{'PASS' if passed else 'FAIL'}] {number:>2}. {title}: {detail} ({elapsed:.1f} s)"
        terminalreporter.write_line(line)
