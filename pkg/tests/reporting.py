"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import time
from contextlib import contextmanager

RESULTS: dict[int, str] = {}


@contextmanager
def criterion(number: int, title: str, budget_s: float | None = None):
    """Record the outcome of the body; a runtime budget overrun counts as a failure."""
    start = time.perf_counter()
    details: dict = {}
    try:
        yield details
    except BaseException as exc:
        elapsed = time.perf_counter() - start
        RESULTS[number] = f"[{number:2d}] FAIL  {title} ({elapsed:.1f}s): {type(exc).__name__}: {exc}".splitlines()[0]
        raise
    elapsed = time.perf_counter() - start
    extra = ", ".join(f"{k}={v}" for k, v in details.items())
    if budget_s is not None and elapsed > budget_s:
        RESULTS[number] = f"[{number:2d}] FAIL  {title}: took {elapsed:.1f}s, budget {budget_s:.0f}s"
        raise AssertionError(RESULTS[number])
    RESULTS[number] = f"[{number:2d}] PASS  {title} ({elapsed:.1f}s{', ' + extra if extra else ''})"
