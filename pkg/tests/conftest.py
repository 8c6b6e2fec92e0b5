import pytest

from upshm.workload import IntervalProfile, Task, TaskTrace

ACCEPTANCE_RESULTS: dict = {}


def make_trace(rows, rates=((10.0, 10.0),), duration=1.0):
    """Trace from ``(arrival, service, priority, demand)`` rows; ids follow row order."""
    intervals = tuple(IntervalProfile(j, lam, mu) for j, (lam, mu) in enumerate(rates))
    tasks = tuple(Task(i, a, s, p, d) for i, (a, s, p, d) in enumerate(rows))
    return TaskTrace(intervals, tasks, duration)


@pytest.fixture
def trace_factory():
    return make_trace


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
