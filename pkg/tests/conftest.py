import itertools
import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    derandomize=True,
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


def free_reduce_brute(w):
    """Reference reducer: try every rotation and every greedy order, keep the shortest result."""
    best = tuple(w)
    frontier = {tuple(w)}
    seen = set(frontier)
    while frontier:
        nxt = set()
        for u in frontier:
            n = len(u)
            for i in range(n):
                j = (i + 1) % n
                if n >= 2 and u[i] == -u[j] and i != j:
                    if j == 0:
                        v = u[1:i]
                    else:
                        v = u[:i] + u[i + 2 :]
                    if v not in seen:
                        seen.add(v)
                        nxt.add(v)
                        if len(v) < len(best):
                            best = v
        frontier = nxt
    return best


@pytest.fixture
def brute_reducer():
    return free_reduce_brute


def all_words(m, d):
    for combo in itertools.product(range(1, d + 1), repeat=m):
        for signs in itertools.product((1, -1), repeat=m):
            yield tuple(s * e for s, e in zip(combo, signs))


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
