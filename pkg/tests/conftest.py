import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


def brute_force_states(N, boundary):
    """All 2^N configurations filtered by the blockade, by direct bit tests."""
    out = []
    for s in range(2**N):
        bits = [(s >> i) & 1 for i in range(N)]
        pairs = [(i, i + 1) for i in range(N - 1)]
        if boundary == "PBC" and N > 1:
            pairs.append((N - 1, 0))
        if all(not (bits[i] and bits[j]) for i, j in pairs):
            out.append(s)
    return np.array(out, dtype=np.uint64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed"):
        for rep in terminalreporter.stats.get(key, []):
            if "test_acceptance" in rep.nodeid and rep.when == "call":
                lines += [ln for ln in rep.capstdout.splitlines()
                          if ln.startswith(("PASS criterion", "FAIL criterion"))]
    if lines:
        terminalreporter.section("acceptance criteria")
        key = lambda ln: int(ln.split("criterion ")[1].split(":")[0])
        for ln in sorted(lines, key=key):
            terminalreporter.write_line(ln)
