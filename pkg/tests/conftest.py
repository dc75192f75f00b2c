import pytest
from hypothesis import HealthCheck, settings, strategies as st

from aircomp_ia.topology import build_topology

settings.register_profile("repo", deadline=None, max_examples=30,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture
def example_topology():
    return build_topology(3, 2, [1, 1])


@pytest.fixture
def two_v_topology():
    return build_topology(2, 3, [2])


@st.composite
def topologies(draw, max_K=4, max_r=4, max_overlap=None):
    """Valid topologies: every interior cluster shares at most r transmitters."""
    K = draw(st.integers(1, max_K))
    r = draw(st.integers(1, max_r))
    overlaps = []
    prev = 0
    for _ in range(K - 1):
        hi = r - prev
        if max_overlap is not None:
            hi = min(hi, max_overlap)
        o = draw(st.integers(0, hi))
        overlaps.append(o)
        prev = o
    return build_topology(K, r, overlaps)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
