import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from btl_uq.core import ComparisonDataset

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_connected_edges(rng, n, extra_prob=0.3):
    """Random spanning tree plus independent extra edges; returns (i, j) with i < j."""
    order = rng.permutation(n)
    pairs = set()
    for k in range(1, n):
        a, b = order[k], order[rng.integers(0, k)]
        pairs.add((min(a, b), max(a, b)))
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < extra_prob:
                pairs.add((a, b))
    pairs = sorted(pairs)
    return np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])


def random_dataset(rng, n, extra_prob=0.3, L=1, lo=0.05, hi=0.95):
    i, j = random_connected_edges(rng, n, extra_prob)
    return ComparisonDataset(n=n, i=i, j=j, ybar=rng.uniform(lo, hi, i.size),
                             count=np.full(i.size, L), L=L)


@st.composite
def connected_datasets(draw, min_n=2, max_n=10):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    return random_dataset(rng, n, extra_prob=draw(st.floats(0.0, 1.0)))


@st.composite
def merit_vectors(draw, n, kappa=2.0):
    vals = draw(st.lists(st.floats(0.0, kappa, allow_nan=False), min_size=n, max_size=n))
    return np.asarray(vals)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
