import numpy as np
import pytest
from hypothesis import strategies as st

from netcatalyst.graph import Graph


@st.composite
def random_graphs(draw, min_n=2, max_n=7, forbidden=False):
    """Hypothesis strategy: a random graph, optionally with structural zeros."""
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**31 - 1))
    p = draw(st.floats(0.0, 1.0))
    rng = np.random.default_rng(seed)
    a = np.triu(rng.random((n, n)) < p, 1)
    forb = None
    if forbidden:
        f = np.triu(rng.random((n, n)) < 0.2, 1)
        a &= ~f
        forb = f | f.T
    return Graph(n, a | a.T, forb)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: dict[int, str] = {}


def record(number: int, ok: bool, detail: str) -> str:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
