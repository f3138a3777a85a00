import os
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings, strategies as st

from mkdvgen.diffpoly import DiffPoly

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", parent=settings.get_profile("default"), max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

small_fractions = st.builds(
    Fraction,
    st.integers(-6, 6).filter(bool),
    st.integers(1, 4),
)


@st.composite
def monomials(draw, rank=1, max_order=3, max_factors=3):
    n_factors = draw(st.integers(0, max_factors))
    powers = {}
    for _ in range(n_factors):
        i = draw(st.integers(1, rank))
        n = draw(st.integers(0, max_order))
        powers[(i, n)] = powers.get((i, n), 0) + 1
    return tuple(sorted((i, n, e) for (i, n), e in powers.items()))


@st.composite
def diffpolys(draw, rank=1, max_terms=4, max_order=3, max_factors=3, constant=True):
    terms = {}
    for _ in range(draw(st.integers(0, max_terms))):
        m = draw(monomials(rank, max_order, max_factors))
        if not constant and not m:
            continue
        terms[m] = terms.get(m, 0) + draw(small_fractions)
    return DiffPoly(terms, rank)


@pytest.fixture
def u():
    return DiffPoly.var(1)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("criterion", 1)[1]):
            terminalreporter.write_line(line)
