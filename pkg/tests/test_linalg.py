from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from mkdvgen import linalg

entries = st.integers(-5, 5).map(F)


def test_inverse():
    a = [[F(2), F(1)], [F(1), F(1)]]
    assert linalg.matmul(a, linalg.inverse(a)) == [[1, 0], [0, 1]]


def test_solve_and_inconsistent():
    a = [[F(1), F(1)], [F(2), F(2)]]
    x = linalg.solve(a, [F(3), F(6)])
    assert x[0] + x[1] == 3
    with pytest.raises(linalg.SingularSystem):
        linalg.solve(a, [F(3), F(5)])


@given(st.lists(st.lists(entries, min_size=3, max_size=3), min_size=1, max_size=4))
def test_rank_nullity(rows):
    assert linalg.rank(rows) + len(linalg.nullspace(rows)) == 3
    for v in linalg.nullspace(rows):
        assert all(sum(r * x for r, x in zip(row, v)) == 0 for row in rows)


@given(st.lists(st.lists(entries, min_size=2, max_size=2), min_size=3, max_size=5))
def test_left_inverse(rows):
    if linalg.rank(rows) < 2:
        return
    li = linalg.left_inverse(rows)
    assert linalg.matmul(li, rows) == [[1, 0], [0, 1]]
