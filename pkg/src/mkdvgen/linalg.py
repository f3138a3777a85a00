"""Small dense linear algebra over the rationals (Gauss-Jordan on Fractions)."""

from __future__ import annotations

from fractions import Fraction
from typing import List, Sequence

Matrix = List[List[Fraction]]


class SingularSystem(ArithmeticError):
    pass


def to_fraction_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[Fraction(x) for x in row] for row in rows]


def rref(a: Sequence[Sequence]) -> tuple[Matrix, list]:
    """Reduced row echelon form and the list of pivot columns."""
    m = to_fraction_matrix(a)
    if not m:
        return m, []
    rows, cols = len(m), len(m[0])
    pivots = []
    r = 0
    for c in range(cols):
        p = next((k for k in range(r, rows) if m[k][c]), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = 1 / m[r][c]
        m[r] = [x * inv for x in m[r]]
        for k in range(rows):
            if k != r and m[k][c]:
                f = m[k][c]
                m[k] = [x - f * y for x, y in zip(m[k], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def rank(a: Sequence[Sequence]) -> int:
    return len(rref(a)[1])


def inverse(a: Sequence[Sequence]) -> Matrix:
    n = len(a)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(a)]
    red, piv = rref(aug)
    if piv[:n] != list(range(n)):
        raise SingularSystem("matrix is singular")
    return [row[n:] for row in red]


def transpose(a: Sequence[Sequence]) -> Matrix:
    return [list(col) for col in zip(*a)]


def matmul(a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), Fraction(0)) for col in bt] for row in a]


def left_inverse(a: Sequence[Sequence]) -> Matrix:
    """(A^T A)^-1 A^T for a full-column-rank A; solves consistent systems exactly."""
    at = transpose(to_fraction_matrix(a))
    return matmul(inverse(matmul(at, a)), at)


def solve(a: Sequence[Sequence], b: Sequence) -> list:
    """Solve A x = b, returning one solution (free variables set to zero).

    Raises SingularSystem if the system is inconsistent.
    """
    cols = len(a[0]) if a else 0
    aug = [list(row) + [b_i] for row, b_i in zip(a, b)]
    red, piv = rref(aug)
    if cols in piv:
        raise SingularSystem("inconsistent linear system")
    x = [Fraction(0)] * cols
    for row, c in zip(red, piv):
        x[c] = row[cols]
    return x


def nullspace(a: Sequence[Sequence]) -> Matrix:
    if not a:
        return []
    cols = len(a[0])
    red, piv = rref(a)
    free = [c for c in range(cols) if c not in piv]
    basis = []
    for f in free:
        v = [Fraction(0)] * cols
        v[f] = Fraction(1)
        for row, c in zip(red, piv):
            v[c] = -row[f]
        basis.append(v)
    return basis
