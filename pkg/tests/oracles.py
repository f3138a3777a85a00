"""Independent reference computations built on sympy.

Nothing here imports the package's ring or loop-algebra code; the helpers
only convert results for comparison.
"""

from __future__ import annotations

from itertools import combinations_with_replacement

import sympy as sp

z, lam = sp.symbols("z lam")


def fields(rank):
    return [sp.Function(f"u{i}")(z) for i in range(1, rank + 1)]


def weight_monomials(us, weight):
    """Products of derivatives d^n u_i (weight n + 1) of total weight ``weight``."""
    jets = [(sp.diff(f, z, n), n + 1) for f in us for n in range(weight)]
    out = []
    for k in range(1, weight + 1):
        for combo in combinations_with_replacement(range(len(jets)), k):
            if sum(jets[c][1] for c in combo) == weight:
                out.append(sp.Mul(*[jets[c][0] for c in combo]))
    return out


def principal_slice(h, j):
    """Matrix units E_ab lam^k spanning principal degree j in sl_h[lam, 1/lam]."""
    basis = []
    for a in range(h):
        for b in range(h):
            if (j - (b - a)) % h:
                continue
            k = (j - (b - a)) // h
            if a == b:
                continue
            m = sp.zeros(h, h)
            m[a, b] = lam**k
            basis.append(m)
    if j % h == 0:
        k = j // h
        for a in range(h - 1):
            m = sp.zeros(h, h)
            m[a, a], m[a + 1, a + 1] = lam**k, -lam**k
            basis.append(m)
    return basis


def big_lambda(h, n):
    m = sp.zeros(h, h)
    for a in range(h):
        m[a, (a + 1) % h] = lam if a == h - 1 else 1
    if n >= 0:
        return m**n
    return sp.simplify((m**-1) ** (-n))


def cartan(us):
    """Traceless diagonal with consecutive differences u_1, ..., u_r."""
    h = len(us) + 1
    d = sp.symbols(f"d0:{h}")
    eqs = [d[a] - d[a + 1] - us[a] for a in range(h - 1)] + [sum(d)]
    sol = sp.solve(eqs, d, dict=True)[0]
    return sp.diag(*[sol[x] for x in d])


def _jet_symbols(expr, us):
    """Replace every derivative of every field by a plain symbol."""
    derivs = sorted(expr.atoms(sp.Derivative), key=lambda d: -d.derivative_count)
    subs = {d: sp.Symbol(f"J_{d.expr.func.__name__}_{d.derivative_count}") for d in derivs}
    subs.update({f: sp.Symbol(f"J_{f.func.__name__}_0") for f in us})
    return expr.subs(subs), list(subs.values())


def ansatz_flow(rank, n):
    """Solve d_n u = M' + [p_-1 + u, M] with M = p_-n + lower by undetermined coefficients.

    The unknown right-hand side is a general homogeneous polynomial of weight
    n + 1 in each component; the lower part of M is a general element of each
    principal degree -n+1, ..., 0 with coefficients of weight n + j.
    Returns the list of solved right-hand sides.
    """
    h = rank + 1
    us = fields(rank)
    unknowns = []
    counter = iter(range(10**6))

    def general(weight, basis):
        total = sp.zeros(h, h)
        for mono in weight_monomials(us, weight):
            for b in basis:
                c = sp.Symbol(f"c{next(counter)}")
                unknowns.append(c)
                total += c * mono * b
        return total

    M = big_lambda(h, -n)
    for j in range(-n + 1, 1):
        M += general(n + j, principal_slice(h, j))
    rhs = []
    for i in range(rank):
        expr = 0
        for mono in weight_monomials(us, n + 1):
            c = sp.Symbol(f"c{next(counter)}")
            unknowns.append(c)
            expr += c * mono
        rhs.append(expr)
    L0 = big_lambda(h, -1) + cartan(us)
    residual = cartan(rhs) - M.diff(z) - (L0 * M - M * L0)
    equations = []
    for entry in residual:
        e = sp.expand(entry * lam ** (n + 2))
        e, jets = _jet_symbols(e, us)
        poly = sp.Poly(e, lam, *jets)
        equations.extend(poly.coeffs())
    sol = sp.solve(equations, unknowns, dict=True)
    if len(sol) != 1:
        raise AssertionError("ansatz system has no unique solution")
    solved = [sp.expand(r.subs(sol[0])) for r in rhs]
    leftover = set().union(*(r.free_symbols for r in solved)) & set(unknowns)
    if leftover:
        raise AssertionError(f"right-hand side not determined: {leftover}")
    return solved


def to_sympy(p, rank=None):
    """DiffPoly -> sympy expression in the fields u1(z), ..., ur(z)."""
    us = fields(rank or p.rank)
    out = 0
    for mono, c in p:
        term = sp.Rational(c.numerator, c.denominator)
        for i, n, e in mono:
            term *= sp.diff(us[i - 1], z, n) ** e
        out += term
    return sp.expand(out)


def miura_kdv_oracle(alpha, beta):
    """Push d_t u = alpha u''' + beta u^2 u' through v = u^2/2 + u'.

    Returns (d_t v in u, candidate KdV form (a v''' + b v v') in u, a, b) with a, b
    read from the known structure a = alpha, b = 2 beta.
    """
    (u,) = fields(1)
    ut = alpha * u.diff(z, 3) + beta * u**2 * u.diff(z)
    v = u**2 / 2 + u.diff(z)
    vt = sp.expand(u * ut + ut.diff(z))
    a, b = alpha, 2 * beta
    kdv = sp.expand(a * v.diff(z, 3) + b * v * v.diff(z))
    return vt, kdv, a, b


def euler_operator(expr, rank=1):
    """Variational derivatives of a density via sympy's Euler-Lagrange equations."""
    us = fields(rank)
    eqs = sp.calculus.euler.euler_equations(expr, us, z)
    return [sp.expand(e.lhs) for e in eqs]
