"""Exact differential polynomials in the jet variables u_i^(n).

A :class:`DiffPoly` is a sparse map from monomials to :class:`fractions.Fraction`
coefficients.  A monomial is a sorted tuple of ``(i, n, e)`` triples meaning
``(u_i^(n))**e``; jet indices ``i`` run over ``1..rank``.

The principal weight of ``u_i^(n)`` is ``n + 1``, so the total derivative
raises the weight of every term by exactly one.

Example:
    >>> u = DiffPoly.var(1)
    >>> (u * u).diff()
    2*u*u'
"""

from __future__ import annotations

import json
from fractions import Fraction
from functools import lru_cache
from numbers import Rational
from typing import Callable, Dict, Iterable, Iterator, Mapping, Tuple, Union

Monomial = Tuple[Tuple[int, int, int], ...]
JetVar = Tuple[int, int]
Scalar = Union[int, Fraction]

ONE: Monomial = ()


class NotExact(ArithmeticError):
    """Raised when a differential polynomial is not a total derivative."""


class RankMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# monomial helpers (memoized: the recursion multiplies the same monomials a lot)


@lru_cache(maxsize=1 << 18)
def mono_mul(a: Monomial, b: Monomial) -> Monomial:
    if not a:
        return b
    if not b:
        return a
    exps: Dict[JetVar, int] = {}
    for i, n, e in a:
        exps[(i, n)] = e
    for i, n, e in b:
        exps[(i, n)] = exps.get((i, n), 0) + e
    return tuple(sorted((i, n, e) for (i, n), e in exps.items()))


@lru_cache(maxsize=1 << 18)
def mono_diff(m: Monomial) -> Tuple[Tuple[Monomial, int], ...]:
    """Total derivative of a monomial as ``((monomial, multiplicity), ...)``."""
    out: Dict[Monomial, int] = {}
    for pos, (i, n, e) in enumerate(m):
        exps = {(a, b): c for a, b, c in m}
        if e == 1:
            del exps[(i, n)]
        else:
            exps[(i, n)] = e - 1
        exps[(i, n + 1)] = exps.get((i, n + 1), 0) + 1
        key = tuple(sorted((a, b, c) for (a, b), c in exps.items()))
        out[key] = out.get(key, 0) + e
    return tuple(out.items())


def mono_weight(m: Monomial) -> int:
    return sum((n + 1) * e for _, n, e in m)


def mono_degree(m: Monomial) -> int:
    return sum(e for _, _, e in m)


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(f"exact rational expected, got {type(c).__name__}")


class DiffPoly:
    """Element of Q[u_i^(n)], immutable by convention.

    Construct via :meth:`var`, :meth:`const` or from a ``{monomial: coeff}``
    mapping.  Zero coefficients are dropped on construction.
    """

    __slots__ = ("rank", "terms", "_hash")

    def __init__(self, terms: Mapping[Monomial, Scalar] | None = None, rank: int = 1):
        if rank < 1:
            raise ValueError("rank must be positive")
        self.rank = rank
        clean: Dict[Monomial, Fraction] = {}
        if terms:
            for m, c in terms.items():
                c = _as_fraction(c)
                if c:
                    for i, n, e in m:
                        if not (1 <= i <= rank) or n < 0 or e < 1:
                            raise ValueError(f"bad jet factor {(i, n, e)} for rank {rank}")
                    clean[m] = c
        self.terms = clean
        self._hash = None

    @classmethod
    def _raw(cls, terms: Dict[Monomial, Fraction], rank: int) -> "DiffPoly":
        obj = cls.__new__(cls)
        obj.rank = rank
        obj.terms = terms
        obj._hash = None
        return obj

    @classmethod
    def var(cls, i: int = 1, n: int = 0, rank: int = 1) -> "DiffPoly":
        if not (1 <= i <= rank) or n < 0:
            raise ValueError(f"jet variable u_{i}^({n}) out of range for rank {rank}")
        return cls._raw({((i, n, 1),): Fraction(1)}, rank)

    @classmethod
    def const(cls, c: Scalar, rank: int = 1) -> "DiffPoly":
        c = _as_fraction(c)
        return cls._raw({ONE: c} if c else {}, rank)

    @classmethod
    def zero(cls, rank: int = 1) -> "DiffPoly":
        return cls._raw({}, rank)

    # -- coercion ----------------------------------------------------------

    def _coerce(self, other) -> "DiffPoly":
        if isinstance(other, DiffPoly):
            if other.rank != self.rank:
                raise RankMismatch(f"rank {self.rank} vs {other.rank}")
            return other
        return DiffPoly.const(_as_fraction(other), self.rank)

    # -- ring operations ---------------------------------------------------

    def __add__(self, other) -> "DiffPoly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        if len(other.terms) > len(self.terms):
            big, small = other.terms, self.terms
        else:
            big, small = self.terms, other.terms
        out = dict(big)
        for m, c in small.items():
            s = out.get(m, 0) + c
            if s:
                out[m] = s
            else:
                out.pop(m, None)
        return DiffPoly._raw(out, self.rank)

    __radd__ = __add__

    def __neg__(self) -> "DiffPoly":
        return DiffPoly._raw({m: -c for m, c in self.terms.items()}, self.rank)

    def __sub__(self, other) -> "DiffPoly":
        try:
            other = self._coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "DiffPoly":
        return (-self) + other

    def __mul__(self, other) -> "DiffPoly":
        if not isinstance(other, DiffPoly):
            try:
                c = _as_fraction(other)
            except TypeError:
                return NotImplemented
            return self.scale(c)
        other = self._coerce(other)
        out: Dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                m = mono_mul(m1, m2)
                s = out.get(m, 0) + c1 * c2
                if s:
                    out[m] = s
                else:
                    del out[m]
        return DiffPoly._raw(out, self.rank)

    __rmul__ = __mul__

    def scale(self, c: Scalar) -> "DiffPoly":
        c = _as_fraction(c)
        if not c:
            return DiffPoly.zero(self.rank)
        return DiffPoly._raw({m: v * c for m, v in self.terms.items()}, self.rank)

    def __truediv__(self, c) -> "DiffPoly":
        return self.scale(1 / _as_fraction(c))

    def __pow__(self, k: int) -> "DiffPoly":
        if k < 0:
            raise ValueError("negative power")
        result = DiffPoly.const(1, self.rank)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- comparison --------------------------------------------------------

    def __eq__(self, other) -> bool:
        if isinstance(other, DiffPoly):
            return self.rank == other.rank and self.terms == other.terms
        try:
            c = _as_fraction(other)
        except TypeError:
            return NotImplemented
        return self.terms == ({ONE: c} if c else {})

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.rank, frozenset(self.terms.items())))
        return self._hash

    def __bool__(self) -> bool:
        return bool(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def __iter__(self) -> Iterator[Tuple[Monomial, Fraction]]:
        return iter(sorted(self.terms.items(), key=lambda t: _mono_sort_key(t[0])))

    def __len__(self) -> int:
        return len(self.terms)

    # -- structure ---------------------------------------------------------

    def constant_term(self) -> Fraction:
        return self.terms.get(ONE, Fraction(0))

    def coefficient(self, monomial: Monomial) -> Fraction:
        return self.terms.get(monomial, Fraction(0))

    def weights(self) -> set:
        return {mono_weight(m) for m in self.terms}

    def is_homogeneous(self, weight: int | None = None) -> bool:
        ws = self.weights()
        if not ws:
            return True
        if weight is None:
            return len(ws) == 1
        return ws == {weight}

    def homogeneous_part(self, weight: int) -> "DiffPoly":
        return DiffPoly._raw(
            {m: c for m, c in self.terms.items() if mono_weight(m) == weight}, self.rank
        )

    def jets(self) -> set:
        return {(i, n) for m in self.terms for i, n, _ in m}

    def order(self) -> int:
        """Highest derivative order present, -1 for constants."""
        return max((n for _, n in self.jets()), default=-1)

    # -- differential structure --------------------------------------------

    def diff(self) -> "DiffPoly":
        """Total derivative d/dz."""
        out: Dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            for dm, k in mono_diff(m):
                s = out.get(dm, 0) + c * k
                if s:
                    out[dm] = s
                else:
                    del out[dm]
        return DiffPoly._raw(out, self.rank)

    def diff_n(self, k: int) -> "DiffPoly":
        p = self
        for _ in range(k):
            p = p.diff()
        return p

    def partial(self, i: int, n: int = 0) -> "DiffPoly":
        """Formal partial derivative with respect to u_i^(n)."""
        out: Dict[Monomial, Fraction] = {}
        for m, c in self.terms.items():
            for pos, (a, b, e) in enumerate(m):
                if (a, b) == (i, n):
                    if e == 1:
                        dm = m[:pos] + m[pos + 1:]
                    else:
                        dm = m[:pos] + ((a, b, e - 1),) + m[pos + 1:]
                    out[dm] = out.get(dm, 0) + c * e
                    break
        return DiffPoly._raw({m: c for m, c in out.items() if c}, self.rank)

    def substitute(self, image: Callable[[int, int], "DiffPoly"], rank: int | None = None) -> "DiffPoly":
        """Replace every u_i^(n) by ``image(i, n)``; result lives in rank ``rank``."""
        rank = self.rank if rank is None else rank
        cache: Dict[Tuple[int, int, int], DiffPoly] = {}

        def power(i, n, e):
            key = (i, n, e)
            if key not in cache:
                cache[key] = image(i, n) if e == 1 else power(i, n, e - 1) * image(i, n)
            return cache[key]

        out = DiffPoly.zero(rank)
        for m, c in self.terms.items():
            t = DiffPoly.const(c, rank)
            for i, n, e in m:
                t = t * power(i, n, e)
            out = out + t
        return out

    # -- output ------------------------------------------------------------

    def __repr__(self) -> str:
        return self.to_str()

    def to_str(self, names: Iterable[str] | None = None) -> str:
        if not self.terms:
            return "0"
        names = list(names) if names is not None else _default_names(self.rank)
        parts = []
        for m, c in self:
            body = "*".join(_factor_str(i, n, e, names) for i, n, e in m)
            if not body:
                parts.append(str(c))
            elif c == 1:
                parts.append(body)
            elif c == -1:
                parts.append("-" + body)
            else:
                parts.append(f"{_paren(c)}*{body}")
        return " + ".join(parts).replace("+ -", "- ")

    def to_latex(self, names: Iterable[str] | None = None) -> str:
        if not self.terms:
            return "0"
        names = list(names) if names is not None else None
        out = []
        for k, (m, c) in enumerate(self):
            body = " ".join(_factor_latex(i, n, e, names, self.rank) for i, n, e in m)
            mag = abs(c)
            if body and mag == 1:
                coef = ""
            elif mag.denominator == 1:
                coef = str(mag.numerator)
            else:
                coef = rf"\frac{{{mag.numerator}}}{{{mag.denominator}}}"
            term = (coef + " " + body).strip() if body else coef
            if k == 0:
                out.append(("-" if c < 0 else "") + term)
            else:
                out.append(("- " if c < 0 else "+ ") + term)
        return " ".join(out)

    def to_json(self) -> list:
        return [
            {"coeff": f"{c.numerator}/{c.denominator}", "monomial": [list(f) for f in m]}
            for m, c in self
        ]

    @classmethod
    def from_json(cls, data: list, rank: int = 1) -> "DiffPoly":
        terms: Dict[Monomial, Fraction] = {}
        for item in data:
            m = tuple(sorted(tuple(int(x) for x in f) for f in item["monomial"]))
            terms[m] = terms.get(m, 0) + Fraction(item["coeff"])
        return cls(terms, rank)

    def dumps(self) -> str:
        return json.dumps(self.to_json(), separators=(",", ":"))


def _mono_sort_key(m: Monomial):
    # graded: weight, then polynomial degree, then lex on the (i, n, e) triples
    return (mono_weight(m), mono_degree(m), m)


def _paren(c: Fraction) -> str:
    return f"({c})" if c.denominator != 1 else str(c)


def _default_names(rank: int) -> list:
    return ["u"] if rank == 1 else [f"u{i}" for i in range(1, rank + 1)]


def _name(i, names):
    return names[i - 1]


def _factor_str(i, n, e, names) -> str:
    s = _name(i, names) + ("'" * n if n <= 3 else f"^({n})")
    return s if e == 1 else f"{s}^{e}"


def _factor_latex(i, n, e, names, rank) -> str:
    base = names[i - 1] if names is not None else ("u" if rank == 1 else f"u_{{{i}}}")
    if n == 0:
        s = base
    elif n <= 3:
        s = base + "'" * n
    else:
        s = f"{base}^{{({n})}}"
    if e == 1:
        return s
    if n:
        return f"({s})^{{{e}}}"
    return f"{s}^{{{e}}}"


# ---------------------------------------------------------------------------
# Euler operator and exact integration


def total_derivative(p: DiffPoly) -> DiffPoly:
    return p.diff()


def partial(p: DiffPoly, v: JetVar) -> DiffPoly:
    return p.partial(*v)


def variational_derivative(p: DiffPoly, i: int = 1) -> DiffPoly:
    """Euler operator: sum_n (-d/dz)^n (dp/du_i^(n))."""
    top = max((n for j, n in p.jets() if j == i), default=-1)
    out = DiffPoly.zero(p.rank)
    for n in range(top + 1):
        term = p.partial(i, n).diff_n(n)
        out = out - term if n % 2 else out + term
    return out


def _jet_key(v: JetVar):
    # order first, then index: the by-parts reduction strips the top of this order
    i, n = v
    return (n, i)


def _integrate_in(p: DiffPoly, i: int, n: int) -> DiffPoly:
    """Formal antiderivative of p with respect to the single variable u_i^(n)."""
    out: Dict[Monomial, Fraction] = {}
    for m, c in p.terms.items():
        exps = {(a, b): e for a, b, e in m}
        e = exps.get((i, n), 0) + 1
        exps[(i, n)] = e
        key = tuple(sorted((a, b, x) for (a, b), x in exps.items()))
        out[key] = out.get(key, 0) + c / e
    return DiffPoly._raw(out, p.rank)


def antiderivative(p: DiffPoly) -> DiffPoly:
    """Return g with g' = p and no constant term.

    Works by repeatedly removing the highest jet variable through formal
    integration by parts.  Raises :class:`NotExact` when p is not a total
    derivative of a differential polynomial.
    """
    if p.constant_term():
        raise NotExact("nonzero constant term has no polynomial antiderivative")
    rest = p
    g = DiffPoly.zero(p.rank)
    while rest:
        i, top = max(rest.jets(), key=_jet_key)
        if top == 0:
            break
        coeff = rest.partial(i, top)
        # for an exact polynomial the coefficient of the top jet is dg/du_i^(top-1),
        # so it has order < top and no order top-1 jet with a larger index
        if any(n >= top or (n == top - 1 and j > i) for j, n in coeff.jets()):
            break
        step = _integrate_in(coeff, i, top - 1)
        g = g + step
        rest = rest - step.diff()
    if rest:
        delta = [variational_derivative(rest, j) for j in range(1, p.rank + 1)]
        raise NotExact(
            "not a total derivative; Euler images: " + ", ".join(map(repr, delta))
        )
    return g


def is_exact(p: DiffPoly) -> bool:
    try:
        antiderivative(p)
    except NotExact:
        return False
    return True


def jet_monomials(rank: int, weight: int) -> list:
    """All monomials of the given principal weight, in canonical order."""
    variables = [(i, n) for n in range(weight) for i in range(1, rank + 1)]
    result: list = []

    def rec(start: int, remaining: int, acc: list):
        if remaining == 0:
            result.append(tuple(sorted(acc)))
            return
        for k in range(start, len(variables)):
            i, n = variables[k]
            w = n + 1
            if w > remaining:
                continue
            e_max = remaining // w
            for e in range(1, e_max + 1):
                rec(k + 1, remaining - e * w, acc + [(i, n, e)])

    rec(0, weight, [])
    return sorted(set(result), key=_mono_sort_key)
