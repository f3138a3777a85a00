"""Centerless loop algebra of sl_{r+1} with differential-polynomial entries.

Elements are sparse maps ``(a, b, k) -> DiffPoly`` standing for
``coeff * E_ab * lam**k`` (row/column indices 0-based).  The principal degree of
``E_ab lam**k`` is ``(b - a) + k*h`` with ``h = r + 1``.

The principal abelian subalgebra is realized by powers of the cyclic element

    Lam = sum_a E_{a,a+1} + lam * E_{r,0},

so ``p_n = Lam**n`` for every ``n`` not divisible by ``h``.

Every element carries a truncation degree ``trunc``: components of degree
above it are unknown and never stored (``None`` means exact).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, Iterator, List, Sequence, Tuple

from . import linalg
from .diffpoly import DiffPoly

Key = Tuple[int, int, int]


class Unsolvable(ArithmeticError):
    """ad p_{-1} cannot be inverted on the given element."""


class ContextMismatch(ValueError):
    pass


@dataclass(frozen=True)
class AlgebraCtx:
    """The algebra A_r^(1): rank r, matrices of size r + 1."""

    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be a positive integer")

    @property
    def h(self) -> int:
        return self.rank + 1

    @property
    def size(self) -> int:
        return self.rank + 1

    @property
    def name(self) -> str:
        return f"A_{self.rank}^1"

    def is_exponent(self, n: int) -> bool:
        """True for n in I (positive, not divisible by h)."""
        return n > 0 and n % self.h != 0

    def exponents(self, up_to: int) -> List[int]:
        return [n for n in range(1, up_to + 1) if self.is_exponent(n)]

    def degree(self, key: Key) -> int:
        a, b, k = key
        return (b - a) + k * self.h

    def slice_positions(self, j: int) -> List[Key]:
        """Matrix positions (with lambda power) of principal degree j."""
        h = self.h
        out = []
        for a in range(h):
            for b in range(h):
                if (j - (b - a)) % h == 0:
                    out.append((a, b, (j - (b - a)) // h))
        return out

    def has_abelian_part(self, j: int) -> bool:
        return j % self.h != 0


def _min_trunc(*ts):
    vals = [t for t in ts if t is not None]
    return min(vals) if vals else None


class LoopElement:
    """Element of the (truncated) loop algebra with DiffPoly coefficients."""

    __slots__ = ("ctx", "entries", "trunc")

    def __init__(self, ctx: AlgebraCtx, entries: Dict[Key, DiffPoly] | None = None,
                 trunc: int | None = None):
        self.ctx = ctx
        self.trunc = trunc
        clean = {}
        for key, v in (entries or {}).items():
            if not isinstance(v, DiffPoly):
                v = DiffPoly.const(v, ctx.rank)
            elif v.rank != ctx.rank:
                raise ContextMismatch("entry rank differs from algebra rank")
            if v and (trunc is None or ctx.degree(key) <= trunc):
                clean[key] = v
        self.entries = clean

    @classmethod
    def zero(cls, ctx: AlgebraCtx, trunc: int | None = None) -> "LoopElement":
        return cls(ctx, {}, trunc)

    @classmethod
    def unit(cls, ctx: AlgebraCtx, a: int, b: int, k: int = 0, coeff=1) -> "LoopElement":
        """coeff * E_ab * lam**k, with 0-based a, b."""
        return cls(ctx, {(a, b, k): coeff})

    def _check(self, other: "LoopElement"):
        if not isinstance(other, LoopElement):
            raise TypeError("LoopElement expected")
        if other.ctx != self.ctx:
            raise ContextMismatch(f"{self.ctx} vs {other.ctx}")

    # -- grading -----------------------------------------------------------

    def degrees(self) -> List[int]:
        return sorted({self.ctx.degree(k) for k in self.entries})

    def low_degree(self) -> float:
        return min(self.degrees(), default=math.inf)

    def component(self, j: int) -> "LoopElement":
        out = {k: v for k, v in self.entries.items() if self.ctx.degree(k) == j}
        return LoopElement(self.ctx, out, self.trunc)

    def components(self) -> Dict[int, "LoopElement"]:
        return {j: self.component(j) for j in self.degrees()}

    def truncate(self, d: int | None) -> "LoopElement":
        return LoopElement(self.ctx, self.entries, _min_trunc(self.trunc, d))

    def is_homogeneous(self) -> bool:
        return len(self.degrees()) <= 1

    def is_zero(self) -> bool:
        return not self.entries

    def __bool__(self) -> bool:
        return bool(self.entries)

    def weights(self) -> set:
        return set().union(*(v.weights() for v in self.entries.values())) if self.entries else set()

    # -- linear structure --------------------------------------------------

    def __add__(self, other: "LoopElement") -> "LoopElement":
        self._check(other)
        out = dict(self.entries)
        for k, v in other.entries.items():
            out[k] = out[k] + v if k in out else v
        return LoopElement(self.ctx, out, _min_trunc(self.trunc, other.trunc))

    def __neg__(self) -> "LoopElement":
        return LoopElement(self.ctx, {k: -v for k, v in self.entries.items()}, self.trunc)

    def __sub__(self, other: "LoopElement") -> "LoopElement":
        return self + (-other)

    def __mul__(self, c) -> "LoopElement":
        """Scalar multiple by a number or a DiffPoly."""
        if isinstance(c, LoopElement):
            return NotImplemented
        return LoopElement(self.ctx, {k: v * c for k, v in self.entries.items()}, self.trunc)

    __rmul__ = __mul__

    def __matmul__(self, other: "LoopElement") -> "LoopElement":
        self._check(other)
        ctx = self.ctx
        # unknown degrees of one factor shift by the lowest degree of the other
        trunc = _min_trunc(
            None if self.trunc is None else self.trunc + other.low_degree(),
            None if other.trunc is None else other.trunc + self.low_degree(),
        )
        trunc = None if trunc is None or trunc == math.inf else int(trunc)
        by_row: Dict[int, List[Tuple[int, int, DiffPoly]]] = {}
        for (b, c, l), v in other.entries.items():
            by_row.setdefault(b, []).append((c, l, v))
        out: Dict[Key, DiffPoly] = {}
        for (a, b, k), x in self.entries.items():
            for c, l, y in by_row.get(b, ()):
                key = (a, c, k + l)
                if trunc is not None and ctx.degree(key) > trunc:
                    continue
                t = x * y
                out[key] = out[key] + t if key in out else t
        return LoopElement(ctx, out, trunc)

    def diff(self) -> "LoopElement":
        """Entry-wise total derivative d/dz."""
        return LoopElement(self.ctx, {k: v.diff() for k, v in self.entries.items()}, self.trunc)

    def map_entries(self, f: Callable[[DiffPoly], DiffPoly]) -> "LoopElement":
        return LoopElement(self.ctx, {k: f(v) for k, v in self.entries.items()}, self.trunc)

    def grade(self) -> "LoopElement":
        """x -> sum_j j * x_j (the adjoint action of the principal grading element)."""
        return LoopElement(
            self.ctx, {k: v * self.ctx.degree(k) for k, v in self.entries.items()}, self.trunc
        )

    def trace(self) -> Dict[int, DiffPoly]:
        out: Dict[int, DiffPoly] = {}
        for (a, b, k), v in self.entries.items():
            if a == b:
                out[k] = out[k] + v if k in out else v
        return {k: v for k, v in out.items() if v}

    def __eq__(self, other) -> bool:
        if not isinstance(other, LoopElement):
            return NotImplemented
        return self.ctx == other.ctx and self.entries == other.entries

    def equal_mod(self, other: "LoopElement", d: int) -> bool:
        """Equality of all components of degree <= d."""
        return (self - other).truncate(d).is_zero()

    def __repr__(self) -> str:
        body = ", ".join(
            f"E{a + 1}{b + 1}*lam^{k}:({v})" for (a, b, k), v in sorted(self.entries.items())
        )
        return f"LoopElement[{self.ctx.name}, trunc={self.trunc}]({body})"

    # -- export ------------------------------------------------------------

    def to_json(self) -> dict:
        cells: Dict[Tuple[int, int], list] = {}
        for (a, b, k), v in sorted(self.entries.items()):
            cells.setdefault((a, b), []).append([k, v.to_json()])
        return {
            "trunc": self.trunc,
            "entries": [[a + 1, b + 1, cell] for (a, b), cell in sorted(cells.items())],
        }

    @classmethod
    def from_json(cls, ctx: AlgebraCtx, data: dict) -> "LoopElement":
        entries = {}
        for row, col, cell in data["entries"]:
            for k, poly in cell:
                entries[(row - 1, col - 1, k)] = DiffPoly.from_json(poly, ctx.rank)
        return cls(ctx, entries, data.get("trunc"))

    def to_latex(self) -> str:
        size = self.ctx.size
        rows = []
        for a in range(size):
            cells = []
            for b in range(size):
                terms = sorted((k, v) for (x, y, k), v in self.entries.items() if (x, y) == (a, b))
                if not terms:
                    cells.append("0")
                    continue
                parts = []
                for k, v in terms:
                    lam = "" if k == 0 else (r"\lambda" if k == 1 else rf"\lambda^{{{k}}}")
                    s = v.to_latex()
                    if lam:
                        s = (f"({s})" if len(v) > 1 else ("" if s == "1" else "-" if s == "-1" else s)) + lam
                    parts.append(s)
                cells.append(" + ".join(parts).replace("+ -", "- "))
            rows.append(" & ".join(cells))
        return "\\begin{pmatrix}\n" + " \\\\\n".join(rows) + "\n\\end{pmatrix}"


# ---------------------------------------------------------------------------
# named elements


def generator_p(ctx: AlgebraCtx, n: int) -> LoopElement:
    """p_n = Lam**n, homogeneous of principal degree n."""
    h = ctx.h
    if n % h == 0:
        raise ValueError(f"p_{n} is not a generator: {n} is divisible by h={h}")
    q, s = divmod(n, h)
    entries = {}
    for a in range(h):
        if a + s < h:
            entries[(a, a + s, q)] = DiffPoly.const(1, ctx.rank)
        else:
            entries[(a, a + s - h, q + 1)] = DiffPoly.const(1, ctx.rank)
    return LoopElement(ctx, entries)


def chevalley_e(ctx: AlgebraCtx, i: int) -> LoopElement:
    """e_i: E_{i,i+1} for i >= 1 (1-based), e_0 = lam * E_{r+1,1}."""
    if not 0 <= i <= ctx.rank:
        raise ValueError(f"no generator e_{i} for rank {ctx.rank}")
    if i == 0:
        return LoopElement.unit(ctx, ctx.rank, 0, 1)
    return LoopElement.unit(ctx, i - 1, i, 0)


def chevalley_f(ctx: AlgebraCtx, i: int) -> LoopElement:
    if not 0 <= i <= ctx.rank:
        raise ValueError(f"no generator f_{i} for rank {ctx.rank}")
    if i == 0:
        return LoopElement.unit(ctx, 0, ctx.rank, -1)
    return LoopElement.unit(ctx, i, i - 1, 0)


def bracket(x: LoopElement, y: LoopElement) -> LoopElement:
    return x @ y - y @ x


def split(x: LoopElement) -> Tuple[LoopElement, LoopElement]:
    """x = x_plus + x_minus with x_plus in n_+ (degree > 0), x_minus in b_- (degree <= 0)."""
    ctx = x.ctx
    plus = {k: v for k, v in x.entries.items() if ctx.degree(k) > 0}
    minus = {k: v for k, v in x.entries.items() if ctx.degree(k) <= 0}
    return LoopElement(ctx, plus, x.trunc), LoopElement(ctx, minus, x.trunc)


def plus_part(x: LoopElement) -> LoopElement:
    return split(x)[0]


def minus_part(x: LoopElement) -> LoopElement:
    return split(x)[1]


def pairing(x: LoopElement, y: LoopElement) -> DiffPoly:
    """Invariant form: the lam**0 coefficient of trace(x y)."""
    x._check(y)
    total = DiffPoly.zero(x.ctx.rank)
    for (a, b, k), v in x.entries.items():
        w = y.entries.get((b, a, -k))
        if w is not None:
            total = total + v * w
    return total


def kac_project(x: LoopElement, degree: int | None = None) -> Tuple[DiffPoly, LoopElement]:
    """Split a homogeneous x of degree j as a_coeff * p_j + (part in Im ad p_{-1}).

    The abelian coefficient is found orthogonally,
    ``a_coeff = (x, p_{-j}) / (p_j, p_{-j})``.
    """
    ctx = x.ctx
    degs = x.degrees()
    if len(degs) > 1:
        raise ValueError(f"kac_project needs a homogeneous element, got degrees {degs}")
    j = degs[0] if degs else degree
    if j is None or not ctx.has_abelian_part(j):
        return DiffPoly.zero(ctx.rank), x
    pj, pmj = generator_p(ctx, j), generator_p(ctx, -j)
    a = pairing(x, pmj) / pairing(pj, pmj).constant_term()
    return a, x - pj * a


def abelian_coeff(x: LoopElement, j: int) -> DiffPoly:
    """Coefficient of p_j in the degree-j component of x (zero where a is absent)."""
    ctx = x.ctx
    if not ctx.has_abelian_part(j):
        return DiffPoly.zero(ctx.rank)
    return pairing(x.component(j), generator_p(ctx, -j)) / ctx.h


def _slice_basis(ctx: AlgebraCtx, j: int) -> List[Dict[Key, Fraction]]:
    positions = ctx.slice_positions(j)
    if j % ctx.h:
        return [{pos: Fraction(1)} for pos in positions]
    # traceless diagonal: H_a = E_aa - E_{a+1,a+1}
    k = j // ctx.h
    return [{(a, a, k): Fraction(1), (a + 1, a + 1, k): Fraction(-1)} for a in range(ctx.rank)]


@lru_cache(maxsize=None)
def _ad_inverse_data(ctx: AlgebraCtx, j: int):
    """Left inverse of x -> [p_{-1}, x] from degree j+1 (complement of a) to degree j."""
    basis = _slice_basis(ctx, j + 1)
    targets = ctx.slice_positions(j)
    pm1 = generator_p(ctx, -1)
    columns = []
    for elem in basis:
        x = LoopElement(ctx, {k: DiffPoly.const(c, ctx.rank) for k, c in elem.items()})
        y = bracket(pm1, x)
        col = [y.entries.get(t, DiffPoly.zero(ctx.rank)).constant_term() for t in targets]
        if ctx.has_abelian_part(j + 1):
            col.append(pairing(x, generator_p(ctx, -(j + 1))).constant_term())
        columns.append(col)
    a = linalg.transpose(columns)
    return basis, targets, linalg.left_inverse(a)


def invert_ad_pminus1(y: LoopElement, degree: int | None = None) -> LoopElement:
    """Solve [p_{-1}, x] = y for x homogeneous of degree j+1 with no abelian part."""
    ctx = y.ctx
    degs = y.degrees()
    if len(degs) > 1:
        raise Unsolvable(f"inhomogeneous right-hand side (degrees {degs})")
    if not degs:
        return LoopElement.zero(ctx)
    j = degs[0]
    if degree is not None and degree != j:
        raise ValueError("declared degree does not match element")
    basis, targets, linv = _ad_inverse_data(ctx, j)
    zero = DiffPoly.zero(ctx.rank)
    rhs = [y.entries.get(t, zero) for t in targets]
    if ctx.has_abelian_part(j + 1):
        rhs.append(zero)
    out: Dict[Key, DiffPoly] = {}
    for row, elem in zip(linv, basis):
        c = zero
        for l, r in zip(row, rhs):
            if l and r:
                c = c + r * l
        if c:
            for key, s in elem.items():
                out[key] = out[key] + c * s if key in out else c * s
    x = LoopElement(ctx, out)
    if bracket(generator_p(ctx, -1), x) != LoopElement(ctx, y.entries):
        raise Unsolvable(f"degree-{j} element is not in the image of ad p_-1")
    return x


# ---------------------------------------------------------------------------
# Cartan subalgebra


@dataclass(frozen=True)
class CartanElement:
    """Traceless diagonal matrix d with d_a - d_{a+1} = u_a."""

    coords: Tuple[DiffPoly, ...]
    matrix: LoopElement

    @property
    def diagonal(self) -> List[DiffPoly]:
        zero = DiffPoly.zero(self.matrix.ctx.rank)
        return [self.matrix.entries.get((a, a, 0), zero) for a in range(self.matrix.ctx.size)]


def cartan_embed(ctx: AlgebraCtx, coords: Sequence[DiffPoly]) -> CartanElement:
    r = ctx.rank
    if len(coords) != r:
        raise ValueError(f"expected {r} Cartan coordinates, got {len(coords)}")
    coords = tuple(c if isinstance(c, DiffPoly) else DiffPoly.const(c, r) for c in coords)
    last = DiffPoly.zero(r)
    for b, u in enumerate(coords, start=1):
        last = last - u * b
    last = last / (r + 1)
    diag = [last] * (r + 1)
    acc = last
    for a in range(r - 1, -1, -1):
        acc = acc + coords[a]
        diag[a] = acc
    m = LoopElement(ctx, {(a, a, 0): d for a, d in enumerate(diag)})
    return CartanElement(coords, m)


def cartan_coords(x: LoopElement) -> List[DiffPoly]:
    """Simple-root coordinates d_a - d_{a+1} of the lam-free diagonal part of x."""
    ctx = x.ctx
    zero = DiffPoly.zero(ctx.rank)
    d = [x.entries.get((a, a, 0), zero) for a in range(ctx.size)]
    return [d[a] - d[a + 1] for a in range(ctx.rank)]


def jet_cartan(ctx: AlgebraCtx) -> CartanElement:
    """The Cartan element u with coordinates u_1, ..., u_r (the jet variables)."""
    return cartan_embed(ctx, [DiffPoly.var(i, 0, ctx.rank) for i in range(1, ctx.rank + 1)])
