"""mKdV flows from the recursion [d/dz + p_{-1} + u, V] = 0.

``compute_V(ctx, n, D)`` builds ``V = K p_{-n} K^{-1}`` degree by degree,
starting from ``V_{-n} = p_{-n}``.  The degree-j part of the commutator reads

    dV_j/dz + [u, V_j] + [p_{-1}, V_{j+1}] = 0,

so the part of ``V_{j+1}`` outside the abelian subalgebra comes from inverting
``ad p_{-1}``, while the abelian coefficient ``c_j`` of ``V_j`` is fixed by the
requirement that the left side lies in the image of ``ad p_{-1}``:
``dc_j/dz = -a_coeff([u, V_j])``.  That last step is an exact antiderivative
in the jet ring; the integration constant is always zero.

The dressing side (``compute_dressing``) needs no integration at all: the
conjugated operator is solved for degree by degree with linear algebra.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from typing import Dict, List, Sequence, Tuple

from .diffpoly import DiffPoly, NotExact, antiderivative
from .loopalg import (
    AlgebraCtx,
    LoopElement,
    abelian_coeff,
    bracket,
    cartan_coords,
    generator_p,
    invert_ad_pminus1,
    jet_cartan,
    kac_project,
    minus_part,
)

log = logging.getLogger(__name__)


class NonCartanResidual(ArithmeticError):
    """The zero-curvature right-hand side left the Cartan subalgebra."""


class RecursionInconsistent(ArithmeticError):
    pass


def _check_exponent(ctx: AlgebraCtx, n: int):
    if not ctx.is_exponent(n):
        raise ValueError(f"{n} is not an exponent of {ctx.name} (h = {ctx.h})")


# ---------------------------------------------------------------------------
# memo table: concurrent readers, one writer at a time


class _Memo:
    def __init__(self):
        self._data: Dict[Tuple[int, int], LoopElement] = {}
        self._lock = threading.Lock()

    def get(self, ctx: AlgebraCtx, n: int, d: int) -> LoopElement | None:
        v = self._data.get((ctx.rank, n))
        if v is not None and v.trunc >= d:
            return v if v.trunc == d else v.truncate(d)
        return None

    def put(self, ctx: AlgebraCtx, n: int, value: LoopElement):
        with self._lock:
            old = self._data.get((ctx.rank, n))
            if old is None or old.trunc < value.trunc:
                self._data[(ctx.rank, n)] = value

    def clear(self):
        with self._lock:
            self._data.clear()


_V_CACHE = _Memo()


def clear_cache():
    _V_CACHE.clear()


def compute_V(ctx: AlgebraCtx, n: int, D: int) -> LoopElement:
    """K p_{-n} K^{-1} through principal degree D (trunc = D)."""
    _check_exponent(ctx, n)
    if D < 1:
        raise ValueError("degree bound D must be at least 1")
    hit = _V_CACHE.get(ctx, n, D)
    if hit is not None:
        return hit

    u = jet_cartan(ctx).matrix
    comps: Dict[int, LoopElement] = {-n: generator_p(ctx, -n)}
    for j in range(-n, D):
        vj = comps.get(j, LoopElement.zero(ctx))
        if j > -n and ctx.has_abelian_part(j):
            w = abelian_coeff(bracket(u, vj), j)
            try:
                c = -antiderivative(w)
            except NotExact as exc:
                raise RecursionInconsistent(
                    f"abelian coefficient at degree {j} of V^({n}) is not integrable"
                ) from exc
            vj = vj + generator_p(ctx, j) * c
            comps[j] = vj
        rhs = -(vj.diff() + bracket(u, vj))
        comps[j + 1] = invert_ad_pminus1(rhs.component(j) if rhs else rhs)
    top = comps[D]
    if ctx.has_abelian_part(D):
        # c_D from the degree-D equation, which only involves V_D itself
        w = abelian_coeff(bracket(u, top), D)
        comps[D] = top + generator_p(ctx, D) * (-antiderivative(w))

    total = LoopElement.zero(ctx)
    for comp in comps.values():
        total = total + comp
    total = total.truncate(D)
    _V_CACHE.put(ctx, n, total)
    return total


def zc_operator_residual(V: LoopElement) -> LoopElement:
    """[d/dz + p_{-1} + u, V], truncated to the degrees it is known in."""
    ctx = V.ctx
    L = generator_p(ctx, -1) + jet_cartan(ctx).matrix
    return V.diff() + bracket(L, V)


# ---------------------------------------------------------------------------
# flows


@dataclass(frozen=True)
class FlowSpec:
    """n-th flow: rhs[i] = d u_{i+1} / d t_n, plus the matrices it came from."""

    ctx: AlgebraCtx
    n: int
    rhs: Tuple[DiffPoly, ...]
    V: LoopElement | None = None
    Vminus: LoopElement | None = None

    def to_json(self) -> dict:
        return {
            "algebra": self.ctx.name,
            "rank": self.ctx.rank,
            "n": self.n,
            "rhs": [p.to_json() for p in self.rhs],
        }

    def to_latex(self) -> str:
        r = self.ctx.rank
        lines = []
        for i, p in enumerate(self.rhs, start=1):
            var = "u" if r == 1 else f"u_{{{i}}}"
            lines.append(rf"\partial_{{{self.n}}} {var} &= {p.to_latex()}")
        return "\\begin{align*}\n" + " \\\\\n".join(lines) + "\n\\end{align*}\n"

    def perturbed(self, extra: Sequence[DiffPoly]) -> "FlowSpec":
        """Copy with ``extra`` added to the right-hand side (negative controls)."""
        rhs = tuple(a + b for a, b in zip(self.rhs, extra))
        return FlowSpec(self.ctx, self.n, rhs, self.V, self.Vminus)


def min_degree(n: int) -> int:
    return n + 2


def flow(ctx: AlgebraCtx, n: int, D: int | None = None) -> FlowSpec:
    """d_n u = d/dz (V)_- + [p_{-1} + u, (V)_-], projected onto simple-root coordinates."""
    _check_exponent(ctx, n)
    D = min_degree(n) if D is None else D
    if D < min_degree(n):
        raise ValueError(f"flow {n} needs degree bound D >= {min_degree(n)}, got {D}")
    V = compute_V(ctx, n, D)
    Vm = minus_part(V)
    L = generator_p(ctx, -1) + jet_cartan(ctx).matrix
    out = Vm.diff() + bracket(L, Vm)
    stray = [k for k in out.entries if not (k[0] == k[1] and k[2] == 0)]
    if stray:
        raise NonCartanResidual(f"flow {n}: components outside h at {sorted(stray)}")
    rhs = tuple(cartan_coords(out))
    for p in rhs:
        if p and not p.is_homogeneous(n + 1):
            raise RecursionInconsistent(f"flow {n} is not homogeneous of weight {n + 1}")
    return FlowSpec(ctx, n, rhs, V, Vm)


def prolong(f: FlowSpec, p: DiffPoly) -> DiffPoly:
    """Evolutionary derivation: sum_{i,k} d^k(rhs_i)/dz^k * dp/du_i^(k)."""
    out = DiffPoly.zero(p.rank)
    derivs: Dict[Tuple[int, int], DiffPoly] = {}
    for i, k in sorted(p.jets()):
        if (i, 0) not in derivs:
            derivs[(i, 0)] = f.rhs[i - 1]
        for m in range(1, k + 1):
            if (i, m) not in derivs:
                derivs[(i, m)] = derivs[(i, m - 1)].diff()
        out = out + derivs[(i, k)] * p.partial(i, k)
    return out


def prolong_matrix(f: FlowSpec, x: LoopElement) -> LoopElement:
    return x.map_entries(lambda e: prolong(f, e))


def commutator_check(ctx: AlgebraCtx, m: int, n: int, D: int | None = None,
                     probe: DiffPoly | None = None,
                     flows: Dict[int, FlowSpec] | None = None) -> DiffPoly:
    """d_m d_n probe - d_n d_m probe; identically zero for commuting flows."""
    flows = flows or {}
    fm = flows.get(m) or flow(ctx, m, D if D is not None and D >= min_degree(m) else None)
    fn = flows.get(n) or flow(ctx, n, D if D is not None and D >= min_degree(n) else None)
    probe = DiffPoly.var(1, 0, ctx.rank) if probe is None else probe
    return prolong(fm, prolong(fn, probe)) - prolong(fn, prolong(fm, probe))


def zero_curvature_residual(ctx: AlgebraCtx, m: int, n: int, D: int) -> LoopElement:
    """d_m (V_n)_- - d_n (V_m)_- + [(V_m)_-, (V_n)_-], mod degree > D - max(m, n) - 1."""
    window = D - max(m, n) - 1
    Dm, Dn = max(D, min_degree(m)), max(D, min_degree(n))
    fm, fn = flow(ctx, m, Dm), flow(ctx, n, Dn)
    A, B = fm.Vminus, fn.Vminus
    res = prolong_matrix(fm, B) - prolong_matrix(fn, A) + bracket(A, B)
    return res.truncate(window)


# ---------------------------------------------------------------------------
# dressing operator


@dataclass(frozen=True)
class DressingData:
    """log M = sum_j y_j (j = 1..D) and the coefficients h_j of the dressed operator."""

    ctx: AlgebraCtx
    D: int
    y: Dict[int, LoopElement]
    h: Dict[int, DiffPoly] = field(default_factory=dict)

    def log_m(self) -> LoopElement:
        total = LoopElement.zero(self.ctx)
        for comp in self.y.values():
            total = total + comp
        return total.truncate(self.D)

    def conjugate(self, v: LoopElement, window: int) -> LoopElement:
        """M v M^{-1} = exp(ad y) v through degree ``window``."""
        return adjoint_exp(self.log_m(), v, window)


def adjoint_exp(y: LoopElement, v: LoopElement, window: int, sign: int = 1) -> LoopElement:
    """exp(sign * ad y) v modulo degree > window, for y of positive degrees."""
    total = v.truncate(window)
    term = total
    k = 0
    while True:
        k += 1
        term = bracket(y, term).truncate(window)
        if not term:
            return total
        total = total + term * (Fraction(sign ** k, factorial(k)))


def dressed_operator(y: LoopElement, window: int) -> LoopElement:
    """Potential of M^{-1}(d/dz + p_{-1} + u)M with M = exp(y), through ``window``."""
    ctx = y.ctx
    L = generator_p(ctx, -1) + jet_cartan(ctx).matrix
    out = adjoint_exp(y, L, window, sign=-1)
    # M^{-1} dM/dz = sum_k (-ad y)^k / (k+1)! (dy/dz)
    dy = y.diff().truncate(window)
    term = dy
    k = 0
    out = out + dy
    while True:
        k += 1
        term = bracket(y, term).truncate(window)
        if not term:
            break
        out = out + term * Fraction((-1) ** k, factorial(k + 1))
    return out


def compute_dressing(ctx: AlgebraCtx, D: int) -> DressingData:
    """Solve M^{-1}(d + p_{-1} + u)M = d + p_{-1} + sum h_j p_j mod degree > D - 1.

    Gauge: every y_j has zero abelian coefficient.
    """
    if D < 2:
        raise ValueError("dressing needs D >= 2")
    y: Dict[int, LoopElement] = {}
    h: Dict[int, DiffPoly] = {}
    for j in range(0, D):
        current = LoopElement.zero(ctx)
        for comp in y.values():
            current = current + comp
        F = dressed_operator(current, j).component(j)
        a, im = kac_project(F, j)
        if j > 0 and ctx.has_abelian_part(j):
            h[j] = a
        elif a:
            raise RecursionInconsistent(f"unexpected abelian part at degree {j}")
        yj = invert_ad_pminus1(-im) if im else LoopElement.zero(ctx)
        if kac_project(yj, j + 1)[0]:
            raise RecursionInconsistent("gauge condition violated")
        y[j + 1] = yj
    return DressingData(ctx, D, y, h)


def dressing_residual(data: DressingData) -> LoopElement:
    """Dressed potential minus (p_{-1} + sum h_j p_j), modulo degree > D - 1."""
    ctx = data.ctx
    window = data.D - 1
    target = generator_p(ctx, -1)
    for j, hj in data.h.items():
        target = target + generator_p(ctx, j) * hj
    return (dressed_operator(data.log_m(), window) - target).truncate(window)


def equivalence_check(ctx: AlgebraCtx, n: int, D: int) -> LoopElement:
    """M p_{-n} M^{-1} - K p_{-n} K^{-1}, modulo degree > D - n - 1."""
    _check_exponent(ctx, n)
    if D < n + 2:
        raise ValueError(f"equivalence check for n={n} needs D >= {n + 2}")
    window = D - n - 1
    data = compute_dressing(ctx, D)
    left = data.conjugate(generator_p(ctx, -n), window)
    return (left - compute_V(ctx, n, D)).truncate(window)
