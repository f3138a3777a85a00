from fractions import Fraction as F

import pytest
from hypothesis import given, strategies as st

from mkdvgen import linalg
from mkdvgen.diffpoly import DiffPoly
from mkdvgen.loopalg import (
    AlgebraCtx,
    ContextMismatch,
    LoopElement,
    Unsolvable,
    abelian_coeff,
    bracket,
    cartan_coords,
    cartan_embed,
    chevalley_e,
    generator_p,
    invert_ad_pminus1,
    kac_project,
    pairing,
    split,
)

A1, A2 = AlgebraCtx(1), AlgebraCtx(2)
u = DiffPoly.var(1)


def unit(ctx, a, b, k=0, c=1):
    return LoopElement.unit(ctx, a, b, k, DiffPoly.const(c, ctx.rank))


@st.composite
def homogeneous(draw, ctx, j=None):
    if j is None:
        j = draw(st.integers(-4, 4))
    entries = {}
    for pos in ctx.slice_positions(j):
        c = draw(st.integers(-3, 3))
        if c:
            entries[pos] = DiffPoly.const(c, ctx.rank)
    x = LoopElement(ctx, entries)
    # project out the trace on diagonal slices
    if j % ctx.h == 0 and entries:
        k = j // ctx.h
        tr = sum((x.entries.get((a, a, k), DiffPoly.zero(ctx.rank)) for a in range(ctx.h)),
                 DiffPoly.zero(ctx.rank))
        x = x - LoopElement(ctx, {(a, a, k): tr / ctx.h for a in range(ctx.h)})
    return x


@st.composite
def elements(draw, ctx):
    total = LoopElement.zero(ctx)
    for j in draw(st.lists(st.integers(-4, 4), max_size=3)):
        total = total + draw(homogeneous(ctx, j))
    return total


ctxs = st.sampled_from([A1, A2, AlgebraCtx(3)])


class TestGenerators:
    def test_p1_rank1(self):
        p = generator_p(A1, 1)
        assert p == unit(A1, 0, 1) + unit(A1, 1, 0, 1)

    def test_pm1_rank1(self):
        p = generator_p(A1, -1)
        assert p == unit(A1, 0, 1, -1) + unit(A1, 1, 0, 0)

    def test_excluded_exponent(self):
        with pytest.raises(ValueError):
            generator_p(A1, 2)
        with pytest.raises(ValueError):
            generator_p(A2, 3)

    @given(ctxs, st.integers(-7, 7), st.integers(-7, 7))
    def test_abelian(self, ctx, m, n):
        if m % ctx.h == 0 or n % ctx.h == 0:
            return
        assert bracket(generator_p(ctx, m), generator_p(ctx, n)).is_zero()

    @given(ctxs, st.integers(1, 7))
    def test_pairing_normalization(self, ctx, n):
        if n % ctx.h == 0:
            return
        assert pairing(generator_p(ctx, n), generator_p(ctx, -n)) == ctx.h
        assert pairing(generator_p(ctx, n), generator_p(ctx, n)) == 0

    def test_chevalley_e(self):
        assert chevalley_e(A2, 1) == unit(A2, 0, 1)
        assert chevalley_e(A2, 0) == unit(A2, 2, 0, 1)
        assert all(chevalley_e(A2, i).degrees() == [1] for i in range(3))


class TestSplit:
    def test_example(self):
        x = LoopElement(A1, {(0, 0, 0): u, (1, 1, 0): -u}) + unit(A1, 0, 1, 1)
        plus, minus = split(x)
        assert plus == unit(A1, 0, 1, 1)
        assert minus == LoopElement(A1, {(0, 0, 0): u, (1, 1, 0): -u})

    def test_generators(self):
        assert split(generator_p(A1, -1)) == (LoopElement.zero(A1), generator_p(A1, -1))
        assert split(generator_p(A1, 1)) == (generator_p(A1, 1), LoopElement.zero(A1))

    @given(ctxs.flatmap(lambda c: elements(c)))
    def test_projection_pair(self, x):
        plus, minus = split(x)
        assert plus + minus == x
        assert split(plus) == (plus, LoopElement.zero(x.ctx))
        assert split(minus) == (LoopElement.zero(x.ctx), minus)


class TestBracket:
    def test_examples(self):
        assert bracket(generator_p(A1, 1), generator_p(A1, -1)).is_zero()
        h = unit(A1, 0, 0, 0, 1) + unit(A1, 1, 1, 0, -1)
        assert bracket(h, unit(A1, 0, 1)) == unit(A1, 0, 1, 0, 2)

    @given(ctxs.flatmap(lambda c: elements(c)))
    def test_self_bracket(self, x):
        assert bracket(x, x).is_zero()

    @given(st.data(), ctxs, st.integers(-4, 4), st.integers(-4, 4))
    def test_gradation_additive(self, data, ctx, j, k):
        x = data.draw(homogeneous(ctx, j))
        y = data.draw(homogeneous(ctx, k))
        b = bracket(x, y)
        assert b.degrees() in ([], [j + k])

    @given(st.data(), ctxs)
    def test_invariance(self, data, ctx):
        x, y, w = (data.draw(elements(ctx)) for _ in range(3))
        assert pairing(bracket(x, y), w) == pairing(x, bracket(y, w))

    def test_context_mismatch(self):
        with pytest.raises(ContextMismatch):
            bracket(generator_p(A1, 1), generator_p(A2, 1))


class TestPairing:
    def test_examples(self):
        h = unit(A1, 0, 0, 0, 1) + unit(A1, 1, 1, 0, -1)
        assert pairing(h, h) == 2
        assert pairing(generator_p(A1, 1), generator_p(A1, -1)) == 2

    @pytest.mark.parametrize("ctx", [A1, A2, AlgebraCtx(3)])
    @pytest.mark.parametrize("j", [-3, -1, 0, 1, 2, 4])
    def test_nondegenerate_on_slices(self, ctx, j):
        """Gram matrix between degree j and degree -j slices has full rank."""
        def basis(d):
            out = []
            for elem in _basis(ctx, d):
                out.append(LoopElement(ctx, {k: DiffPoly.const(c, ctx.rank) for k, c in elem.items()}))
            return out
        left, right = basis(j), basis(-j)
        gram = [[pairing(a, b).constant_term() for b in right] for a in left]
        assert len(left) == len(right)
        assert linalg.rank(gram) == len(left)


def _basis(ctx, j):
    from mkdvgen.loopalg import _slice_basis
    return _slice_basis(ctx, j)


class TestKac:
    def test_abelian_element(self):
        a, rest = kac_project(generator_p(A1, 3))
        assert a == 1 and rest.is_zero()

    def test_image_element(self):
        x = bracket(generator_p(A1, -1), unit(A1, 0, 1))
        a, rest = kac_project(x)
        assert a == 0 and rest == x

    @given(st.data(), ctxs, st.integers(-5, 5))
    def test_round_trip(self, data, ctx, j):
        if j % ctx.h == 0:
            return
        y = data.draw(homogeneous(ctx, j + 1))
        c = data.draw(st.integers(-3, 3))
        x = generator_p(ctx, j) * c + bracket(generator_p(ctx, -1), y)
        a, rest = kac_project(x, j)
        assert a == c
        assert generator_p(ctx, j) * a + rest == x
        assert pairing(rest, generator_p(ctx, -j)) == 0
        assert abelian_coeff(x, j) == c


class TestInvertAd:
    def test_zero(self):
        assert invert_ad_pminus1(LoopElement.zero(A1)).is_zero()

    def test_e12(self):
        # E12 = (1/2) p_1 + (1/2)(E12 - lam E21); the inverse returns the a-free part
        y = bracket(generator_p(A1, -1), unit(A1, 0, 1))
        x = invert_ad_pminus1(y)
        assert x == unit(A1, 0, 1) - generator_p(A1, 1) * F(1, 2)
        assert abelian_coeff(x, 1) == 0
        assert bracket(generator_p(A1, -1), x) == y

    def test_unsolvable(self):
        with pytest.raises(Unsolvable):
            invert_ad_pminus1(generator_p(A1, 1))
        with pytest.raises(Unsolvable):
            invert_ad_pminus1(generator_p(A2, 2))

    @given(st.data(), ctxs, st.integers(-5, 5))
    def test_inverse_property(self, data, ctx, j):
        x = data.draw(homogeneous(ctx, j + 1)) * DiffPoly.var(1, 1, ctx.rank)
        if ctx.has_abelian_part(j + 1):
            x = kac_project(x, j + 1)[1]
        y = bracket(generator_p(ctx, -1), x)
        assert invert_ad_pminus1(y, j if not y.is_zero() else None) == x


class TestCartan:
    def test_rank1(self):
        m = cartan_embed(A1, [u]).matrix
        assert m == LoopElement(A1, {(0, 0, 0): u / 2, (1, 1, 0): -u / 2})

    def test_zero(self):
        assert cartan_embed(A2, [0, 0]).matrix.is_zero()

    def test_rank2(self):
        u1, u2 = DiffPoly.var(1, 0, 2), DiffPoly.var(2, 0, 2)
        d = cartan_embed(A2, [u1, u2]).diagonal
        assert d == [(2 * u1 + u2) / 3, (-u1 + u2) / 3, (-u1 - 2 * u2) / 3]
        assert cartan_coords(cartan_embed(A2, [u1, u2]).matrix) == [u1, u2]


class TestSerialization:
    @given(ctxs.flatmap(lambda c: elements(c)))
    def test_json_round_trip(self, x):
        assert LoopElement.from_json(x.ctx, x.to_json()) == x
