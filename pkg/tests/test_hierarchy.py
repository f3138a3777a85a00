import pytest
from hypothesis import given, settings, strategies as st

from mkdvgen import hierarchy
from mkdvgen.conserved import hamiltonian_density
from mkdvgen.diffpoly import DiffPoly, variational_derivative
from mkdvgen.hierarchy import (
    commutator_check,
    compute_dressing,
    compute_V,
    dressing_residual,
    equivalence_check,
    flow,
    prolong,
    zc_operator_residual,
    zero_curvature_residual,
)
from mkdvgen.loopalg import (
    AlgebraCtx,
    LoopElement,
    abelian_coeff,
    bracket,
    generator_p,
    invert_ad_pminus1,
    jet_cartan,
    minus_part,
    pairing,
)

from conftest import diffpolys

A1, A2, A3 = AlgebraCtx(1), AlgebraCtx(2), AlgebraCtx(3)
u = DiffPoly.var(1)


def at_zero(x: LoopElement) -> LoopElement:
    return x.map_entries(lambda p: DiffPoly.const(p.constant_term(), p.rank))


CASES = [(A1, 1), (A1, 3), (A1, 5), (A2, 1), (A2, 2), (A2, 4), (A3, 1), (A3, 2), (A3, 3)]


class TestComputeV:
    @pytest.mark.parametrize("ctx", [A1, A2, A3])
    def test_first_minus_part(self, ctx):
        V = compute_V(ctx, 1, 4)
        assert minus_part(V) == generator_p(ctx, -1) + jet_cartan(ctx).matrix

    @pytest.mark.parametrize("ctx,n", CASES)
    def test_homogeneity(self, ctx, n):
        V = compute_V(ctx, n, n + 3)
        assert V.low_degree() == -n
        for j, comp in V.components().items():
            for p in comp.entries.values():
                assert p.is_homogeneous(n + j), (j, p)

    @pytest.mark.parametrize("ctx,n", CASES)
    def test_commutes_with_lax_operator(self, ctx, n):
        V = compute_V(ctx, n, n + 3)
        assert zc_operator_residual(V).is_zero()

    @pytest.mark.parametrize("ctx,n", CASES)
    def test_recursion_gauge(self, ctx, n):
        # abelian coefficients in positive degree are zero (integration constants 0)
        V = compute_V(ctx, n, n + 3)
        for j in V.degrees():
            if j > -n and ctx.has_abelian_part(j):
                assert abelian_coeff(V, j).constant_term() == 0

    def test_trivial_background(self):
        V = compute_V(A1, 3, 6)
        assert at_zero(V) == generator_p(A1, -3)

    def test_stable_under_larger_bound(self):
        small, big = compute_V(A2, 2, 5), compute_V(A2, 2, 8)
        assert small.equal_mod(big, 5)

    def test_first_density_from_recursion(self):
        V = compute_V(A1, 1, 4)
        h = pairing(generator_p(A1, -1), V.component(1))
        assert h == hamiltonian_density(A1, 1).value
        assert h == u**2 * h.coefficient(((1, 0, 2),)) and h != 0


class TestFlow:
    @pytest.mark.parametrize("ctx", [A1, A2, A3])
    def test_first_flow_is_translation(self, ctx):
        f = flow(ctx, 1)
        assert list(f.rhs) == [DiffPoly.var(i, 1, ctx.rank) for i in range(1, ctx.rank + 1)]

    def test_mkdv(self):
        (rhs,) = flow(A1, 3).rhs
        a = rhs.coefficient(((1, 3, 1),))
        b = rhs.coefficient(((1, 0, 2), (1, 1, 1)))
        assert len(rhs) == 2
        assert b / a == -1.5

    @pytest.mark.parametrize("ctx,n", CASES)
    def test_weights(self, ctx, n):
        for p in flow(ctx, n).rhs:
            assert p.is_homogeneous(n + 1)

    def test_degree_bound_enforced(self):
        with pytest.raises(ValueError):
            flow(A1, 3, 4)

    def test_excluded_exponent(self):
        with pytest.raises(ValueError):
            flow(A1, 2)
        with pytest.raises(ValueError):
            flow(A2, 3)

    def test_independent_of_bound(self):
        assert flow(A1, 5, 7).rhs == flow(A1, 5, 11).rhs

    def test_serialization(self):
        f = flow(A1, 3)
        data = f.to_json()
        assert data["n"] == 3 and data["rank"] == 1
        assert DiffPoly.from_json(data["rhs"][0], 1) == f.rhs[0]
        assert "\\partial_{3} u" in f.to_latex()


class TestProlong:
    @given(diffpolys())
    def test_first_flow_is_total_derivative(self, p):
        assert prolong(flow(A1, 1), p) == p.diff()

    def test_constant(self):
        assert prolong(flow(A1, 3), DiffPoly.const(7)) == 0

    def test_on_u(self):
        f = flow(A1, 3)
        assert prolong(f, u) == f.rhs[0]

    @settings(max_examples=25)
    @given(diffpolys(max_terms=3), st.sampled_from([3, 5]))
    def test_evolutionary(self, p, n):
        f = flow(A1, n)
        assert prolong(f, p.diff()) == prolong(f, p).diff()

    @settings(max_examples=15)
    @given(diffpolys(rank=2, max_terms=3, max_order=2))
    def test_evolutionary_rank2(self, p):
        f = flow(A2, 2)
        assert prolong(f, p.diff()) == prolong(f, p).diff()


class TestCommutativity:
    def test_diagonal(self):
        assert commutator_check(A1, 3, 3) == 0

    @pytest.mark.parametrize("m,n", [(1, 3), (1, 5), (3, 5)])
    def test_rank1(self, m, n):
        assert commutator_check(A1, m, n) == 0

    @pytest.mark.parametrize("m,n", [(1, 2), (2, 4), (1, 4)])
    def test_rank2_all_probes(self, m, n):
        for i in (1, 2):
            assert commutator_check(A2, m, n, probe=DiffPoly.var(i, 0, 2)) == 0

    def test_perturbation_detected(self):
        fl = {3: flow(A1, 3).perturbed([u]), 5: flow(A1, 5)}
        assert commutator_check(A1, 3, 5, flows=fl) != 0


class TestZeroCurvature:
    @pytest.mark.parametrize("m,n", [(1, 1), (1, 3), (1, 5), (3, 5)])
    def test_rank1(self, m, n):
        assert zero_curvature_residual(A1, m, n, max(m, n) + 3).is_zero()

    def test_rank2(self):
        assert zero_curvature_residual(A2, 1, 2, 5).is_zero()
        assert zero_curvature_residual(A2, 2, 4, 7).is_zero()


class TestDressing:
    def test_residual(self):
        for ctx, D in [(A1, 6), (A2, 5)]:
            assert dressing_residual(compute_dressing(ctx, D)).is_zero()

    def test_first_step(self):
        data = compute_dressing(A1, 3)
        y1 = data.y[1]
        expected = invert_ad_pminus1(-jet_cartan(A1).matrix)
        assert y1 == expected
        assert bracket(generator_p(A1, -1), y1) == -jet_cartan(A1).matrix
        for p in y1.entries.values():
            assert p.is_homogeneous(1)

    def test_trivial_background(self):
        data = compute_dressing(A2, 5)
        for y in data.y.values():
            assert at_zero(y).is_zero()
        assert all(h.constant_term() == 0 for h in data.h.values())

    def test_h1_matches_first_density(self):
        data = compute_dressing(A1, 4)
        h1 = data.h[1]
        H1 = hamiltonian_density(A1, 1).value
        r1, r2 = variational_derivative(h1), variational_derivative(H1)
        c = r1.coefficient(((1, 0, 1),)) / r2.coefficient(((1, 0, 1),))
        assert c != 0 and r1 == r2 * c

    def test_bound(self):
        with pytest.raises(ValueError):
            compute_dressing(A1, 1)


class TestEquivalence:
    @pytest.mark.parametrize("ctx,n", [(A1, 1), (A1, 3), (A1, 5), (A2, 1), (A2, 2), (A2, 4)])
    def test_zero(self, ctx, n):
        assert equivalence_check(ctx, n, n + 3).is_zero()

    def test_bound(self):
        with pytest.raises(ValueError):
            equivalence_check(A1, 3, 4)


def test_cache_clear_recomputes_identically():
    before = compute_V(A1, 3, 6)
    hierarchy.clear_cache()
    assert compute_V(A1, 3, 6) == before


@pytest.mark.parametrize("ctx,n", CASES)
def test_minus_part_stable_at_larger_bound(ctx, n):
    lo, hi = flow(ctx, n, n + 2), flow(ctx, n, n + 4)
    assert lo.rhs == hi.rhs
    assert lo.Vminus == hi.Vminus
