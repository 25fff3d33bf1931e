from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from carnotcheck.diffop import (DiffOp, OperatorOverflowError, OperatorWord, anticommutator,
                                commutator, compose_all)
from carnotcheck.group import kaplan_quartic_poly, make_group
from carnotcheck.operators import (UnsupportedStructureError, ad_closed, ad_first_anticommutator,
                                   ad_power, ad_second_step2, bracket_field, dual_biorthogonality,
                                   harmonic_library, l_operator, rockland_op, sub_laplacian,
                                   v_fields, v_potential_poly)
from carnotcheck.poly import Poly, parse_expr, random_poly
from carnotcheck.potentials import PotentialSpec
from carnotcheck.sampler import GridIntegrator, GridSpec
from strategies import polys

H1 = make_group("heisenberg", 1)
H1a = make_group("heisenberg", 1, "alt")
H2 = make_group("heisenberg", 2)
E1 = make_group("euclidean", 1)
x, y, z = Poly.gens(3)


def P(text, G=H1):
    return parse_expr(text, G.names)


def ops(dim: int, max_order: int = 2):
    idx = st.lists(st.integers(0, dim - 1), max_size=max_order).map(
        lambda s: tuple(s.count(i) for i in range(dim)))
    return st.dictionaries(idx, polys(dim, 2, 3), max_size=3).map(lambda t: DiffOp(dim, t))


def test_apply_to_harmonic_polys():
    X = H1a.generators[0]
    assert X.apply(P("4*z - 2*x*y")).is_zero()
    assert X.apply(P("4*z + 2*x*y")) == P("4*y")
    f = P("x^3*z - y")
    assert DiffOp.identity(3).apply(f) == f


def test_canonical_commutation():
    dx = DiffOp.partial(1, 0)
    xm = DiffOp.mult(Poly.gens(1)[0])
    assert dx.compose(xm) == xm.compose(dx) + DiffOp.identity(1)
    A = H1.generators[0]
    assert A.compose(DiffOp.identity(3)) == A
    assert commutator(A, A).is_zero()


@given(ops(3), ops(3), polys(3, 4))
def test_apply_compose_consistency(A, B, f):
    assert A.compose(B).apply(f) == A.apply(B.apply(f))


@given(ops(3), ops(3), ops(3))
def test_associativity(A, B, C):
    assert A.compose(B).compose(C) == A.compose(B.compose(C))
    assert OperatorWord([A, B, C]).expand() == compose_all([A, B, C])


@given(ops(3, 1), ops(3, 1), ops(3, 1))
def test_jacobi(A, B, C):
    j = commutator(A, commutator(B, C)) + commutator(B, commutator(C, A)) + commutator(C, commutator(A, B))
    assert j.is_zero()


def test_first_order_commutator_stays_first_order():
    rng = np.random.default_rng(1)
    for _ in range(10):
        A = DiffOp(3, {(1, 0, 0): random_poly(rng, 3, 2), (0, 0, 1): random_poly(rng, 3, 2)})
        B = DiffOp(3, {(0, 1, 0): random_poly(rng, 3, 2)})
        assert commutator(A, B).order <= 1


def test_overflow_cap():
    X = H1.generators[0]
    with pytest.raises(OperatorOverflowError):
        X ** 13


def test_pretty_printer_marks_partials():
    assert "D[z]" in H1.generators[0].to_str(H1.names)


def test_sub_laplacian_and_deformed_fields():
    assert sub_laplacian(H1).apply(P("x^2 - y^2")).is_zero()
    U = parse_expr("x^2/2", E1.names)
    (V,) = v_fields(E1, U)
    xx = Poly.gens(1)[0]
    assert V == DiffOp.partial(1, 0) - DiffOp.mult(xx.scale(Fraction(1, 2)))
    assert l_operator(E1, U) == V.compose(V).scale(-1)
    # V_j^2 1 summed is the U-bound potential, so L 1 = -V
    one = Poly.const(1, 1)
    assert l_operator(E1, U).apply(one) == v_potential_poly(E1, U).scale(-1)
    assert v_potential_poly(E1, U) == parse_expr("x^2/4 - 1/2", E1.names)


def test_rockland():
    assert rockland_op(H1, 1) == sub_laplacian(H1).scale(-1)
    assert rockland_op(H1, 2).apply(P("x^4")) == Poly.const(3, 24)
    assert rockland_op(H1, 2).order == 4
    with pytest.raises(ValueError):
        rockland_op(H1, 0)


def test_rockland_formally_self_adjoint():
    """<R f, g> = <f, R g> for f = P e^{-q}, g = Q e^{-q} with Lebesgue measure.

    Conjugating by e^{-q} turns R into (-1)^n sum (X_j - X_j q)^{2n}, so both
    sides become Gaussian-weighted integrals of polynomials.
    """
    q = P("(x^2 + y^2 + z^2)/2")
    for n in (1, 2):
        Rq = DiffOp.zero(3)
        for X in H1.generators:
            Y = X - DiffOp.mult(X.apply(q))
            Rq = Rq + Y ** (2 * n)
        Rq = Rq.scale((-1) ** n)
        quad = GridIntegrator(H1, PotentialSpec.polynomial(q.scale(2)), GridSpec(radius=7.0, nodes=71))
        for a, b in [("x*y + z", "x^2 - z"), ("y*z^2", "1 + x*z")]:
            Pa, Qb = P(a), P(b)
            lhs = quad.expect(Rq.apply(Pa) * Qb).mean
            rhs = quad.expect(Pa * Rq.apply(Qb)).mean
            assert abs(lhs - rhs) <= 1e-3 * max(abs(lhs), abs(rhs), 1.0)


def test_bracket_field_identity_random():
    rng = np.random.default_rng(5)
    for G in (H1, H2):
        for _ in range(20):
            U = random_poly(rng, G.dim, 4)
            V = v_fields(G, U)
            for j in range(G.horizontal):
                for k in range(G.horizontal):
                    assert commutator(V[j], V[k]) == bracket_field(G, U, j, k)
                    for l in range(G.horizontal):
                        assert commutator(commutator(V[j], V[k]), V[l]).is_multiplication()


def test_ad_small_orders():
    rng = np.random.default_rng(11)
    for _ in range(3):
        U = random_poly(rng, 3, 4)
        L = l_operator(H1, U)
        V = v_fields(H1, U)
        for l in range(2):
            assert ad_power(L, V[l], 1) == ad_first_anticommutator(H1, U, l)
            assert ad_power(L, V[l], 2) == ad_second_step2(H1, U, l)
            assert ad_power(L, V[l], 2) == ad_closed(H1, U, l, 2)


def test_ad_center_field_with_zero_potential():
    L = l_operator(H1, Poly.zero(3))
    assert ad_power(L, H1.center_fields[0], 1).is_zero()


def test_ad_closed_needs_step_two():
    from carnotcheck.group import CarnotGroup
    G3 = CarnotGroup("custom", 1, (2, 1, 1), H1.generators, H1.center_fields)
    with pytest.raises(UnsupportedStructureError):
        ad_closed(G3, Poly.zero(3), 0, 1)


def test_anticommutator():
    A, B = H1.generators
    assert anticommutator(A, B) == A.compose(B) + B.compose(A)


def test_harmonic_library_h1_explicit():
    lib = harmonic_library(H1)
    assert lib.exact
    lhs = P("(4*z + 2*x*y)^2 + (4*z - 2*x*y)^2 + 2*(x^2 - y^2)^2")
    assert lhs == kaplan_quartic_poly(H1).scale(2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_harmonic_library_exact(n):
    G = make_group("heisenberg", n)
    lib = harmonic_library(G)
    assert lib.identity_residual.is_zero()
    assert all(p.is_zero() for p in lib.laplacians.values())


def test_dual_biorthogonality():
    assert dual_biorthogonality(H1, 4)["exact"]
    assert dual_biorthogonality(H2, 3)["exact"]
