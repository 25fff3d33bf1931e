from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from carnotcheck.diffop import DiffOp, commutator
from carnotcheck.group import (SingularPointError, dilate, eta_functional, group_inverse,
                               group_product, kaplan_jet, kaplan_jet_array, kaplan_norm,
                               kaplan_quartic, kaplan_quartic_poly, make_group)
from carnotcheck.poly import Poly
from strategies import points, polys

H1 = make_group("heisenberg", 1)
H2 = make_group("heisenberg", 2)
x, y, z = Poly.gens(3)
half = Fraction(1, 2)


def test_heisenberg_fields():
    X, Y = H1.generators
    assert X == DiffOp.partial(3, 0) + DiffOp.partial(3, 2).lmul(y.scale(-half))
    assert Y == DiffOp.partial(3, 1) + DiffOp.partial(3, 2).lmul(x.scale(half))
    assert H1.dim == 3 and H1.hom_dim == 4 and H1.center_fields == (DiffOp.partial(3, 2),)


def test_alt_convention_flips_vertical_part():
    Ha = make_group("heisenberg", 1, "alt")
    X, Y = Ha.generators
    assert X == DiffOp.partial(3, 0) + DiffOp.partial(3, 2).lmul(y.scale(half))
    # the two presentations disagree on the sign of [X, Y]
    assert commutator(*H1.generators) == DiffOp.partial(3, 2)
    assert commutator(*Ha.generators) == DiffOp.partial(3, 2).scale(-1)


def test_euclidean_and_dimensions():
    E1 = make_group("euclidean", 1)
    assert len(E1.generators) == 1 and E1.hom_dim == 1 and E1.generators[0] == DiffOp.partial(1, 0)
    assert len(H2.generators) == 4 and len(H2.center_fields) == 1 and H2.hom_dim == 6
    with pytest.raises(ValueError):
        make_group("heisenberg", 0)


@pytest.mark.parametrize("G", [H1, H2, make_group("heisenberg", 3)])
def test_bracket_closure(G):
    Zf = G.center_fields[0]
    gens = G.generators
    for i, A in enumerate(gens):
        for B in gens[i + 1:]:
            c = commutator(A, B)
            assert c.is_zero() or c == Zf or c == Zf.scale(-1)
            for C in gens:
                assert commutator(c, C).is_zero()


def test_laplacian_constant_forms_agree():
    for n in (1, 2, 3):
        G = make_group("heisenberg", n)
        assert G.laplacian_constant("Q-1") == G.laplacian_constant("n+2m-1") == 2 * n + 1


def test_group_law_examples():
    p = (Fraction(1), Fraction(2), Fraction(3))
    e = (0, 0, 0)
    assert group_product(H1, p, e) == p
    assert group_product(H1, p, group_inverse(H1, p)) == (0, 0, 0)
    # Lambda = [[0, -1], [1, 0]]: <Lambda (1,0), (0,1)> = 1
    assert group_product(H1, (1, 0, 0), (0, 1, 0))[2] == half
    with pytest.raises(ValueError):
        group_product(H1, (1, 0), (0, 1, 0))


@given(points(3), points(3), points(3))
def test_associativity(p, q, r):
    assert group_product(H1, group_product(H1, p, q), r) == group_product(H1, p, group_product(H1, q, r))


def test_dilation():
    assert dilate(H1, 2, (1, 1, 1)) == (2, 2, 4)
    assert dilate(H1, 1, (1, 2, 3)) == (1, 2, 3)
    with pytest.raises(ValueError):
        dilate(H1, 0, (1, 1, 1))


@given(points(3), points(3))
def test_dilation_is_automorphism(p, q):
    lam = Fraction(3, 2)
    assert dilate(H1, lam, group_product(H1, p, q)) == group_product(H1, dilate(H1, lam, p), dilate(H1, lam, q))
    assert kaplan_quartic(H1, dilate(H1, lam, p)) == lam**4 * kaplan_quartic(H1, p)


def _left_translate(G, q, f: Poly) -> Poly:
    """f o L_q as a polynomial in p."""
    gens = Poly.gens(G.dim)
    h = 2 * G.n
    subs = [gens[i] + Poly.const(G.dim, q[i]) for i in range(h)]
    zz = gens[h] + Poly.const(G.dim, q[h])
    for i in range(h):
        zz = zz + gens[i].scale(half * G.sign(i) * q[G.partner(i)])
    return f.compose(subs + [zz])


@given(polys(3, 3), points(3), points(3))
def test_left_invariance(f, q, p):
    ft = _left_translate(H1, q, f)
    qp = group_product(H1, q, p)
    for X in H1.generators:
        assert X.apply(ft).eval(p) == X.apply(f).eval(qp)


def test_kaplan_norm_values():
    assert kaplan_norm(H1, (1, 0, 0)) == 1
    assert kaplan_norm(H1, (0, 0, 1)) == pytest.approx(2.0, rel=1e-15)
    assert kaplan_quartic(H1, (1, 1, Fraction(1, 4))) == 5
    assert kaplan_norm(H1, (1, 1, 0.25)) == pytest.approx(5 ** 0.25, rel=1e-14)
    assert kaplan_quartic_poly(H1).eval((1, 1, Fraction(1, 4))) == 5


def test_kaplan_jet_on_z_axis():
    for zz in (0.5, 3.0, 40.0):
        J = kaplan_jet(H1, (0, 0, zz))
        N = J.value
        assert np.allclose(J.grad_h, 0)
        assert abs(J.hess_h[1, 0]) == pytest.approx(1 / N, rel=1e-12)
        assert abs(J.hess_h[0, 1]) == pytest.approx(4 * zz / N**3, rel=1e-12)
        assert J.z_jet[0] == pytest.approx(8 * zz / N**3, rel=1e-12)


def test_kaplan_jet_unit_point():
    J = kaplan_jet(H1, (1, 0, 0))
    assert J.grad_h == pytest.approx([1.0, 0.0], abs=1e-15)


def test_kaplan_jet_singular():
    with pytest.raises(SingularPointError):
        kaplan_jet(H1, (0, 0, 0))
    J = kaplan_jet_array(H1, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), strict=False)
    assert J.singular.tolist() == [True, False]
    assert np.isnan(J.grad_h[0]).all()


def test_kaplan_jet_homogeneity():
    rng = np.random.default_rng(0)
    for G in (H1, H2):
        p = rng.normal(size=(20, G.dim))
        lam = 2.7
        q = np.array([dilate(G, lam, r) for r in p])
        A, B = kaplan_jet_array(G, p), kaplan_jet_array(G, q)
        assert np.allclose(B.value, lam * A.value, rtol=1e-12)
        assert np.allclose(B.grad_h, A.grad_h, rtol=1e-10, atol=1e-12)
        assert np.allclose(B.hess_h, A.hess_h / lam, rtol=1e-9, atol=1e-12)


def test_eta_functional():
    assert eta_functional(H1, 1) == x
    assert eta_functional(H1, 3) == z
    with pytest.raises(IndexError):
        eta_functional(H1, 4)
    for G in (H1, H2):
        for i in range(G.horizontal):
            eta = eta_functional(G, i + 1)
            for j, X in enumerate(G.generators):
                assert X.apply(eta) == Poly.const(G.dim, 1 if i == j else 0)
