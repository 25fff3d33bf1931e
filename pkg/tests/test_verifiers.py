import math
from fractions import Fraction

import numpy as np
import pytest

from carnotcheck.group import make_group
from carnotcheck.poly import Poly, parse_expr
from carnotcheck.potentials import PotentialSpec
from carnotcheck.sampler import GridIntegrator, GridSpec, MCIntegrator, SamplerConfig, run_chains
from carnotcheck.verifiers import (adams_dual_scan, adams_scan, build_integrator, eg3_star_bound,
                                   example_theorems, hardy_check, hardy_weight_scan,
                                   higher_poincare_check, inductive_bound_pipeline, lsi_defect,
                                   lsi_fit, poincare_estimate, rockland_terms, statpoly_build,
                                   step2_identity_check, ubound_defect)
from carnotcheck.verifiers.common import InvalidScenarioError
from carnotcheck.verifiers.fitting import fit_constants

E1 = make_group("euclidean", 1)
E2 = make_group("euclidean", 2)
H1 = make_group("heisenberg", 1)
H1a = make_group("heisenberg", 1, "alt")
GAUSS = PotentialSpec.polynomial(parse_expr("x^2/2", E1.names))
QUAD = PotentialSpec.quadric_power(1)


def e1(s):
    return parse_expr(s, E1.names)


def h1(s):
    return parse_expr(s, H1.names)


@pytest.fixture(scope="module")
def gauss_exact():
    return build_integrator(E1, GAUSS, {"kind": "exact"})


@pytest.fixture(scope="module")
def gauss_grid():
    return GridIntegrator(E1, GAUSS, GridSpec(radius=12.0, nodes=2001))


@pytest.fixture(scope="module")
def quad_grid():
    return build_integrator(H1, QUAD)


# -- scans ------------------------------------------------------------------

def test_adams_z_axis_value_and_growth():
    rep = adams_scan(H1, PotentialSpec.kaplan_power(4), "z_axis", 0.0, shells=(10, 100, 1000, 10000))
    ratios = [r["ratio"] for r in rep.rows]
    assert ratios[1] == pytest.approx(3200.0, rel=1e-9)
    for g in rep.summary["growth"]:
        assert g == pytest.approx(10.0, rel=1e-6)


def test_adams_dilation_covariance():
    rep = adams_scan(H1, PotentialSpec.kaplan_power(4), "z_axis", 0.0, shells=(7.0, 700.0))
    assert rep.rows[1]["ratio"] / rep.rows[0]["ratio"] == pytest.approx(100.0, rel=1e-6)


def test_adams_radial_bounded():
    rep = adams_scan(H1, PotentialSpec.kaplan_power(4), "radial", 0.0, shells=(10, 100, 1000, 10000))
    ratios = np.array([r["ratio"] for r in rep.rows])
    # bounded by a constant (here it even decays, |grad U| dominates off the axis)
    assert ratios.max() < 1.0
    assert all(b <= a for a, b in zip(ratios, ratios[1:]))


def test_adams_singular_point_flagged():
    rep = adams_scan(H1, PotentialSpec.kaplan_power(4), "z_axis", 0.0, shells=(0.0, 10.0))
    assert rep.flags
    assert np.isfinite(rep.rows[1]["ratio"])


def test_dual_scan_diverges():
    rep = adams_dual_scan(H1, PotentialSpec.dual_monomial((1, 1), "power", 2))
    ratios = [r["ratio"] for r in rep.rows]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] / ratios[0] > 10


def test_dual_scan_zero_hessian_row():
    rep = adams_dual_scan(H1a, PotentialSpec.dual_monomial((2, 0), "power", 1))
    assert rep.summary["zero_hessian_rows"] == [2]


def test_dual_scan_linear_bounded():
    rep = adams_dual_scan(H1, PotentialSpec.dual_monomial((1, 0), "power", 1),
                          path="box", box={"lo": [0.5, 0.5, -2.0], "hi": [3.0, 3.0, 2.0], "n": 5})
    assert rep.summary["max_ratio"] < 10


def test_hardy_weight_slope():
    for kappa in (3.0, 4.0):
        rep = hardy_weight_scan(H1, PotentialSpec.kaplan_power(kappa))
        assert abs(rep.summary["slope"] - (kappa - 2)) <= 0.05
        assert rep.passed


def test_eg2_both_signs():
    pot = PotentialSpec.radial_cosine(1.0, 0.5, 1.0, 1.0)
    rep = example_theorems(E2, pot, "eg2_adams_failure")
    assert rep.passed
    assert not rep.flags


def test_example_dispatch_errors():
    with pytest.raises(InvalidScenarioError):
        example_theorems(H1, PotentialSpec.kaplan_power(4), "eg2_adams_failure")
    with pytest.raises(InvalidScenarioError):
        example_theorems(H1, QUAD, "nope", integrator=object())


# -- U-bound defect -----------------------------------------------------------

def test_ubound_gaussian_x(gauss_exact):
    rep = ubound_defect(E1, GAUSS, e1("x"), gauss_exact)
    assert (rep.lhs.exact, rep.rhs.exact, rep.defect.exact) == (Fraction(1, 4), 1, Fraction(3, 4))
    assert rep.passed


def test_ubound_gaussian_one(gauss_grid):
    rep = ubound_defect(E1, GAUSS, e1("1"), gauss_grid)
    assert rep.lhs.mean == pytest.approx(-0.25, abs=1e-9)
    assert rep.rhs.mean == 0
    assert rep.defect.mean == pytest.approx(0.25, abs=1e-9)


@pytest.mark.parametrize("f", ["x", "y", "z", "x*y", "x^2 - y^2"])
def test_ubound_three_way_on_quadric(quad_grid, f):
    rep = ubound_defect(H1, QUAD, h1(f), quad_grid)
    scale = max(abs(rep.rhs.mean), abs(rep.lhs.mean))
    assert abs(rep.rhs.mean - rep.lhs.mean - rep.defect.mean) <= 1e-3 * scale
    assert rep.passed


# -- Poincare and statistical polynomials -------------------------------------

def test_poincare_gaussian(gauss_exact):
    fit = poincare_estimate(E1, GAUSS, [e1("x"), e1("x^2"), e1("3")], gauss_exact)
    ratios = [m.get("ratio") for m in fit.members]
    assert ratios[0] == 1 and ratios[1] == Fraction(1, 2)
    assert fit.notices  # constant skipped
    assert fit.constants["C"] == 1


def test_poincare_affine_invariance():
    batch = run_chains(E1, GAUSS, SamplerConfig(chains=2, steps=3000, burn_in=300, seed=2))
    I = MCIntegrator(batch)
    a = poincare_estimate(E1, GAUSS, [e1("x^2 + x")], I)
    b = poincare_estimate(E1, GAUSS, [e1("2*x^2 + 2*x + 7")], I)
    assert a.members[0]["ratio"] == pytest.approx(b.members[0]["ratio"], rel=1e-12)


def test_statpoly_constant(quad_grid):
    res = statpoly_build(H1, QUAD, h1("5/3"), 2, quad_grid)
    assert res.zeta == h1("5/3")
    assert abs(res.residual.mean) <= 1e-12


@pytest.mark.parametrize("m", [1, 2, 3])
def test_statpoly_annihilation_exact(gauss_exact, m):
    for k in range(m):
        f = e1(f"x^{k}/{math.factorial(k)}") if k else e1("1")
        res = statpoly_build(E1, GAUSS, f, m, gauss_exact)
        assert res.residual.exact == 0


def test_statpoly_quadric_chain(quad_grid):
    f = h1("x + x*y")
    res = statpoly_build(H1, QUAD, f, 2, quad_grid)
    rep = higher_poincare_check(H1, QUAD, f, 2, quad_grid, family=[h1("x"), h1("y"), h1("x*y"), h1("x^2")])
    assert rep.lhs.mean == pytest.approx(res.residual.mean, rel=1e-12)
    assert rep.passed


def test_higher_poincare_gaussian_cubic(gauss_grid):
    rep = higher_poincare_check(E1, GAUSS, e1("x^3"), 2, gauss_grid, C=1.0)
    assert rep.lhs.mean <= rep.rhs.mean
    assert rep.passed


def test_higher_poincare_trivial(gauss_exact):
    rep = higher_poincare_check(E1, GAUSS, e1("2*x + 1"), 2, gauss_exact, C=1.0)
    assert rep.lhs.exact == 0 and rep.rhs.mean == 0


def test_higher_poincare_quadric_xy(quad_grid):
    rep = higher_poincare_check(H1, QUAD, h1("x*y"), 2, quad_grid, family=[h1("x"), h1("y"), h1("x*y")])
    assert rep.passed


# -- log-Sobolev -------------------------------------------------------------

def test_lsi_constant_is_zero(gauss_grid):
    rep = lsi_defect(E1, GAUSS, e1("1"), 0.5, 1, 2.0, gauss_grid)
    assert rep.lhs.mean == 0


def test_lsi_scale_invariance():
    batch = run_chains(E1, GAUSS, SamplerConfig(chains=2, steps=3000, burn_in=300, seed=4))
    I = MCIntegrator(batch)
    a = lsi_defect(E1, GAUSS, e1("x + 1"), 0.5, 1, 2.0, I)
    b = lsi_defect(E1, GAUSS, e1("2*x + 2"), 0.5, 1, 2.0, I)
    assert a.lhs.mean == pytest.approx(b.lhs.mean, rel=1e-12)
    assert a.ratio == pytest.approx(b.ratio, rel=1e-12)


def test_lsi_refinement_stable():
    f = e1("x")
    coarse = lsi_defect(E1, GAUSS, f, 0.5, 1, 2.0, GridIntegrator(E1, GAUSS, GridSpec(radius=12.0, nodes=1001)))
    fine = lsi_defect(E1, GAUSS, f, 0.5, 1, 2.0, GridIntegrator(E1, GAUSS, GridSpec(radius=12.0, nodes=4001)))
    assert np.isfinite(coarse.ratio)
    assert abs(coarse.ratio - fine.ratio) <= 0.01 * abs(fine.ratio)


def test_lsi_zero_function(gauss_grid):
    with pytest.raises(ValueError, match="undefined"):
        lsi_defect(E1, GAUSS, Poly.zero(1), 0.5, 1, 2.0, gauss_grid)


def test_lsi_fit_feasible(gauss_grid):
    fit = lsi_fit(E1, GAUSS, [e1("x"), e1("x^2"), e1("x + 1")], 0.5, 1, 2.0, gauss_grid)
    assert fit.feasible and fit.passed


# -- step-2 identity ---------------------------------------------------------

@pytest.mark.parametrize("f", ["1", "x", "x*y + z"])
def test_step2_identity_quadric(quad_grid, f):
    rep = step2_identity_check(H1, QUAD, h1(f), quad_grid, ibp_family=[h1("x"), h1("y")])
    assert rep.passed, rep.to_dict()


def test_step2_identity_flat():
    pot = PotentialSpec.polynomial(parse_expr("x^2/2 + y^4/4", E2.names))
    I = GridIntegrator(E2, pot, GridSpec(radius=10.0, nodes=201))
    rep = step2_identity_check(E2, pot, parse_expr("x*y", E2.names), I)
    assert rep.passed
    # commutators vanish, so the left side is just ||L f||^2
    assert rep.lhs.mean == pytest.approx(rep.extras["norm_Lf"].mean, rel=1e-12)


# -- inductive bound ---------------------------------------------------------

def test_inductive_gaussian_E_le_one(gauss_grid):
    fit = inductive_bound_pipeline(E1, GAUSS, 2, 0.1, 1.0, [e1("x"), Poly.zero(1)], gauss_grid)
    assert fit.constants["E_eps"] <= 1.0 + 1e-9
    zero = [m for m in fit.members if m["f"].is_zero()]
    assert zero and all(m["margin"] == 0 for m in zero)


def test_inductive_quadric_power_two():
    pot = PotentialSpec.quadric_power(2)
    I = build_integrator(H1, pot, {"radius": [4.0, 4.0, 5.0], "nodes": 61})
    fit = inductive_bound_pipeline(H1, pot, 2, 0.5, 1.0, [h1("x"), h1("y")], I, decades=3.0)
    assert np.isfinite(fit.constants["E_eps"])


# -- Hardy, eg3, Rockland ---------------------------------------------------

def test_hardy_kaplan_quartic():
    pot = PotentialSpec.kaplan_power(4)
    I = build_integrator(H1, pot, {"radius": [4.0, 4.0, 6.0], "nodes": 81})
    fit = hardy_check(H1, pot, [h1("x"), Poly.zero(3)], I)
    assert fit.feasible
    assert all(m.get("margin_ii", 0.0) >= -1e-9 for m in fit.members)
    zero = fit.members[1]
    assert zero["lhs_i"] == 0 and zero["rhs_i"] == 0


def test_hardy_rejects_non_vanishing_member():
    pot = PotentialSpec.kaplan_power(4)
    I = build_integrator(H1, pot, {"radius": [4.0, 4.0, 6.0], "nodes": 41})
    fit = hardy_check(H1, pot, [h1("z"), h1("x")], I)
    assert len(fit.notices) == 1 and "rejected" in fit.notices[0]
    assert len(fit.members) == 1


def test_eg3_margins():
    G, pot = H1a, PotentialSpec.quadric_power(1)
    I = build_integrator(G, pot)
    fit = eg3_star_bound(G, pot, [h1("x"), Poly.zero(3)], I, A=2.0, C=1.0, n_tilde=6.0, D=None)
    assert fit.feasible
    assert all(m["margin"] >= -1e-9 for m in fit.members)
    assert fit.members[1]["margin"] == 0


def test_eg3_needs_n_tilde():
    with pytest.raises(InvalidScenarioError):
        eg3_star_bound(H1, QUAD, [h1("x")], build_integrator(H1, QUAD), A=2.0, C=1.0, n_tilde=None)


def test_rockland_fit():
    G = H1
    pot = PotentialSpec.kaplan_power(4)
    I = build_integrator(G, pot, {"radius": [4.0, 4.0, 6.0], "nodes": 61})
    fit = rockland_terms(G, pot, [h1("x"), h1("y"), h1("x*y"), h1("x^2")], 1, I)
    assert fit.feasible and fit.passed


def test_fit_constants_lp():
    lhs = [1.0, 2.0, 0.0]
    cols = [(1.0, 0.0), (1.0, 1.0), (0.0, 0.0)]
    consts, margins, feasible = fit_constants(lhs, cols, ("C", "D"))
    C, D = consts["C"], consts["D"]
    assert feasible and (margins >= 0).all()
    assert C == pytest.approx(1.0, abs=1e-9) and D == pytest.approx(1.0, abs=1e-9)
    assert all(C * a + D * b - y >= -1e-9 for y, (a, b) in zip(lhs, cols))
