"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints exactly one ``CRITERION n: PASS|FAIL`` line before asserting.
"""

import itertools
import math
import time
from pathlib import Path

import numpy as np

from carnotcheck.cli import main
from carnotcheck.group import make_group
from carnotcheck.poly import Poly, dual_weight, multi_indices, parse_expr
from carnotcheck.potentials import PotentialSpec
from carnotcheck.sampler import GridIntegrator, GridSpec, MCIntegrator, SamplerConfig, run_chains
from carnotcheck.verifiers import (ad_check, adams_scan, bracket_check, build_integrator,
                                   example_theorems, harmonic_check, hardy_weight_scan,
                                   higher_poincare_check, jet_oracle, statpoly_build,
                                   step2_identity_check, ubound_defect)

ROOT = Path(__file__).resolve().parent.parent
H1 = make_group("heisenberg", 1)
E1 = make_group("euclidean", 1)
GAUSS = PotentialSpec.polynomial(parse_expr("x^2/2", E1.names))
QUAD = PotentialSpec.quadric_power(1)


def verdict(n: int, ok: bool, detail: str) -> None:
    print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def h1(s):
    return parse_expr(s, H1.names)


def test_criterion_01_exact_identities():
    t0 = time.perf_counter()
    reps = [harmonic_check(make_group("heisenberg", n)) for n in (1, 2, 3)]
    elapsed = time.perf_counter() - t0
    ok = all(r.exact for r in reps) and all(r.details["identity_residual"].is_zero() for r in reps)
    verdict(1, ok and elapsed < 5.0, f"harmonic library exact on H1..H3 in {elapsed:.2f}s")


def test_criterion_02_deformed_brackets():
    reps = [bracket_check(make_group("heisenberg", n), count=20, seed=1) for n in (1, 2)]
    verdict(2, all(r.exact for r in reps), "[V_j,V_k] = V_jk and triple brackets multiplicative, 20 U on H1, H2")


def test_criterion_03_ad_expansion():
    reps = [ad_check(make_group("heisenberg", n), (1, 2, 3), count=10, seed=2) for n in (1, 2)]
    verdict(3, all(r.exact for r in reps), "ad_L^m(V_l) closed form for m = 1, 2, 3, 10 U on H1, H2")


def test_criterion_04_jet_oracle():
    worst1 = worst2 = 0.0
    for G, kappa in itertools.product([H1, make_group("heisenberg", 2)], [1.0, 2.0, 3.5, 4.0]):
        rep = jet_oracle(G, PotentialSpec.kaplan_power(kappa), n_points=100, n_range=(0.5, 10.0), seed=3)
        worst1 = max(worst1, rep.summary["max_err_first"])
        worst2 = max(worst2, rep.summary["max_err_second"])
    verdict(4, worst1 <= 1e-6 and worst2 <= 1e-4,
            f"max rel error first {worst1:.2e} (<= 1e-6), second {worst2:.2e} (<= 1e-4)")


def test_criterion_05_adams_failure():
    pot = PotentialSpec.kaplan_power(4)
    shells = (10.0, 100.0, 1000.0, 10000.0)
    z = [r["ratio"] for r in adams_scan(H1, pot, "z_axis", 0.0, shells=shells).rows]
    rad = [r["ratio"] for r in adams_scan(H1, pot, "radial", 0.0, shells=shells).rows]
    at100 = abs(z[1] - 3200.0) / 3200.0
    two_dec = [z[k + 2] / z[k] for k in range(len(z) - 2)]
    ok = at100 <= 1e-9 and all(abs(g - 100.0) <= 20.0 for g in two_dec) and max(rad) <= 1.0
    verdict(5, ok, f"ratio(0,0,100) rel err {at100:.1e}; two-decade growth {two_dec}; radial max {max(rad):.2e}")


def test_criterion_06_ubound_identity():
    worst = 0.0
    quad = build_integrator(H1, QUAD)
    gauss = GridIntegrator(E1, GAUSS, GridSpec(radius=12.0, nodes=2001))
    cases = [(H1, QUAD, quad, h1(f)) for f in ("x", "y", "z", "x*y", "x^2 - y^2")]
    cases += [(E1, GAUSS, gauss, parse_expr(f, E1.names)) for f in ("1", "x", "x^2", "x^3 - x", "x^2 + 2*x")]
    for G, pot, I, f in cases:
        rep = ubound_defect(G, pot, f, I)
        scale = max(abs(rep.lhs.mean), abs(rep.rhs.mean), abs(rep.defect.mean))
        worst = max(worst, abs(rep.rhs.mean - rep.lhs.mean - rep.defect.mean) / scale)
    exact = ubound_defect(E1, GAUSS, parse_expr("x", E1.names), build_integrator(E1, GAUSS, {"kind": "exact"}))
    triple = (exact.lhs.exact, exact.rhs.exact, exact.defect.exact)
    ok = worst <= 1e-3 and triple == (0.25, 1, 0.75)
    verdict(6, ok, f"worst relative residual {worst:.1e}; exact Gaussian x: {tuple(map(str, triple))}")


def test_criterion_07_step2_identity():
    U2 = PotentialSpec.polynomial(h1("x^2/2 + y^2/2 + z^2/2 + x^4/8"))
    scen = [(QUAD, f) for f in ("1", "x", "y", "x*y + z", "x^2 - y^2")]
    scen += [(U2, f) for f in ("1", "x", "z", "x*y", "x^2 + y*z")]
    worst = 0.0
    for pot, f in scen:
        rep = step2_identity_check(H1, pot, h1(f), build_integrator(H1, pot))
        worst = max(worst, abs(rep.defect.mean) / max(abs(rep.lhs.mean), abs(rep.rhs.mean)))
    batch = run_chains(H1, QUAD, SamplerConfig(chains=4, steps=20000, burn_in=2000, seed=17))
    mc = step2_identity_check(H1, QUAD, h1("x*y + z"), MCIntegrator(batch))
    z_mc = abs(mc.defect.mean) / mc.defect.std_err if mc.defect.std_err else 0.0
    ok = worst <= 1e-3 and z_mc <= 3.0 and bool(mc.passed)
    verdict(7, ok, f"grid worst relative imbalance {worst:.1e} over {len(scen)} scenarios; "
                   f"MC |resid| / pooled se = {z_mc:.2f}")


def _span_member(rng, m):
    f = Poly.zero(3)
    for level in range(m):
        for g in multi_indices(2, level):
            f = f + dual_weight(g, 2, 3).scale(int(rng.integers(-5, 6)))
    return f


def test_criterion_08_statistical_polynomial():
    I = build_integrator(H1, QUAD)
    rng = np.random.default_rng(8)
    worst = 0.0
    for m in (1, 2, 3):
        members = [dual_weight(g, 2, 3) for level in range(m) for g in multi_indices(2, level)]
        members += [_span_member(rng, m) for _ in range(3)]
        for f in members:
            worst = max(worst, abs(statpoly_build(H1, QUAD, f, m, I).residual.mean))
    family = [h1(s) for s in ("x", "y", "z", "x*y", "x^2", "y^2", "x + x*y", "x^2 - y^2", "x*z", "y^2 + z")]
    margins = [higher_poincare_check(H1, QUAD, f, 2, I, family=family).defect.mean for f in family]
    ok = worst <= 1e-8 and min(margins) >= 0
    verdict(8, ok, f"worst annihilation residual {worst:.1e}; min chain margin {min(margins):.3e} over 10 members")


def test_criterion_09_eg2():
    pot = PotentialSpec.radial_cosine(1.0, 0.5, 1.0, 1.0)
    rep = example_theorems(make_group("euclidean", 2), pot, "eg2_adams_failure", shells=(10, 100, 1000))
    verdict(9, bool(rep.passed) and not rep.flags, f"critical points of both signs per shell: {rep.summary}")


def test_criterion_10_hardy_slope():
    slopes = {k: hardy_weight_scan(H1, PotentialSpec.kaplan_power(k)).summary["slope"] for k in (3.0, 4.0)}
    ok = all(abs(s - (k - 2)) <= 0.05 for k, s in slopes.items())
    verdict(10, ok, f"log-log slopes {slopes}")


def test_criterion_11_determinism_and_mc_agreement(tmp_path):
    identical = True
    for fx in sorted((ROOT / "scenarios").glob("*.toml")):
        outs = []
        for rep in ("a", "b"):
            main(["run", str(fx), "--out-dir", str(tmp_path / rep), "--format", "json", "--format", "csv"])
            outs.append(sorted((p.name, p.read_bytes()) for p in (tmp_path / rep).glob(f"{fx.stem}*")
                               if not p.name.endswith(".timing.json")))
        identical &= outs[0] == outs[1]
    obs = [h1(s) for s in ("x", "y^2", "z^2", "x*y + z", "x^2*z^2", "x^4 - y^2")]
    grid = GridIntegrator(H1, QUAD, GridSpec(radius=10.0, nodes=101)).expect_many(obs)
    hits = total = 0
    for seed in range(40):
        batch = run_chains(H1, QUAD, SamplerConfig(chains=4, steps=6000, burn_in=1000, seed=seed))
        for e, g in zip(MCIntegrator(batch).expect_many(obs), grid):
            total += 1
            hits += abs(e.mean - g.mean) <= 3 * e.std_err
    frac = hits / total
    verdict(11, identical and frac >= 0.95,
            f"fixture reruns byte-identical: {identical}; MC within 3 se: {hits}/{total} = {frac:.3f}")
