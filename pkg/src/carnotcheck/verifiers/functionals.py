"""Quadratic-form verifiers: U-bounds, Poincare, statistical polynomials, LSI, Hardy."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ..group import CarnotGroup, GroupKindError
from ..operators import (grad_sq, iterated_grad_sq, nabla_multi,
                         rockland_op, v_fields)
from ..poly import Poly, dual_weight, multi_indices
from ..potentials import PotentialSpec, field_vectors, positivity_shift
from ..sampler import Estimate, combine
from .common import (Fields, InvalidScenarioError, default_family, group_norm_array,
                     shell_points, to_fraction)
from .fitting import fit_constants
from .reports import DefectReport, FitResult
from .scans import hardy_w_profile


def _is_mc(integrator) -> bool:
    return getattr(integrator, "method", "") == "mc"


def _agrees(est: Estimate, scale: float, tol: float, mc: bool) -> bool:
    """|est| small: relative tolerance for deterministic integrators, 3 sigma for MC."""
    if est.exact is not None:
        return est.exact == 0 or abs(est.mean) <= tol * max(scale, 1e-300)
    if mc:
        return abs(est.mean) <= 3.0 * est.std_err + 1e-12 * max(scale, 1.0)
    return abs(est.mean) <= tol * max(scale, 1e-300) + 1e-14


def _pooled(resid: Estimate, parts: Sequence[Estimate], mc: bool) -> Estimate:
    """Residual with the error bar of its separately estimated parts (quadrature sum).

    The paired estimate of the residual integrand has a much smaller batch-means
    error, which undercovers for heavy-tailed polynomial integrands.
    """
    if not mc:
        return resid
    se = math.sqrt(math.fsum(e.std_err**2 for e in parts))
    return dataclasses.replace(resid, std_err=se)


def _feasible(margin, scale, rel: float = 1e-9) -> bool:
    """Fitted constants keep every member feasible, up to LP round-off."""
    return margin is None or margin >= -rel * scale


# ---------------------------------------------------------------------------
# U-bound

def ubound_defect(G: CarnotGroup, pot: PotentialSpec, f: Poly, integrator,
                  tol: float = 1e-3) -> DefectReport:
    """lhs = mu(f^2 V), rhs = mu|grad f|^2, defect = mu|grad f - f grad U / 2|^2.

    The defect is the Lebesgue integral of |grad(f e^{-U/2})|^2 divided by Z,
    so rhs - lhs = defect holds once integrals are exact.
    """
    F = Fields(G, pot)
    gf = [X.apply(f) for X in G.generators]
    if F.symbolic:
        lhs_o = f * f * F.V
        rhs_o = grad_sq(G, f)
        half = Fraction(1, 2)
        defect_o = sum(((g - f * u.scale(half)) ** 2 for g, u in zip(gf, F.gradU)), Poly.zero(G.dim))
        resid_o = rhs_o - lhs_o - defect_o
    else:
        def lhs_o(p):
            return f.eval_array(p) ** 2 * F.v_array(p)

        def rhs_o(p):
            return sum(g.eval_array(p) ** 2 for g in gf)

        def defect_o(p):
            fv = f.eval_array(p)
            gu = F.gradU_array(p)
            return sum((g.eval_array(p) - 0.5 * fv * gu[:, j]) ** 2 for j, g in enumerate(gf))

        def resid_o(p):
            return rhs_o(p) - lhs_o(p) - defect_o(p)

    lhs, rhs, defect, paired = integrator.expect_many([lhs_o, rhs_o, defect_o, resid_o])
    resid = _pooled(paired, [lhs, rhs, defect], _is_mc(integrator))
    scale = max(abs(lhs.mean), abs(rhs.mean), abs(defect.mean))
    ok = _agrees(resid, scale, tol, _is_mc(integrator))
    ratio = lhs.mean / rhs.mean if rhs.mean else None
    return DefectReport("ubound_defect", lhs, rhs, defect, ratio, tol, ok,
                        {"f": f, "residual": resid, "paired_std_err": paired.std_err})


# ---------------------------------------------------------------------------
# Poincare and statistical polynomials

def _variance_and_dirichlet(G, f: Poly, integrator):
    m1, m2, dirichlet = integrator.expect_many([f, f * f, grad_sq(G, f)])
    if m1.exact is not None and m2.exact is not None:
        v = m2.exact - m1.exact**2
        var = Estimate(float(v), 0.0, None, m2.n, m2.method, v)
    else:
        centred = f - Poly.const(G.dim, Fraction(m1.mean))
        var = integrator.expect(centred * centred)
    return var, dirichlet


def poincare_estimate(G: CarnotGroup, pot: PotentialSpec, family: Sequence[Poly], integrator) -> FitResult:
    """Largest variance / Dirichlet ratio over the family: a lower bound on the Poincare constant."""
    members, notices = [], []
    best = 0.0
    for f in family:
        if f.degree() <= 0:
            notices.append(f"skipped constant member {f}")
            continue
        var, dirichlet = _variance_and_dirichlet(G, f, integrator)
        if dirichlet.mean <= 0:
            notices.append(f"skipped member {f} with zero Dirichlet form")
            continue
        ratio = var.mean / dirichlet.mean
        best = max(best, ratio)
        members.append({"f": f, "variance": var, "dirichlet": dirichlet, "ratio": ratio})
    for m in members:
        m["margin"] = best * m["dirichlet"].mean - m["variance"].mean
    return FitResult("poincare_estimate", {"C": best}, 0.0 if members else None, members,
                     "mu|f - mu f|^2 <= C mu|grad f|^2; C is the largest ratio over the family",
                     notices=notices)


@dataclass
class StatpolyResult:
    zeta: Poly
    residual: Estimate
    levels: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"zeta": self.zeta, "residual": self.residual, "levels": self.levels,
                "warnings": self.warnings}


def statpoly_build(G: CarnotGroup, pot: PotentialSpec, f: Poly, m: int, integrator) -> StatpolyResult:
    """Downhill construction of the statistical polynomial zeta_m.

    For levels l = m-1, ..., 0 subtract  sum_{|gamma|=l} w_gamma mu(nabla^gamma f_cur)
    from the current remainder; zeta_m is the total subtracted.
    """
    if m < 1:
        raise ValueError("order m must be at least 1")
    k = G.horizontal
    cur = f
    levels, warns = [], []
    for level in range(m - 1, -1, -1):
        idx = multi_indices(k, level)
        ests = integrator.expect_many([nabla_multi(G, g, cur) for g in idx])
        sub = Poly.zero(G.dim)
        moments = {}
        for g, est in zip(idx, ests):
            if _is_mc(integrator) and est.std_err > 0.1 * abs(est.mean) and abs(est.mean) > 0:
                warns.append(f"low precision moment at level {level}, gamma={g}")
            c = to_fraction(est)
            moments[str(g)] = est
            if c:
                sub = sub + dual_weight(g, k, G.dim).scale(c)
        cur = cur - sub
        levels.append({"level": level, "moments": moments})
    zeta = f - cur
    resid = integrator.expect(cur * cur)
    return StatpolyResult(zeta, resid, levels, warns)


def higher_poincare_check(G: CarnotGroup, pot: PotentialSpec, f: Poly, m: int, integrator,
                          C: float | None = None, family: Sequence[Poly] | None = None,
                          mode: str = "words") -> DefectReport:
    """lhs = mu|f - zeta_m|^2 against rhs = C^m mu|nabla^m f|^2."""
    notices = []
    if C is None:
        fit = poincare_estimate(G, pot, family or default_family(G), integrator)
        C = fit.constants["C"]
        notices.append(f"Poincare constant estimated from {len(fit.members)} members: C = {C!r}")
    sp = statpoly_build(G, pot, f, m, integrator)
    grad_m = integrator.expect(iterated_grad_sq(G, f, m, mode))
    rhs = grad_m.scale(C**m)
    lhs = sp.residual
    margin = combine([rhs, lhs], [1, -1])
    ok = margin.mean >= -3.0 * margin.std_err - 1e-12 * max(abs(lhs.mean), abs(rhs.mean), 1e-300)
    ratio = lhs.mean / rhs.mean if rhs.mean else None
    return DefectReport("higher_poincare", lhs, rhs, margin, ratio, None, ok,
                        {"f": f, "m": m, "C": C, "zeta": sp.zeta, "mode": mode},
                        notices + sp.warnings)


# ---------------------------------------------------------------------------
# log-Sobolev

def _derivative_tree(G, f: Poly, m: int) -> list[list[Poly]]:
    """Words X_w f grouped by length 0..m."""
    out = [[f]]
    for _ in range(m):
        out.append([X.apply(g) for g in out[-1] for X in G.generators])
    return out


def lsi_defect(G: CarnotGroup, pot: PotentialSpec, f: Poly, beta: float, m: int, p: float,
               integrator) -> DefectReport:
    """Both sides of the beta-LSI for one test function, normalised by mu|f|^p.

    lhs = mu(|f|^p |log(|f|^p / mu|f|^p)|^(beta m)) / mu|f|^p and
    rhs = sum_{k<=m} mu|nabla^k f|^p / mu|f|^p  (sum over words of length k).
    Both are invariant under f -> c f.
    """
    if not 0 < beta < 1:
        raise ValueError("beta must lie in (0, 1)")
    if m < 1 or p <= 0:
        raise ValueError("need m >= 1 and p > 0")
    tree = _derivative_tree(G, f, m)
    norm = integrator.expect(lambda x: np.abs(f.eval_array(x)) ** p)
    if norm.mean <= 0:
        raise ValueError(f"test function {f} vanishes almost everywhere; the ratio is undefined")
    mp = norm.mean

    def lhs_obs(x):
        a = np.abs(f.eval_array(x)) ** p
        out = np.zeros_like(a)
        pos = a > 0
        out[pos] = a[pos] * np.abs(np.log(a[pos] / mp)) ** (beta * m)
        return out

    grads = [lambda x, g=g: np.abs(g.eval_array(x)) ** p for level in tree[1:] for g in level]
    ests = integrator.expect_many([lhs_obs] + grads)
    raw_lhs = ests[0]
    raw_grad = combine(ests[1:], [1] * len(ests[1:])) if len(ests) > 1 else Estimate(0.0)
    raw_rhs = combine([norm, raw_grad], [1, 1])
    lhs = raw_lhs.scale(1 / mp)
    rhs = raw_rhs.scale(1 / mp)
    ratio = raw_lhs.mean / raw_rhs.mean if raw_rhs.mean else None
    return DefectReport("lsi_defect", lhs, rhs, combine([rhs, lhs], [1, -1]), ratio, None, None,
                        {"f": f, "beta": beta, "m": m, "p": p, "raw_lhs": raw_lhs, "raw_rhs": raw_rhs,
                         "raw_gradient_part": raw_grad, "norm": norm})


def lsi_fit(G: CarnotGroup, pot: PotentialSpec, family: Sequence[Poly], beta: float, m: int, p: float,
            integrator, lam: float = 1e-2) -> FitResult:
    """Fit both normalisations of the LSI: C alone and (C, D) with an additive mu|f|^p term."""
    rows, notices = [], []
    for f in family:
        try:
            r = lsi_defect(G, pot, f, beta, m, p, integrator)
        except ValueError as exc:
            notices.append(str(exc))
            continue
        rows.append((f, r))
    lhs = np.array([r.extras["raw_lhs"].mean for _, r in rows])
    grad = np.array([r.extras["raw_gradient_part"].mean for _, r in rows])
    norm = np.array([r.extras["norm"].mean for _, r in rows])
    c_only, marg1, feas1 = fit_constants(lhs, grad[:, None], ["C"], lam)
    c_d, marg2, feas2 = fit_constants(lhs, np.stack([grad, norm], axis=1), ["C", "D"], lam)
    members = [{"f": f, "lhs": r.extras["raw_lhs"], "gradient_part": r.extras["raw_gradient_part"],
                "norm": r.extras["norm"], "margin_C": float(a), "margin_CD": float(b)}
               for (f, r), a, b in zip(rows, marg1, marg2)]
    margin = float(np.min(marg2)) if len(marg2) else None
    return FitResult("lsi_fit", {"C_only": c_only["C"], "C": c_d["C"], "D": c_d["D"]}, margin, members,
                     "mu(|f|^p |log(|f|^p/mu|f|^p)|^(beta m)) <= C sum_{1<=k<=m} mu|nabla^k f|^p [+ D mu|f|^p]",
                     feas1 and feas2, passed=_feasible(margin, rows and max(float(np.max(np.abs(lhs))), 1.0)),
                     extras={"feasible_C_only": feas1}, notices=notices)


# ---------------------------------------------------------------------------
# step-two operator identity

def step2_identity_check(G: CarnotGroup, pot: PotentialSpec, f: Poly, integrator,
                         tol: float = 1e-3, ibp_family: Sequence[Poly] = ()) -> DefectReport:
    """||L f||^2 + sum_{j,l} ||[V_l, V_j] f||^2  against  sum_{j,l} ||V_j V_l f||^2."""
    if G.step != 2 and G.kind != "euclidean":
        raise GroupKindError("the identity is stated for step-two groups")
    U = pot.symbolic(G)
    if U is None:
        raise InvalidScenarioError("step2_identity_check needs a polynomial interaction")
    V = v_fields(G, U)
    k = G.horizontal
    Vf = [v.apply(f) for v in V]
    VV = [[V[j].apply(Vf[l]) for l in range(k)] for j in range(k)]     # VV[j][l] = V_j V_l f
    Lf = -sum((VV[j][j] for j in range(k)), Poly.zero(G.dim))
    comm_sq = Poly.zero(G.dim)
    rhs_o = Poly.zero(G.dim)
    for j in range(k):
        for l in range(k):
            c = VV[l][j] - VV[j][l]
            comm_sq = comm_sq + c * c
            rhs_o = rhs_o + VV[j][l] * VV[j][l]
    lhs_o = Lf * Lf + comm_sq
    lhs, rhs, paired = integrator.expect_many([lhs_o, rhs_o, lhs_o - rhs_o])
    resid = _pooled(paired, [lhs, rhs], _is_mc(integrator))
    ok = _agrees(resid, max(abs(lhs.mean), abs(rhs.mean)), tol, _is_mc(integrator))
    ibp = []
    for g in ibp_family:
        for j in range(k):
            e = integrator.expect(f * V[j].apply(g) + g * Vf[j])
            scale = integrator.expect(f * f + g * g).mean
            good = _agrees(e, scale, tol, _is_mc(integrator))
            ibp.append({"g": g, "j": j + 1, "value": e, "ok": good})
            ok = ok and good
    ratio = lhs.mean / rhs.mean if rhs.mean else None
    return DefectReport("step2_identity", lhs, rhs, resid, ratio, tol, ok,
                        {"f": f, "ibp": ibp, "norm_Lf": integrator.expect(Lf * Lf),
                         "paired_std_err": paired.std_err})


# ---------------------------------------------------------------------------
# moment bounds driven by a weight W

def _v_gradient(G, F: Fields, pts: np.ndarray, h: float = 1e-4) -> np.ndarray:
    if F.symbolic:
        polys = [X.apply(F.V) for X in G.generators]
        return np.stack([q.eval_array(pts) for q in polys], axis=1)
    C = field_vectors(G, pts)
    out = np.empty((len(pts), G.horizontal))
    for j in range(G.horizontal):
        out[:, j] = (F.v_array(pts + h * C[:, j]) - F.v_array(pts - h * C[:, j])) / (2 * h)
    return out


def inductive_bound_pipeline(G: CarnotGroup, pot: PotentialSpec, n: int, eps: float, R: float,
                             family: Sequence[Poly], integrator, weight: str = "bracket",
                             decades: float = 3.0, n_shells: int = 13, cap: float = 1e12,
                             seed: int = 0) -> FitResult:
    """Check the growth condition on W and estimate the moment constants a_m.

    (i)  E_eps = max over shells outside B_R of (|grad W|^2 / W - eps W^2)^+ ;
    (ii) a_m = max_f mu(W^m f^2) / mu(sum_{k<=m} |nabla^k f|^2 + f^2), m = 1..n.
    ``weight="bracket"`` uses <V> = (V^2 + 1)^(1/2); ``"shifted"`` uses V + C.
    """
    F = Fields(G, pot)
    radii = np.geomspace(R, R * 10**decades, n_shells)
    pts = shell_points(G, radii, seed=seed)
    V = F.v_array(pts)
    notices = []
    if weight == "bracket":
        shift = None

        def Wfun(p):
            return np.sqrt(F.v_array(p) ** 2 + 1.0)

        W = np.sqrt(V**2 + 1.0)
        gradW = _v_gradient(G, F, pts) * (V / W)[:, None]
    elif weight == "shifted":
        # shift from a compact scan of the ball B_R; outside it W must stay positive on its own
        inner = shell_points(G, np.geomspace(max(R * 1e-3, 1e-3), R, 7), seed=seed)
        shift = positivity_shift(G, pot, inner)

        def Wfun(p):
            return F.v_array(p) + shift

        W = V + shift
        gradW = _v_gradient(G, F, pts)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    lhs_star = np.sum(gradW**2, axis=1) / W
    need = lhs_star - eps * W**2
    k = int(np.argmax(need))
    E = max(0.0, float(need[k]))
    star_ok = E <= cap and bool(np.all(W > 0))
    if not np.all(W > 0):
        bad = int(np.argmin(W))
        notices.append(f"weight is not positive at {pts[bad].tolist()} (W = {W[bad]:.3e})")
    elif not star_ok:
        notices.append(f"growth condition fails at {pts[k].tolist()}: needs E_eps = {E:.3e}")
    constants = {"E_eps": E, "eps": eps}
    if shift is not None:
        constants["shift_C"] = shift
    members = []
    a = {}
    for mm in range(1, n + 1):
        best = 0.0
        for f in family:
            if f.is_zero():
                members.append({"f": f, "m": mm, "lhs": 0.0, "rhs": 0.0, "ratio": None})
                continue
            lhs = integrator.expect(lambda p, f=f, mm=mm: Wfun(p) ** mm * f.eval_array(p) ** 2)
            rhs_poly = f * f
            for kk in range(1, mm + 1):
                rhs_poly = rhs_poly + iterated_grad_sq(G, f, kk)
            rhs = integrator.expect(rhs_poly)
            ratio = lhs.mean / rhs.mean if rhs.mean > 0 else None
            if ratio is not None:
                best = max(best, ratio)
            members.append({"f": f, "m": mm, "lhs": lhs, "rhs": rhs, "ratio": ratio})
        a[mm] = best
        constants[f"a_{mm}"] = best
    for mem in members:
        if mem["ratio"] is not None:
            mem["margin"] = a[mem["m"]] * mem["rhs"].mean - mem["lhs"].mean
        else:
            mem["margin"] = 0.0
    gate = eps * a.get(1, 0.0) * n * n / 2
    return FitResult("inductive_bound", constants, min(m["margin"] for m in members) if members else None,
                     members, "(1/W)|grad W|^2 <= eps W^2 + E_eps and mu(W^m f^2) <= a_m mu(sum |nabla^k f|^2 + f^2)",
                     star_ok, passed=star_ok,
                     extras={"gate": gate, "gate_ok": gate < 1, "weight": weight,
                             "worst_point": pts[k].tolist(), "scan_points": int(len(pts))},
                     notices=notices)


# ---------------------------------------------------------------------------
# Hardy

def vanishes_on_center(G: CarnotGroup, f: Poly) -> bool:
    """True when f restricted to {x = 0} is identically zero (so f^2/|x|^2 is bounded)."""
    h = G.horizontal
    return all(any(e[:h]) for e in f.terms)


def hardy_check(G: CarnotGroup, pot: PotentialSpec, family: Sequence[Poly], integrator,
                C: float = 1.0, lam: float = 1e-2, form: str = "Q-1") -> FitResult:
    """Hardy bounds for mu.

    (i)  mu(f^2/|x|^2) <= 2C mu|grad f|^2 + (C/2) mu(f^2 |grad U|^2), C given;
    (ii) mu(f^2 W^(1/2)/N) <= C~ mu|grad f|^2 + D~ mu f^2, (C~, D~) fitted.
    """
    if not G.is_heisenberg:
        raise GroupKindError("hardy_check works with the Kaplan norm")
    F = Fields(G, pot)
    W, D_shift = hardy_w_profile(G, pot, form)
    h = G.horizontal
    members, notices = [], []
    lhs2, cols = [], []
    for f in family:
        if f.is_zero():
            members.append({"f": f, "lhs_i": 0.0, "rhs_i": 0.0, "margin_i": 0.0, "lhs_ii": 0.0})
            lhs2.append(0.0)
            cols.append((0.0, 0.0))
            continue
        if not vanishes_on_center(G, f):
            notices.append(f"rejected {f}: f^2/|x|^2 is not integrable near x = 0")
            continue

        def inv_x(p, f=f):
            r2 = np.sum(p[:, :h] ** 2, axis=1)
            fv = f.eval_array(p)
            out = np.zeros_like(fv)
            ok = r2 > 0
            out[ok] = fv[ok] ** 2 / r2[ok]
            return out

        def improved(p, f=f):
            N = group_norm_array(G, p)
            fv = f.eval_array(p)
            out = np.zeros_like(fv)
            ok = N > 0
            out[ok] = fv[ok] ** 2 * np.sqrt(W(N[ok])) / N[ok]
            return out

        def fgrad(p, f=f):
            return f.eval_array(p) ** 2 * F.gradsq_array(p)

        a, b, c, d, e = integrator.expect_many([inv_x, grad_sq(G, f), fgrad, improved, f * f])
        rhs_i = 2 * C * b.mean + 0.5 * C * c.mean
        members.append({"f": f, "lhs_i": a, "rhs_i": rhs_i, "margin_i": rhs_i - a.mean,
                        "lhs_ii": d, "dirichlet": b, "norm": e})
        lhs2.append(d.mean)
        cols.append((b.mean, e.mean))
    consts, margins, feas = fit_constants(np.array(lhs2), np.array(cols).reshape(len(cols), 2),
                                          ["C_tilde", "D_tilde"], lam)
    for mem, mg in zip(members, margins):
        mem["margin_ii"] = float(mg)
    margin_i = min((m["margin_i"] for m in members), default=None)
    ok = feas and (margin_i is None or margin_i >= 0)
    consts.update({"C": C, "D_shift": D_shift})
    return FitResult("hardy_check", consts, float(np.min(margins)) if len(margins) else None, members,
                     "Hardy bound with given C, and the improved weight W^(1/2)/N with fitted (C~, D~)",
                     feas, passed=ok, extras={"margin_i": margin_i, "form": form}, notices=notices)


# ---------------------------------------------------------------------------
# quadric example and Rockland terms

def eg3_star_bound(G: CarnotGroup, pot: PotentialSpec, family: Sequence[Poly], integrator,
                   A: float, C: float, n_tilde: float, D: float | None = None) -> FitResult:
    """Both sides of the star bound for U = (x^2 + y^2 + 2 z^2)^n / (2n).

    lhs = mu(f^2 (A/4) r^(2(n-1)) (1+z^2)^(1/2)),
    rhs = K mu|grad f|^2 + D mu f^2 with K = 4A^2/(A-1) * C/(n~-2)^2.
    With ``D=None`` the smallest D making every member feasible is reported.
    """
    if pot.family != "quadric_power":
        raise ValueError("eg3 needs a quadric_power interaction")
    if n_tilde is None:
        raise InvalidScenarioError("n_tilde has no default and must be set explicitly")
    if not A > 1:
        raise InvalidScenarioError("the star bound needs A > 1")
    if n_tilde == 2:
        raise InvalidScenarioError("n_tilde = 2 makes the Hardy constant infinite")
    n = pot.p["n"]
    K = 4 * A * A / (A - 1) * C / (n_tilde - 2) ** 2
    gate = 0.25 - 2 * C * A * A / (n_tilde - 2) ** 2

    def weight(p):
        r2 = p[:, 0] ** 2 + p[:, 1] ** 2 + 2 * p[:, 2] ** 2
        return 0.25 * A * r2 ** (n - 1) * np.sqrt(1 + p[:, 2] ** 2)

    rows = []
    for f in family:
        if f.is_zero():
            rows.append((f, Estimate(0.0), Estimate(0.0), Estimate(0.0)))
            continue
        lhs, dirichlet, norm = integrator.expect_many(
            [lambda p, f=f: f.eval_array(p) ** 2 * weight(p), grad_sq(G, f), f * f])
        rows.append((f, lhs, dirichlet, norm))
    D_min = 0.0
    for f, lhs, dirichlet, norm in rows:
        if norm.mean > 0:
            D_min = max(D_min, (lhs.mean - K * dirichlet.mean) / norm.mean)
    D_used = D_min if D is None else D
    members = []
    for f, lhs, dirichlet, norm in rows:
        rhs = K * dirichlet.mean + D_used * norm.mean
        members.append({"f": f, "lhs": lhs, "rhs": rhs, "margin": rhs - lhs.mean})
    margin = min((m["margin"] for m in members), default=None)
    ok = margin is None or margin >= -1e-12 * max(1.0, max(abs(m["rhs"]) for m in members))
    return FitResult("eg3_star_bound", {"K": K, "D": D_used, "D_min": D_min, "A": A, "C": C,
                                        "n_tilde": n_tilde}, margin, members,
                     "mu(f^2 (A/4) r^(2(n-1)) (1+z^2)^(1/2)) <= K mu|grad f|^2 + D mu f^2",
                     True, passed=ok, extras={"gate": gate, "gate_ok": gate > 0.125})


def rockland_terms(G: CarnotGroup, pot: PotentialSpec, family: Sequence[Poly], n: int, integrator,
                   lam: float = 1e-2) -> FitResult:
    """Fit mu(|X_j^m f|^2 |X_j^(2n-m) U|^2) <= b_m mu|R f|^2 + c_m mu f^2 for m = 0..2n-1."""
    U = pot.symbolic(G)
    if U is None:
        raise InvalidScenarioError("rockland_terms needs a polynomial interaction")
    R = rockland_op(G, n)
    gens = G.generators
    k = G.horizontal
    XU = {}
    for j in range(k):
        g = U
        for s in range(1, 2 * n + 1):
            g = gens[j].apply(g)
            XU[(j, s)] = g
    rf, nf, per_m = [], [], {m: [] for m in range(2 * n)}
    fam = [f for f in family if not f.is_zero()]
    for f in fam:
        Rf = R.apply(f)
        a, b = integrator.expect_many([Rf * Rf, f * f])
        rf.append(a.mean)
        nf.append(b.mean)
        Xf = {(j, 0): f for j in range(k)}
        for j in range(k):
            g = f
            for s in range(1, 2 * n):
                g = gens[j].apply(g)
                Xf[(j, s)] = g
        for m in range(2 * n):
            obs = sum((Xf[(j, m)] ** 2 * XU[(j, 2 * n - m)] ** 2 for j in range(k)), Poly.zero(G.dim))
            per_m[m].append(integrator.expect(obs).mean)
    constants, members = {}, []
    feasible, worst = True, math.inf
    cols = np.stack([rf, nf], axis=1) if fam else np.zeros((0, 2))
    for m in range(2 * n):
        c, margins, feas = fit_constants(np.array(per_m[m]), cols, [f"b_{m}", f"c_{m}"], lam)
        constants.update(c)
        feasible = feasible and feas
        if len(margins):
            worst = min(worst, float(np.min(margins)))
        for f, lhs, mg in zip(fam, per_m[m], margins):
            members.append({"f": f, "m": m, "lhs": lhs, "margin": float(mg)})
    return FitResult("rockland_terms", constants, None if worst == math.inf else worst, members,
                     "mu(|X_j^m f|^2 |X_j^(2n-m) U|^2) <= b_m mu|R f|^2 + c_m mu f^2",
                     feasible, passed=feasible and _feasible(None if worst == math.inf else worst,
                                                             max([1.0] + [abs(v) for m in per_m.values() for v in m])),
                     extras={"order": 2 * n, "norm_Rf": rf})
