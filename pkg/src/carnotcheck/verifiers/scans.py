"""Pointwise scans: Adams ratios, critical points of radial potentials, weight exponents."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ..group import CarnotGroup, GroupKindError, dilate, kaplan_norm_array
from ..potentials import (PotentialSpec, _profile, fd_jet, poly_jet_polys, u_jet,
                          u_jet_array)
from .common import group_norm_array
from .reports import ScanReport

DEFAULT_SHELLS = (10.0, 100.0, 1000.0, 10000.0)


def adams_ratio(J, eps: float) -> np.ndarray:
    """sum_{|alpha|=2} |nabla^alpha U| / (1 + |nabla U|)^(2 - eps)."""
    return J.hess_abs_sum / (1.0 + np.sqrt(J.gradsq)) ** (2.0 - eps)


def _path_points(G: CarnotGroup, path: str, shells: Sequence[float], box: dict | None):
    if path == "z_axis":
        pts = np.zeros((len(shells), G.dim))
        pts[:, -1] = shells
        return np.asarray(shells, float), pts
    if path == "radial":
        pts = np.zeros((len(shells), G.dim))
        pts[:, 0] = shells
        return np.asarray(shells, float), pts
    if path == "box":
        if not box:
            raise ValueError("box path needs lo, hi and nodes")
        lo, hi, m = box["lo"], box["hi"], box.get("nodes", 11)
        lo = [lo] * G.dim if np.isscalar(lo) else lo
        hi = [hi] * G.dim if np.isscalar(hi) else hi
        axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([q.ravel() for q in mesh], axis=1)
        return np.arange(len(pts), dtype=float), pts
    raise ValueError(f"unknown scan path {path!r}")


def _scan_rows(G: CarnotGroup, pot: PotentialSpec, ts, pts, eps: float):
    J = u_jet_array(G, pot, pts, strict=False)
    ratio = adams_ratio(J, eps)
    gnorm = np.sqrt(J.gradsq)
    rows, flags = [], []
    for k in range(len(pts)):
        row = {"t": float(ts[k])}
        for i in range(G.dim):
            row[f"x{i + 1}"] = float(pts[k, i])
        if not np.isfinite(ratio[k]):
            row.update(ratio=None, grad_norm=None, hess_abs_sum=None, lap=None, singular=True)
            flags.append(f"singular point {pts[k].tolist()}")
        else:
            row.update(ratio=float(ratio[k]), grad_norm=float(gnorm[k]),
                       hess_abs_sum=float(J.hess_abs_sum[k]), lap=float(J.lap[k]), singular=False)
        rows.append(row)
    cols = ["t"] + [f"x{i + 1}" for i in range(G.dim)] + ["ratio", "grad_norm", "hess_abs_sum",
                                                          "lap", "singular"]
    return rows, cols, flags, ratio


def _growth(ratio: np.ndarray) -> list:
    out = []
    for a, b in zip(ratio[:-1], ratio[1:]):
        out.append(float(b / a) if np.isfinite(a) and np.isfinite(b) and a != 0 else None)
    return out


def adams_scan(G: CarnotGroup, pot: PotentialSpec, path: str = "z_axis", eps: float = 0.0,
               shells: Sequence[float] = DEFAULT_SHELLS, box: dict | None = None) -> ScanReport:
    """Adams ratio along a path; growth factors between consecutive shells."""
    pot.check_group(G)
    ts, pts = _path_points(G, path, shells, box)
    rows, cols, flags, ratio = _scan_rows(G, pot, ts, pts, eps)
    growth = _growth(ratio) if path != "box" else []
    for r, g in zip(rows[1:], growth):
        r["growth"] = g
    if path != "box":
        rows[0]["growth"] = None
        cols.append("growth")
    finite = np.where(np.isfinite(ratio), ratio, -np.inf)
    k = int(np.argmax(finite))
    summary = {"path": path, "eps": eps, "max_ratio": float(ratio[k]) if np.isfinite(ratio[k]) else None,
               "argmax": pts[k].tolist(), "growth": growth}
    return ScanReport("adams_scan", cols, rows, summary, flags)


def adams_dual_scan(G: CarnotGroup, pot: PotentialSpec, eps: float = 0.5,
                    decades: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
                    path: str = "hyperplane", box: dict | None = None) -> ScanReport:
    """Adams ratio for a dual-monomial interaction while a coordinate eta_j -> 0.

    Along the default path the shrinking coordinate is the first one used by
    alpha, and a second coordinate compensates so that eta^alpha stays 1.
    """
    if pot.family != "dual_monomial":
        raise ValueError("adams_dual_scan needs a dual_monomial interaction")
    pot.check_group(G)
    alpha = pot.p["alpha"]
    if path == "box":
        ts, pts = _path_points(G, "box", (), box)
    else:
        used = [i for i, a in enumerate(alpha) if a]
        j = used[0]
        pts = np.zeros((len(decades), G.dim))
        pts[:, :G.horizontal] = 1.0
        pts[:, j] = decades
        if len(used) > 1:
            k = used[1]
            pts[:, k] = np.asarray(decades, float) ** (-alpha[j] / alpha[k])
        ts = np.asarray(decades, float)
    rows, cols, flags, ratio = _scan_rows(G, pot, ts, pts, eps)
    summary = {"path": path, "eps": eps, "alpha": list(alpha)}
    if path != "box":
        growth = _growth(ratio)
        summary["growth"] = growth
        for r, g in zip(rows, [None] + growth):
            r["growth"] = g
        cols.append("growth")
    U = pot.symbolic(G)
    if U is not None:
        _, hess, _ = poly_jet_polys(G, U)
        zero_rows = [j for j, row in enumerate(hess) if all(q.is_zero() for q in row)]
        summary["zero_hessian_rows"] = [j + 1 for j in zero_rows]
    finite = ratio[np.isfinite(ratio)]
    summary["max_ratio"] = float(finite.max()) if finite.size else None
    return ScanReport("adams_dual_scan", cols, rows, summary, flags)


# ---------------------------------------------------------------------------
# radial potentials: critical points with large Laplacian

def eg2_adams_failure(G: CarnotGroup, pot: PotentialSpec, shells: Sequence[int] = (10, 100, 1000),
                      grad_tol: float = 1e-3, samples_per_shell: int = 4000) -> ScanReport:
    """Locate zeros of g'(r) in the shells [2 pi k, 2 pi (k+1)] and record Delta U there.

    At such points |nabla U| vanishes while Delta U keeps growing with both
    signs, so no bound of Delta U by the gradient is possible.
    """
    if pot.family != "radial_cosine":
        raise ValueError("eg2 needs a radial_cosine interaction")
    pot.check_group(G)
    _, g1, _ = _profile(pot)
    rows, flags = [], []
    shell_summary = []
    for k in shells:
        a, b = 2 * math.pi * k, 2 * math.pi * (k + 1)
        r = np.linspace(a, b, samples_per_shell)
        v = g1(r)
        idx = np.nonzero(np.sign(v[:-1]) * np.sign(v[1:]) < 0)[0]
        pos, neg = [], []
        for i in idx:
            root = brentq(g1, r[i], r[i + 1], xtol=1e-15 * r[i], rtol=4 * np.finfo(float).eps)
            # along the first axis both the Euclidean and the Kaplan norm equal x_1
            p = np.zeros(G.dim)
            p[0] = root
            J = u_jet(G, pot, p)
            gn = float(np.sqrt(J.gradsq))
            lap = float(J.lap)
            if gn >= grad_tol:
                continue
            (pos if lap > 0 else neg).append(abs(lap))
            rows.append({"shell": k, "r": float(root), "grad_norm": gn, "lap": lap,
                         "sign": 1 if lap > 0 else -1})
        if not pos or not neg:
            flags.append(f"shell k={k}: near-critical points of both signs not found")
        shell_summary.append({"shell": k, "n_points": len(pos) + len(neg),
                              "n_pos": len(pos), "n_neg": len(neg),
                              "max_abs_lap_pos": max(pos) if pos else None,
                              "max_abs_lap_neg": max(neg) if neg else None})
    both = all(s["n_pos"] and s["n_neg"] for s in shell_summary)
    mono = both and all(
        b[key] > a[key] for a, b in zip(shell_summary, shell_summary[1:])
        for key in ("max_abs_lap_pos", "max_abs_lap_neg"))
    summary = {"shells": shell_summary, "both_signs": both, "monotone_growth": mono}
    cols = ["shell", "r", "grad_norm", "lap", "sign"]
    return ScanReport("eg2_adams_failure", cols, rows, summary, flags, passed=both and mono)


# ---------------------------------------------------------------------------
# improved Hardy weight

def hardy_w_profile(G: CarnotGroup, pot: PotentialSpec, form: str = "Q-1"):
    """W(N) = (U'^2/4 - U''/2) - c U'/(2N) + D with the smallest D >= 0 making W >= 0."""
    if not G.is_heisenberg:
        raise GroupKindError("the improved Hardy weight is built on the Kaplan norm")
    if pot.family not in ("kaplan_power", "radial_cosine") or (
            pot.family == "radial_cosine" and pot.p["norm"] != "kaplan"):
        raise ValueError("the improved Hardy weight needs U = U(N)")
    _, g1, g2 = _profile(pot)
    c = G.laplacian_constant(form)

    def w0(N):
        N = np.asarray(N, float)
        return 0.25 * g1(N) ** 2 - 0.5 * g2(N) - 0.5 * c * g1(N) / N

    grid = np.logspace(-6, 6, 4001)
    vals = w0(grid)
    if not np.all(np.isfinite(vals)):
        raise ValueError("W is not finite on (0, inf)")
    if vals[0] < vals[1] and vals[0] < 0 and w0(1e-9) < vals[0]:
        raise ValueError("W is unbounded below as N -> 0; no shift D exists")
    k = int(np.argmin(vals))
    lo, hi = np.log(grid[max(k - 1, 0)]), np.log(grid[min(k + 1, len(grid) - 1)])
    res = minimize_scalar(lambda s: float(w0(np.exp(s))), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    wmin = min(float(vals.min()), float(res.fun))
    D = max(0.0, -wmin) * (1 + 1e-12)

    def W(N):
        return np.maximum(w0(N) + D, 0.0)

    return W, D


def hardy_weight_scan(G: CarnotGroup, pot: PotentialSpec, shells: Sequence[float] = (10.0, 31.6227766, 100.0, 316.227766, 1000.0),
                      direction: Sequence[float] | None = None, form: str = "Q-1",
                      slope_tol: float = 0.05) -> ScanReport:
    """W^(1/2)/N along dilates of a point; the log-log slope is the growth exponent."""
    W, D = hardy_w_profile(G, pot, form)
    p0 = np.asarray(direction if direction is not None else np.ones(G.dim), float)
    p0 = dilate(G, 1.0 / float(kaplan_norm_array(G, p0[None])[0]), p0)
    rows = []
    Ns, vals = [], []
    for s in shells:
        p = dilate(G, float(s), p0)
        N = float(kaplan_norm_array(G, np.asarray(p)[None])[0])
        val = float(np.sqrt(W(N)) / N)
        Ns.append(N)
        vals.append(val)
        row = {"t": float(s), "N": N, "weight": val}
        rows.append(row)
    slope = float(np.polyfit(np.log(Ns), np.log(vals), 1)[0])
    summary = {"slope": slope, "D": D, "form": form}
    passed = None
    if pot.family == "kaplan_power":
        summary["expected_slope"] = pot.p["kappa"] - 2
        summary["slope_tol"] = slope_tol
        passed = abs(slope - summary["expected_slope"]) <= slope_tol
    return ScanReport("hardy_weight_scan", ["t", "N", "weight"], rows, summary, passed=passed)


# ---------------------------------------------------------------------------
# jets vs finite differences

def jet_oracle(G: CarnotGroup, pot: PotentialSpec, n_points: int = 100, n_range=(0.5, 10.0),
               h: float = 1e-4, seed: int = 0, tol1: float = 1e-6, tol2: float = 1e-4) -> ScanReport:
    """Closed-form jets against central differences at random points with norm in ``n_range``.

    Errors are relative to the largest entry of the jet being compared, floored at 1 so
    that points where the jet nearly vanishes are judged on absolute error.
    """
    pot.check_group(G)
    rng = np.random.default_rng(seed)
    w = np.array(G.weights(), float)
    # non-integer outer powers are only defined where eta^alpha > 0: sample the positive orthant
    positive = pot.family == "dual_monomial" and float(pot.p["p"]) != int(pot.p["p"])
    rows = []
    worst1 = worst2 = 0.0
    for k in range(n_points):
        q = rng.normal(size=G.dim)
        if positive:
            q[:G.horizontal] = np.abs(q[:G.horizontal]) + 0.1
        N = float(group_norm_array(G, q[None])[0])
        target = rng.uniform(*n_range)
        p = q * (target / N) ** w
        J = u_jet(G, pot, p)
        F = fd_jet(G, pot, p, h)
        e1 = float(np.max(np.abs(J.grad_h - F.grad_h)) / max(np.max(np.abs(J.grad_h)), 1.0))
        e2 = float(np.max(np.abs(J.hess_h - F.hess_h)) / max(np.max(np.abs(J.hess_h)), 1.0))
        worst1, worst2 = max(worst1, e1), max(worst2, e2)
        row = {"t": float(k), "norm": target, "err_first": e1, "err_second": e2}
        if J.center is not None:
            scale = max(abs(float(J.center[1])), abs(float(J.center[0])) / target, 1.0 / target)
            row["err_center"] = float(max(abs(J.center[0] - F.center[0]) / max(abs(float(J.center[0])), 1.0 / target),
                                          abs(J.center[1] - F.center[1]) / scale))
        rows.append(row)
    cols = ["t", "norm", "err_first", "err_second"] + (["err_center"] if "err_center" in rows[0] else [])
    summary = {"max_err_first": worst1, "max_err_second": worst2, "tol_first": tol1, "tol_second": tol2}
    return ScanReport("jet_oracle", cols, rows, summary, passed=worst1 <= tol1 and worst2 <= tol2)
