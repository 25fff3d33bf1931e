"""Interaction families U with closed-form jets and a finite-difference oracle.

Every family that depends on a norm goes through the same one-dimensional
chain rule:  X_i U = g'(rho) X_i rho  and
X_j X_i U = g'(rho) X_j X_i rho + g''(rho) X_i rho X_j rho.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .group import (DELTA_SING, CarnotGroup, GroupKindError, SingularPointError,
                    kaplan_jet_array)
from .poly import Poly, monomial, parse_poly

FAMILIES = ("kaplan_power", "radial_cosine", "polar_log", "quadric_power",
            "dual_monomial", "polynomial")


class InvalidMeasureError(ValueError):
    """exp(-U) is not integrable for this parameterisation."""


@dataclass(frozen=True)
class PotentialSpec:
    family: str
    params: tuple = ()
    poly: Poly | None = field(default=None, compare=True)

    # -- constructors ---------------------------------------------------
    @classmethod
    def kaplan_power(cls, kappa: float) -> "PotentialSpec":
        if not kappa > 0:
            raise ValueError(f"kaplan_power needs kappa > 0, got {kappa}")
        return cls("kaplan_power", (("kappa", float(kappa)),))

    @classmethod
    def radial_cosine(cls, alpha: float, eps: float, omega: float, kappa: float,
                      norm: str = "euclidean") -> "PotentialSpec":
        if alpha < 0:
            raise ValueError(f"radial_cosine needs alpha >= 0, got {alpha}")
        if not 0 <= eps < 1:
            raise ValueError(f"radial_cosine needs eps in [0,1), got {eps}")
        if not (omega > 0 and kappa > 0):
            raise ValueError("radial_cosine needs omega > 0 and kappa > 0")
        if norm not in ("euclidean", "kaplan"):
            raise ValueError(f"unknown norm {norm!r}")
        return cls("radial_cosine", (("alpha", float(alpha)), ("eps", float(eps)),
                                     ("omega", float(omega)), ("kappa", float(kappa)),
                                     ("norm", norm)))

    @classmethod
    def polar_log(cls, eps: float) -> "PotentialSpec":
        if not 0 < eps < 1:
            raise ValueError(f"polar_log needs eps in (0,1), got {eps}")
        return cls("polar_log", (("eps", float(eps)),))

    @classmethod
    def quadric_power(cls, n: int) -> "PotentialSpec":
        if int(n) != n or n < 1:
            raise ValueError(f"quadric_power needs a positive integer n, got {n}")
        n = int(n)
        x, y, z = Poly.gens(3)
        s = x * x + y * y + (z * z).scale(2)
        return cls("quadric_power", (("n", n),), (s ** n).scale(Fraction(1, 2 * n)))

    @classmethod
    def dual_monomial(cls, alpha: Sequence[int], outer: str = "power", p: float = 2,
                      c: float = 1.0) -> "PotentialSpec":
        alpha = tuple(int(a) for a in alpha)
        if any(a < 0 for a in alpha) or not any(alpha):
            raise ValueError(f"invalid multi-index {alpha}")
        if outer not in ("power", "exp_power"):
            raise ValueError(f"unknown outer profile {outer!r}")
        return cls("dual_monomial", (("alpha", alpha), ("outer", outer), ("p", float(p)),
                                     ("c", float(c))))

    @classmethod
    def polynomial(cls, U: Poly) -> "PotentialSpec":
        return cls("polynomial", (), U)

    # -- accessors ------------------------------------------------------
    @property
    def p(self) -> dict:
        return dict(self.params)

    def symbolic(self, G: CarnotGroup) -> Poly | None:
        """The interaction as an exact polynomial when it is one."""
        if self.family in ("polynomial", "quadric_power"):
            return self.poly
        if self.family == "kaplan_power" and self.p["kappa"] == 4 and G.is_heisenberg:
            from .group import kaplan_quartic_poly
            return kaplan_quartic_poly(G)
        if self.family == "dual_monomial" and self.p["outer"] == "power":
            pw = self.p["p"]
            if pw == int(pw) and pw >= 0 and Fraction(self.p["c"]).limit_denominator(10**6) == self.p["c"]:
                t = _eta_monomial(G, self.p["alpha"])
                return (t ** int(pw)).scale(Fraction(self.p["c"]).limit_denominator(10**6))
        return None

    def check_group(self, G: CarnotGroup) -> None:
        fam = self.family
        if fam == "kaplan_power" and not G.is_heisenberg:
            raise GroupKindError("kaplan_power lives on a Heisenberg group")
        if fam == "radial_cosine":
            norm = self.p["norm"]
            if norm == "kaplan" and not G.is_heisenberg:
                raise GroupKindError("radial_cosine with the Kaplan norm needs a Heisenberg group")
            if norm == "euclidean" and G.kind != "euclidean":
                raise GroupKindError("radial_cosine with the Euclidean norm needs a Euclidean group")
        if fam == "polar_log" and not (G.kind == "euclidean" and G.n == 2):
            raise GroupKindError("polar_log lives on euclidean(2)")
        if fam == "quadric_power" and not (G.is_heisenberg and G.n == 1):
            raise GroupKindError("quadric_power lives on heisenberg(1)")
        if fam == "dual_monomial" and len(self.p["alpha"]) != G.horizontal:
            raise GroupKindError(f"multi-index {self.p['alpha']} does not match {G.horizontal} generators")
        if fam == "polynomial" and self.poly.dim != G.dim:
            raise GroupKindError("polynomial dimension does not match the group")

    def validate_measure(self, G: CarnotGroup) -> None:
        """Raise InvalidMeasureError when exp(-U) cannot be normalised."""
        self.check_group(G)
        fam = self.family
        if fam == "radial_cosine" and self.p["alpha"] <= 0:
            raise InvalidMeasureError("radial_cosine with alpha = 0 is bounded; exp(-U) is not integrable")
        if fam == "dual_monomial":
            raise InvalidMeasureError("dual_monomial interactions do not confine every coordinate")
        if fam == "polynomial":
            _check_polynomial_confining(self.poly)

    # -- serialisation --------------------------------------------------
    def to_dict(self) -> dict:
        d: dict = {"family": self.family}
        for k, v in self.params:
            d[k] = list(v) if isinstance(v, tuple) else v
        if self.family == "polynomial":
            d["poly"] = self.poly.to_str()
            d["dim"] = self.poly.dim
        return d

    @classmethod
    def from_dict(cls, d: Mapping, dim: int | None = None) -> "PotentialSpec":
        d = dict(d)
        fam = d.pop("family")
        if fam == "kaplan_power":
            return cls.kaplan_power(d["kappa"])
        if fam == "radial_cosine":
            return cls.radial_cosine(d["alpha"], d["eps"], d["omega"], d["kappa"],
                                     d.get("norm", "euclidean"))
        if fam == "polar_log":
            return cls.polar_log(d["eps"])
        if fam == "quadric_power":
            return cls.quadric_power(d["n"])
        if fam == "dual_monomial":
            return cls.dual_monomial(d["alpha"], d.get("outer", "power"), d.get("p", 2),
                                     d.get("c", 1.0))
        if fam == "polynomial":
            dim = d.get("dim", dim)
            if "names" in d:
                return cls.polynomial(parse_poly(d["poly"], names=d["names"]))
            return cls.polynomial(parse_poly(d["poly"], dim=dim))
        raise ValueError(f"unknown potential family {fam!r}")

    def __repr__(self):
        if self.family == "polynomial":
            return f"PotentialSpec(polynomial: {self.poly.to_str()})"
        return f"PotentialSpec({self.family}, {dict(self.params)})"


def _eta_monomial(G: CarnotGroup, alpha: Sequence[int]) -> Poly:
    return monomial(tuple(alpha) + (0,) * (G.dim - G.horizontal))


def _check_polynomial_confining(U: Poly, n_dirs: int = 64) -> None:
    rng = np.random.default_rng(12345)
    d = rng.normal(size=(n_dirs, U.dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    d = np.vstack([d, np.eye(U.dim), -np.eye(U.dim)])
    v1 = U.eval_array(10.0 * d)
    v2 = U.eval_array(100.0 * d)
    if not (np.all(v2 > v1) and np.all(v2 > 20.0)):
        raise InvalidMeasureError("polynomial interaction does not grow in every direction; "
                                  "exp(-U) is not integrable")


# ---------------------------------------------------------------------------
# jets

@dataclass(frozen=True)
class Jet2:
    """Second-order jet with a leading batch axis of length m."""

    u: np.ndarray
    grad_h: np.ndarray                     # (m, n1)
    hess_h: np.ndarray                     # (m, n1, n1), [.., j, i] = X_j X_i U
    center: tuple[np.ndarray, np.ndarray] | None = None   # (Z U, Z^2 U)

    @property
    def gradsq(self) -> np.ndarray:
        return np.sum(self.grad_h * self.grad_h, axis=-1)

    @property
    def lap(self) -> np.ndarray:
        return np.trace(self.hess_h, axis1=-2, axis2=-1)

    @property
    def hess_abs_sum(self) -> np.ndarray:
        return np.abs(self.hess_h).sum(axis=(-2, -1))

    def __getitem__(self, k) -> "Jet2":
        c = None if self.center is None else (self.center[0][k], self.center[1][k])
        return Jet2(self.u[k], self.grad_h[k], self.hess_h[k], c)


def _profile(pot: PotentialSpec):
    """(g, g', g'') for norm-based families."""
    p = pot.p
    if pot.family == "kaplan_power":
        k = p["kappa"]
        return (lambda r: r**k, lambda r: k * r ** (k - 1), lambda r: k * (k - 1) * r ** (k - 2))
    if pot.family == "radial_cosine":
        a, e, w, k = p["alpha"], p["eps"], p["omega"], p["kappa"]

        def g(r):
            return r**a * (1 + e * np.cos(w * r**k))

        def h(r):
            th = w * r**k
            return a * (1 + e * np.cos(th)) - e * w * k * r**k * np.sin(th)

        def g1(r):
            return r ** (a - 1) * h(r)

        def g2(r):
            th = w * r**k
            dh = (-a * e * w * k * r ** (k - 1) * np.sin(th)
                  - e * w * k * k * r ** (k - 1) * np.sin(th)
                  - e * w * w * k * k * r ** (2 * k - 1) * np.cos(th))
            return (a - 1) * r ** (a - 2) * h(r) + r ** (a - 1) * dh

        return g, g1, g2
    raise ValueError(f"{pot.family} has no radial profile")


def _outer(pot: PotentialSpec):
    p = pot.p
    pw, c = p["p"], p["c"]
    integer = pw == int(pw)

    def powr(t, q):
        if integer and q == int(q):
            return t ** int(q) if q >= 0 else np.where(t == 0, np.inf, t ** float(q))
        if np.any(t <= 0):
            raise SingularPointError("non-integer outer power needs eta^alpha > 0")
        return t**q

    if p["outer"] == "power":
        return (lambda t: c * powr(t, pw),
                lambda t: c * pw * powr(t, pw - 1) if pw != 0 else 0 * t,
                lambda t: c * pw * (pw - 1) * powr(t, pw - 2) if pw not in (0, 1) else 0 * t)

    def g(t):
        return np.exp(c * powr(t, pw))

    def g1(t):
        return g(t) * c * pw * powr(t, pw - 1) if pw != 0 else 0 * t

    def g2(t):
        if pw == 0:
            return 0 * t
        inner1 = c * pw * powr(t, pw - 1)
        inner2 = c * pw * (pw - 1) * powr(t, pw - 2) if pw != 1 else 0 * t
        return g(t) * (inner1**2 + inner2)

    return g, g1, g2


@functools.lru_cache(maxsize=256)
def _poly_jet_polys(G: CarnotGroup, U: Poly):
    X = G.generators
    k = G.horizontal
    grads = tuple(X[i].apply(U) for i in range(k))
    hess = tuple(tuple(X[j].apply(grads[i]) for i in range(k)) for j in range(k))
    center = None
    if G.center_fields:
        Z = G.center_fields[0]
        zu = Z.apply(U)
        center = (zu, Z.apply(zu))
    return grads, hess, center


def poly_jet_polys(G: CarnotGroup, U: Poly):
    """Exact symbolic first and second horizontal derivatives of U."""
    return _poly_jet_polys(G, U)


def _radial_euclidean(pts: np.ndarray, delta: float, strict: bool):
    r = np.linalg.norm(pts, axis=1)
    sing = r <= delta
    if strict and sing.any():
        k = int(np.argmax(sing))
        raise SingularPointError(f"point {pts[k].tolist()} is within {delta:g} of the origin")
    rs = np.where(sing, 1.0, r)
    d = pts.shape[1]
    grad = pts / rs[:, None]
    hess = (np.eye(d)[None] - grad[:, :, None] * grad[:, None, :]) / rs[:, None, None]
    return r, grad, hess, sing


def u_jet_array(G: CarnotGroup, pot: PotentialSpec, pts, delta_sing: float = DELTA_SING,
                strict: bool = True) -> Jet2:
    """Closed-form jets of U at an array of points (shape (m, dim))."""
    pot.check_group(G)
    pts = np.atleast_2d(np.asarray(pts, float))
    fam = pot.family
    if fam in ("polynomial", "quadric_power"):
        grads, hess, center = poly_jet_polys(G, pot.poly)
        u = pot.poly.eval_array(pts)
        g = np.stack([q.eval_array(pts) for q in grads], axis=1)
        H = np.stack([np.stack([q.eval_array(pts) for q in row], axis=1) for row in hess], axis=1)
        c = None if center is None else (center[0].eval_array(pts), center[1].eval_array(pts))
        return Jet2(u, g, H, c)
    if fam == "kaplan_power" or (fam == "radial_cosine" and pot.p["norm"] == "kaplan"):
        J = kaplan_jet_array(G, pts, delta_sing, strict)
        g0, g1, g2 = _profile(pot)
        rho = np.where(J.singular, 1.0, J.value)
        d1, d2 = g1(rho), g2(rho)
        grad = d1[:, None] * J.grad_h
        hess = d1[:, None, None] * J.hess_h + d2[:, None, None] * J.grad_h[:, None, :] * J.grad_h[:, :, None]
        zn, zzn = J.z_jet
        center = (d1 * zn, d1 * zzn + d2 * zn * zn)
        u = np.where(J.singular, g0(np.maximum(J.value, 0.0) + 0.0), g0(rho))
        return Jet2(u, grad, hess, center)
    if fam == "radial_cosine":
        r, rg, rh, sing = _radial_euclidean(pts, delta_sing, strict)
        g0, g1, g2 = _profile(pot)
        rs = np.where(sing, 1.0, r)
        d1, d2 = g1(rs), g2(rs)
        grad = d1[:, None] * rg
        hess = d1[:, None, None] * rh + d2[:, None, None] * rg[:, None, :] * rg[:, :, None]
        return Jet2(g0(rs), grad, hess, None)
    if fam == "polar_log":
        return _polar_log_cartesian(pot, pts, delta_sing, strict)
    if fam == "dual_monomial":
        t_poly = _eta_monomial(G, pot.p["alpha"])
        grads, hess, _ = poly_jet_polys(G, t_poly)
        t = t_poly.eval_array(pts)
        tg = np.stack([q.eval_array(pts) for q in grads], axis=1)
        tH = np.stack([np.stack([q.eval_array(pts) for q in row], axis=1) for row in hess], axis=1)
        g0, g1, g2 = _outer(pot)
        d1, d2 = np.broadcast_to(g1(t), t.shape), np.broadcast_to(g2(t), t.shape)
        grad = d1[:, None] * tg
        H = d1[:, None, None] * tH + d2[:, None, None] * tg[:, None, :] * tg[:, :, None]
        center = None
        if G.center_fields:
            zero = np.zeros(len(t))
            center = (zero, zero.copy())
        return Jet2(np.broadcast_to(g0(t), t.shape).astype(float), grad, H, center)
    raise ValueError(f"unknown family {fam}")


def _polar_log_cartesian(pot: PotentialSpec, pts: np.ndarray, delta: float, strict: bool) -> Jet2:
    """U = exp(a(phi) log r),  a(phi) = (1 + eps cos phi) / (1 - eps)."""
    e = pot.p["eps"]
    x, y = pts[:, 0], pts[:, 1]
    r2 = x * x + y * y
    sing = r2 <= delta * delta
    if strict and sing.any():
        k = int(np.argmax(sing))
        raise SingularPointError(f"point {pts[k].tolist()} is within {delta:g} of the origin")
    r2 = np.where(sing, 1.0, r2)
    phi = np.arctan2(y, x)
    logr = 0.5 * np.log(r2)
    a = (1 + e * np.cos(phi)) / (1 - e)
    a1 = -e * np.sin(phi) / (1 - e)
    a2 = -e * np.cos(phi) / (1 - e)
    # derivatives of phi and log r
    phi_g = np.stack([-y / r2, x / r2], axis=1)
    lr_g = np.stack([x / r2, y / r2], axis=1)
    r4 = r2 * r2
    phi_h = np.empty((len(x), 2, 2))
    phi_h[:, 0, 0] = 2 * x * y / r4
    phi_h[:, 1, 1] = -2 * x * y / r4
    phi_h[:, 0, 1] = phi_h[:, 1, 0] = (y * y - x * x) / r4
    lr_h = np.empty((len(x), 2, 2))
    lr_h[:, 0, 0] = (y * y - x * x) / r4
    lr_h[:, 1, 1] = (x * x - y * y) / r4
    lr_h[:, 0, 1] = lr_h[:, 1, 0] = -2 * x * y / r4
    a_g = a1[:, None] * phi_g
    a_h = a2[:, None, None] * phi_g[:, :, None] * phi_g[:, None, :] + a1[:, None, None] * phi_h
    L_g = a_g * logr[:, None] + a[:, None] * lr_g
    L_h = (a_h * logr[:, None, None] + a_g[:, :, None] * lr_g[:, None, :]
           + lr_g[:, :, None] * a_g[:, None, :] + a[:, None, None] * lr_h)
    U = np.exp(a * logr)
    grad = U[:, None] * L_g
    hess = U[:, None, None] * (L_g[:, :, None] * L_g[:, None, :] + L_h)
    return Jet2(U, grad, hess, None)


def u_jet(G: CarnotGroup, pot: PotentialSpec, p, delta_sing: float = DELTA_SING) -> Jet2:
    return u_jet_array(G, pot, np.asarray(p, float)[None, :], delta_sing)[0]


def u_value_array(G: CarnotGroup, pot: PotentialSpec, pts) -> np.ndarray:
    """U at points; total on the singular sets (norm families are continuous there)."""
    pts = np.atleast_2d(np.asarray(pts, float))
    fam = pot.family
    if fam in ("polynomial", "quadric_power"):
        return pot.poly.eval_array(pts)
    if fam == "kaplan_power" or (fam == "radial_cosine" and pot.p["norm"] == "kaplan"):
        h = 2 * G.n
        r2 = np.einsum("ij,ij->i", pts[:, :h], pts[:, :h])
        N = (r2 * r2 + 16.0 * pts[:, h] ** 2) ** 0.25
        return _profile(pot)[0](N)
    if fam == "radial_cosine":
        return _profile(pot)[0](np.linalg.norm(pts, axis=1))
    if fam == "polar_log":
        e = pot.p["eps"]
        r = np.hypot(pts[:, 0], pts[:, 1])
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        with np.errstate(divide="ignore"):
            return np.where(r > 0, r ** ((1 + e * np.cos(phi)) / (1 - e)), 0.0)
    if fam == "dual_monomial":
        t = _eta_monomial(G, pot.p["alpha"]).eval_array(pts)
        return np.broadcast_to(_outer(pot)[0](t), t.shape).astype(float)
    raise ValueError(f"unknown family {fam}")


# ---------------------------------------------------------------------------
# finite-difference oracle

def field_vectors(G: CarnotGroup, pts: np.ndarray) -> np.ndarray:
    """Coefficient vectors of the generators at each point: shape (m, n1, dim)."""
    pts = np.atleast_2d(pts)
    m = pts.shape[0]
    out = np.zeros((m, G.horizontal, G.dim))
    for i, X in enumerate(G.generators):
        for a, c in X.terms.items():
            if sum(a) != 1:
                raise ValueError("generators must be first-order fields")
            k = a.index(1)
            out[:, i, k] = c.eval_array(pts)
    return out


def fd_jet_fn(G: CarnotGroup, func: Callable[[np.ndarray], np.ndarray], p, h: float = 1e-4) -> Jet2:
    """Central differences along the fields; second order by nested differencing."""
    p = np.asarray(p, float)
    k = G.horizontal

    def first(q: np.ndarray) -> np.ndarray:
        C = field_vectors(G, q[None])[0]
        plus = q[None, :] + h * C
        minus = q[None, :] - h * C
        return (func(plus) - func(minus)) / (2 * h)

    grad = first(p)
    C = field_vectors(G, p[None])[0]
    hess = np.empty((k, k))
    for j in range(k):
        fp = first(p + h * C[j])
        fm = first(p - h * C[j])
        hess[j, :] = (fp - fm) / (2 * h)
    center = None
    if G.center_fields:
        e = np.zeros(G.dim)
        e[-1] = h
        vals = func(np.stack([p + e, p, p - e]))
        center = (np.array([(vals[0] - vals[2]) / (2 * h)]),
                  np.array([(vals[0] - 2 * vals[1] + vals[2]) / h**2]))
    u = func(p[None])
    return Jet2(np.asarray(u, float), grad[None], hess[None], center)


def fd_jet(G: CarnotGroup, pot: PotentialSpec, p, h: float = 1e-4,
           delta_sing: float = DELTA_SING) -> Jet2:
    pot.check_group(G)
    p = np.asarray(p, float)
    if pot.family in ("kaplan_power", "radial_cosine", "polar_log"):
        reach = 3 * h * (1 + np.abs(p).max())
        if _norm_of(G, pot, p) <= delta_sing + reach:
            raise SingularPointError(f"finite-difference stencil at {p.tolist()} touches the singular set")
    J = fd_jet_fn(G, lambda q: u_value_array(G, pot, q), p, h)
    return J[0]


def _norm_of(G: CarnotGroup, pot: PotentialSpec, p: np.ndarray) -> float:
    if pot.family == "kaplan_power" or (pot.family == "radial_cosine" and pot.p["norm"] == "kaplan"):
        from .group import kaplan_norm
        return kaplan_norm(G, p)
    return float(np.linalg.norm(p))


# ---------------------------------------------------------------------------
# derived potentials

def v_potential_array(G: CarnotGroup, pot: PotentialSpec, pts, strict: bool = True) -> np.ndarray:
    J = u_jet_array(G, pot, pts, strict=strict)
    return 0.25 * J.gradsq - 0.5 * J.lap


def v_potential(G: CarnotGroup, pot: PotentialSpec, p) -> float:
    return float(v_potential_array(G, pot, np.asarray(p, float)[None])[0])


def positivity_shift(G: CarnotGroup, pot: PotentialSpec, pts) -> float:
    """C = 1 + max(0, -min V) over the grid, so that V + C >= 1 there."""
    v = v_potential_array(G, pot, pts, strict=False)
    v = v[np.isfinite(v)]
    return 1.0 + max(0.0, -float(v.min())) if v.size else 1.0


@dataclass(frozen=True)
class VZResult:
    jet_route: float
    closed_form: float | None


def v_z_potential(G: CarnotGroup, pot: PotentialSpec, p) -> VZResult:
    """|Z U|^2 / 4 - Z^2 U / 2 by the jet route, plus the closed form for N^kappa."""
    if not G.center_fields:
        raise GroupKindError("V_Z needs a centre field")
    J = u_jet(G, pot, p)
    zu, zzu = J.center
    jet = float(0.25 * zu * zu - 0.5 * zzu)
    closed = None
    if pot.family == "kaplan_power":
        k = pot.p["kappa"]
        from .group import kaplan_norm
        N = kaplan_norm(G, p)
        z = float(p[-1])
        closed = 16 * k * N ** (k - 4) * ((k * N**k + 6 - 2 * (k - 1)) * z * z / N**4 - 0.25)
    return VZResult(jet, closed)


def polar_jet(pot: PotentialSpec, r: float, phi: float) -> tuple[float, float]:
    """(|grad U|^2, Delta U) for polar_log in polar coordinates."""
    if pot.family != "polar_log":
        raise ValueError("polar_jet is defined for polar_log")
    if not r > 0:
        raise ValueError(f"r must be positive, got {r}")
    e = pot.p["eps"]
    U = r ** ((1 + e * math.cos(phi)) / (1 - e))
    lr = math.log(r)
    base = U / ((1 - e) ** 2 * r * r)
    gradsq = U * base * ((1 + e * math.cos(phi)) ** 2 + e * e * math.sin(phi) ** 2 * lr * lr)
    lap = base * ((1 + e * math.cos(phi)) ** 2 + (e * math.sin(phi) * lr) ** 2
                  - e * (1 - e) * math.cos(phi) * lr)
    return gradsq, lap
