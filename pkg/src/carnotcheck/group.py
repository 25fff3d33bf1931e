"""Stratified groups in exponential coordinates: Heisenberg and Euclidean.

Coordinates are ordered first stratum then centre, ``(x_1, ..., x_2n, z)`` on
the Heisenberg group.  The canonical generators are

    X_i = d/dx_i + ((-1)^i / 2) x_{2n-i+1} d/dz,      i = 1..2n,

and ``convention="alt"`` flips the sign of the vertical part, which gives the
presentation ``X = d_x + y/2 d_z, Y = d_y - x/2 d_z`` on H^1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .diffop import DiffOp
from .poly import Poly

DELTA_SING = 1e-8


class SingularPointError(ValueError):
    """Raised when a jet is requested too close to the norm's singular set."""


class GroupKindError(ValueError):
    pass


@dataclass(frozen=True)
class CarnotGroup:
    kind: str
    n: int
    strata_dims: tuple[int, ...]
    generators: tuple[DiffOp, ...]
    center_fields: tuple[DiffOp, ...]
    convention: str = "standard"
    names: tuple[str, ...] = field(default=())

    @property
    def dim(self) -> int:
        return sum(self.strata_dims)

    @property
    def hom_dim(self) -> int:
        return sum((j + 1) * d for j, d in enumerate(self.strata_dims))

    @property
    def horizontal(self) -> int:
        return self.strata_dims[0]

    @property
    def step(self) -> int:
        return len(self.strata_dims)

    @property
    def is_heisenberg(self) -> bool:
        return self.kind == "heisenberg"

    def weights(self) -> tuple[int, ...]:
        """Dilation weight of each coordinate."""
        out: list[int] = []
        for j, d in enumerate(self.strata_dims):
            out += [j + 1] * d
        return tuple(out)

    def partner(self, i: int) -> int:
        """0-based index of x_{2n-i+1} for 0-based horizontal index i."""
        return 2 * self.n - 1 - i

    def sign(self, i: int) -> int:
        """Sign of the vertical part of X_{i+1} (0-based i), convention included."""
        s = -1 if (i + 1) % 2 else 1
        return -s if self.convention == "alt" else s

    def laplacian_constant(self, form: str = "Q-1") -> int:
        """Constant c in  Delta N = c |grad N|^2 / N  for the Kaplan norm.

        ``"n+2m-1"`` counts n horizontal and m vertical coordinates; on the
        Heisenberg group both forms equal 2n+1.
        """
        if form == "Q-1":
            return self.hom_dim - 1
        if form == "n+2m-1":
            return self.horizontal + 2 * (self.dim - self.horizontal) - 1
        raise ValueError(f"unknown form {form!r}")

    def __repr__(self):
        return f"CarnotGroup({self.kind}({self.n}), Q={self.hom_dim}, convention={self.convention})"


def make_group(kind: str, n: int, convention: str = "standard") -> CarnotGroup:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"invalid dimension n={n!r}; need a positive integer")
    n = int(n)
    if convention not in ("standard", "alt"):
        raise ValueError(f"unknown convention {convention!r}")
    if kind == "euclidean":
        dim = n
        gens = tuple(DiffOp.partial(dim, i) for i in range(dim))
        names = ("x",) if n == 1 else ("x", "y") if n == 2 else tuple(f"x{i + 1}" for i in range(n))
        return CarnotGroup("euclidean", n, (n,), gens, (), convention, names)
    if kind == "heisenberg":
        dim = 2 * n + 1
        z = dim - 1
        proto = CarnotGroup("heisenberg", n, (2 * n, 1), (), (), convention)
        gens = []
        for i in range(2 * n):
            coeff = Poly.var(dim, proto.partner(i)).scale(Fraction(proto.sign(i), 2))
            gens.append(DiffOp.partial(dim, i) + DiffOp.partial(dim, z).lmul(coeff))
        names = ("x", "y", "z") if n == 1 else tuple(f"x{i + 1}" for i in range(2 * n)) + ("z",)
        return CarnotGroup("heisenberg", n, (2 * n, 1), tuple(gens),
                           (DiffOp.partial(dim, z),), convention, names)
    raise GroupKindError(f"unknown group kind {kind!r}")


def _check_point(G: CarnotGroup, p) -> None:
    if len(p) != G.dim:
        raise ValueError(f"point has {len(p)} coordinates; group dimension is {G.dim}")


def _exact(p) -> bool:
    return all(isinstance(v, (int, Fraction)) for v in p)


def symplectic_form(G: CarnotGroup, x: Sequence, xp: Sequence):
    """<Lambda x, x'> matching the generator convention of ``G``.

    ``Lambda`` pairs x_i with x_{2n-i+1}; for H^1 in the standard convention
    this is [[0, -1], [1, 0]].
    """
    total = 0
    for i in range(2 * G.n):
        j = G.partner(i)
        # (Lambda x)_i = sign_i x_{i'}, which reproduces the d/dz parts of the fields
        total = total + G.sign(i) * x[j] * xp[i]
    return total


def group_product(G: CarnotGroup, p: Sequence, q: Sequence):
    _check_point(G, p)
    _check_point(G, q)
    if G.kind == "euclidean":
        if _exact(p) and _exact(q):
            return tuple(Fraction(a) + Fraction(b) for a, b in zip(p, q))
        return np.asarray(p, float) + np.asarray(q, float)
    h = 2 * G.n
    if _exact(p) and _exact(q):
        p = [Fraction(v) for v in p]
        q = [Fraction(v) for v in q]
        z = p[h] + q[h] + symplectic_form(G, p[:h], q[:h]) / 2
        return tuple(a + b for a, b in zip(p[:h], q[:h])) + (z,)
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    out = p + q
    out[h] = p[h] + q[h] + 0.5 * symplectic_form(G, p[:h], q[:h])
    return out


def group_inverse(G: CarnotGroup, p: Sequence):
    _check_point(G, p)
    if _exact(p):
        return tuple(-Fraction(v) for v in p)
    return -np.asarray(p, float)


def dilate(G: CarnotGroup, lam, p: Sequence):
    if not lam > 0:
        raise ValueError(f"dilation factor must be positive, got {lam!r}")
    _check_point(G, p)
    w = G.weights()
    if _exact(p) and isinstance(lam, (int, Fraction)):
        lam = Fraction(lam)
        return tuple(Fraction(v) * lam**k for v, k in zip(p, w))
    return np.asarray(p, float) * np.asarray([float(lam) ** k for k in w])


def _require_heisenberg(G: CarnotGroup):
    if not G.is_heisenberg:
        raise GroupKindError(f"Kaplan norm needs a Heisenberg group, got {G.kind}")


def kaplan_quartic_poly(G: CarnotGroup) -> Poly:
    """K = |x|^4 + 16 z^2 as an exact polynomial."""
    _require_heisenberg(G)
    x = Poly.gens(G.dim)
    r2 = sum((x[i] * x[i] for i in range(2 * G.n)), Poly.zero(G.dim))
    return r2 * r2 + (x[-1] * x[-1]).scale(16)


def kaplan_quartic(G: CarnotGroup, p: Sequence):
    _require_heisenberg(G)
    _check_point(G, p)
    h = 2 * G.n
    if _exact(p):
        p = [Fraction(v) for v in p]
        r2 = sum(v * v for v in p[:h])
        return r2 * r2 + 16 * p[h] * p[h]
    p = np.asarray(p, float)
    r2 = float(np.dot(p[:h], p[:h]))
    return r2 * r2 + 16.0 * p[h] ** 2


def kaplan_norm(G: CarnotGroup, p: Sequence) -> float:
    return float(kaplan_quartic(G, p)) ** 0.25


def kaplan_norm_array(G: CarnotGroup, pts: np.ndarray) -> np.ndarray:
    _require_heisenberg(G)
    pts = np.atleast_2d(np.asarray(pts, float))
    h = 2 * G.n
    r2 = np.einsum("ij,ij->i", pts[:, :h], pts[:, :h])
    return (r2 * r2 + 16.0 * pts[:, h] ** 2) ** 0.25


@dataclass(frozen=True)
class HomNormJet:
    """Kaplan-norm jets.  Arrays carry a leading batch axis of length m."""

    value: np.ndarray          # (m,)
    grad_h: np.ndarray         # (m, n1)       X_i N
    hess_h: np.ndarray         # (m, n1, n1)   [.., j, i] = X_j X_i N
    z_jet: tuple[np.ndarray, np.ndarray]   # (Z N, Z^2 N)
    singular: np.ndarray       # (m,) bool


def kaplan_jet_array(G: CarnotGroup, pts: np.ndarray, delta_sing: float = DELTA_SING,
                     strict: bool = True) -> HomNormJet:
    """Closed-form horizontal and vertical jets of the Kaplan norm, vectorised.

    With ``A_i = |x|^2 x_i + s_i x_{i'} 4z`` (``i'`` the symplectic partner,
    ``s_i`` the vertical sign of X_i):

        X_i N       = A_i / N^3
        X_j X_i N   = -3 A_i A_j / N^7 + (2 x_i x_j + |x|^2 delta_ij
                       + 2 s_i s_j x_{i'} x_{j'}) / N^3          (j != i')
        X_{i'} X_i N = -3 A_i A_{i'} / N^7 + 4 s_i z / N^3
    """
    _require_heisenberg(G)
    pts = np.atleast_2d(np.asarray(pts, float))
    h = 2 * G.n
    x = pts[:, :h]
    z = pts[:, h]
    r2 = np.einsum("ij,ij->i", x, x)
    N = (r2 * r2 + 16.0 * z * z) ** 0.25
    singular = N <= delta_sing
    if strict and singular.any():
        k = int(np.argmax(singular))
        raise SingularPointError(f"point {pts[k].tolist()} has N={N[k]:.3g} <= {delta_sing:g}")
    Ns = np.where(singular, 1.0, N)
    sgn = np.array([G.sign(i) for i in range(h)], float)
    part = np.array([G.partner(i) for i in range(h)])
    xp = x[:, part]                              # x_{i'}
    A = r2[:, None] * x + sgn[None, :] * xp * 4.0 * z[:, None]
    N3 = Ns**3
    N7 = Ns**7
    grad = A / N3[:, None]
    quad = (2.0 * x[:, :, None] * x[:, None, :]
            + r2[:, None, None] * np.eye(h)[None]
            + 2.0 * (sgn[:, None] * sgn[None, :])[None] * xp[:, :, None] * xp[:, None, :])
    hess = -3.0 * A[:, :, None] * A[:, None, :] / N7[:, None, None] + quad / N3[:, None, None]
    # partner entries: [j=i', i]
    for i in range(h):
        j = part[i]
        hess[:, j, i] = -3.0 * A[:, i] * A[:, j] / N7 + 4.0 * sgn[i] * z / N3
    ZN = 8.0 * z / N3
    ZZN = -3.0 * 64.0 * z * z / N7 + 8.0 / N3
    if singular.any():
        grad[singular] = np.nan
        hess[singular] = np.nan
        ZN = np.where(singular, np.nan, ZN)
        ZZN = np.where(singular, np.nan, ZZN)
    return HomNormJet(N, grad, hess, (ZN, ZZN), singular)


def kaplan_jet(G: CarnotGroup, p: Sequence, delta_sing: float = DELTA_SING) -> HomNormJet:
    """Jets at a single point; arrays are squeezed to the point's shapes."""
    _check_point(G, p)
    J = kaplan_jet_array(G, np.asarray(p, float)[None, :], delta_sing)
    return HomNormJet(J.value[0], J.grad_h[0], J.hess_h[0], (J.z_jet[0][0], J.z_jet[1][0]),
                      J.singular[0])


def eta_functional(G: CarnotGroup, h: int) -> Poly:
    """Coordinate functional eta_h (1-based) as an exact polynomial."""
    if not 1 <= h <= G.dim:
        raise IndexError(f"eta index {h} out of range 1..{G.dim}")
    return Poly.var(G.dim, h - 1)
