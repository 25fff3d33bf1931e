"""Operators built from a group's generators and a polynomial interaction U.

The deformed fields are ``V_j = X_j - (X_j U)/2`` and the bracket fields
follow ``V_{j,k} = [V_j, V_k] = [X_j, X_k] - ([X_j, X_k] U)/2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .diffop import DiffOp, anticommutator, commutator, compose_all
from .group import CarnotGroup, GroupKindError, kaplan_quartic_poly
from .poly import Poly, dual_weight, multi_indices


class UnsupportedStructureError(ValueError):
    pass


def generator(G: CarnotGroup, j: int) -> DiffOp:
    return G.generators[j]


def sub_laplacian(G: CarnotGroup) -> DiffOp:
    out = DiffOp.zero(G.dim)
    for X in G.generators:
        out = out + X.compose(X)
    return out


def sub_gradient(G: CarnotGroup, f: Poly) -> list[Poly]:
    return [X.apply(f) for X in G.generators]


def grad_sq(G: CarnotGroup, f: Poly) -> Poly:
    return sum((g * g for g in sub_gradient(G, f)), Poly.zero(G.dim))


def nabla_multi(G: CarnotGroup, beta: Sequence[int], f: Poly) -> Poly:
    """nabla^beta f = X_1^{b_1} X_2^{b_2} ... X_n^{b_n} f (rightmost acts first)."""
    if len(beta) != G.horizontal:
        raise ValueError(f"multi-index {tuple(beta)} has wrong length")
    for j in reversed(range(G.horizontal)):
        for _ in range(beta[j]):
            f = G.generators[j].apply(f)
    return f


def nabla_word(G: CarnotGroup, word: Sequence[int], f: Poly) -> Poly:
    """X_{w_1} X_{w_2} ... X_{w_k} f."""
    for j in reversed(word):
        f = G.generators[j].apply(f)
    return f


def iterated_grad_sq(G: CarnotGroup, f: Poly, k: int, mode: str = "words") -> Poly:
    """|nabla^k f|^2.

    ``mode="words"`` sums over all ordered words of length k (the entries of
    the iterated sub-gradient tensor); ``mode="multi"`` sums over ordered
    multi-indices |beta| = k only.
    """
    if k == 0:
        return f * f
    total = Poly.zero(G.dim)
    if mode == "words":
        layer = [f]
        for _ in range(k):
            layer = [X.apply(g) for g in layer for X in G.generators]
        for g in layer:
            total = total + g * g
        return total
    if mode == "multi":
        for beta in multi_indices(G.horizontal, k):
            g = nabla_multi(G, beta, f)
            total = total + g * g
        return total
    raise ValueError(f"unknown mode {mode!r}")


def v_field(G: CarnotGroup, U: Poly, j: int) -> DiffOp:
    X = G.generators[j]
    return X - DiffOp.mult(X.apply(U).scale(Fraction(1, 2)))


def v_fields(G: CarnotGroup, U: Poly) -> list[DiffOp]:
    return [v_field(G, U, j) for j in range(G.horizontal)]


def deform(A: DiffOp, U: Poly) -> DiffOp:
    """V(A, U) = A - (A U)/2 for a first-order field A."""
    return A - DiffOp.mult(A.apply(U).scale(Fraction(1, 2)))


def bracket_field(G: CarnotGroup, U: Poly, j: int, k: int) -> DiffOp:
    """V_{j,k} built from the bracket of the underlying fields."""
    return deform(commutator(G.generators[j], G.generators[k]), U)


def nested_bracket_field(G: CarnotGroup, U: Poly, idx: Sequence[int]) -> DiffOp:
    """Left-nested bracket [...[[X_{i1}, X_{i2}], X_{i3}]...] deformed by U."""
    A = G.generators[idx[0]]
    for i in idx[1:]:
        A = commutator(A, G.generators[i])
    return deform(A, U)


def l_operator(G: CarnotGroup, U: Poly) -> DiffOp:
    out = DiffOp.zero(G.dim)
    for V in v_fields(G, U):
        out = out - V.compose(V)
    return out


def v_potential_poly(G: CarnotGroup, U: Poly) -> Poly:
    """|grad U|^2 / 4 - (Delta U) / 2 as an exact polynomial."""
    return grad_sq(G, U).scale(Fraction(1, 4)) - sub_laplacian(G).apply(U).scale(Fraction(1, 2))


def rockland_op(G: CarnotGroup, n: int) -> DiffOp:
    if n < 1:
        raise ValueError("Rockland order parameter must be positive")
    out = DiffOp.zero(G.dim)
    for X in G.generators:
        out = out + X ** (2 * n)
    return out.scale((-1) ** n)


def ad_power(L: DiffOp, V: DiffOp, m: int) -> DiffOp:
    """ad_L^m (V) by repeated commutators."""
    if m < 1:
        raise ValueError("m must be positive")
    out = V
    for _ in range(m):
        out = commutator(L, out)
    return out


def ad_closed(G: CarnotGroup, U: Poly, l: int, m: int) -> DiffOp:
    """Closed form of ad_L^m(V_l) on a step-two group.

        2^m  sum_{j_1..j_m}  V_{j_m} V_{j_m j_{m-1}} ... V_{j_1 j_2} V_{l j_1}
    """
    if G.step > 2:
        raise UnsupportedStructureError("closed ad-expansion is only available on step-two groups")
    if m < 1:
        raise ValueError("m must be positive")
    k = G.horizontal
    V = v_fields(G, U)
    B = {(a, b): bracket_field(G, U, a, b) for a in range(k) for b in range(k)}
    out = DiffOp.zero(G.dim)
    for js in itertools.product(range(k), repeat=m):
        # js = (j_1, ..., j_m); rightmost factor acts first
        factors = [V[js[-1]]]
        for t in range(m - 1, 0, -1):
            factors.append(B[(js[t - 1], js[t])])
        factors.append(B[(l, js[0])])
        if any(f.is_zero() for f in factors):
            continue
        out = out + compose_all(factors)
    return out.scale(2**m)


def ad_first_anticommutator(G: CarnotGroup, U: Poly, l: int) -> DiffOp:
    """sum_j {V_j, V_{l j}}, the m = 1 case for any step."""
    V = v_fields(G, U)
    out = DiffOp.zero(G.dim)
    for j in range(G.horizontal):
        out = out + anticommutator(V[j], bracket_field(G, U, l, j))
    return out


def ad_second_step2(G: CarnotGroup, U: Poly, l: int) -> DiffOp:
    """4 sum_{j1, j2} V_{j2} V_{j1 j2} V_{l j1}."""
    V = v_fields(G, U)
    k = G.horizontal
    out = DiffOp.zero(G.dim)
    for j1 in range(k):
        for j2 in range(k):
            out = out + compose_all([V[j2], bracket_field(G, U, j1, j2), bracket_field(G, U, l, j1)])
    return out.scale(4)


@dataclass(frozen=True)
class HarmonicLibrary:
    w_plus: Poly
    w_minus: Poly
    v_terms: dict
    v_aggregate: Poly          # sum_{j,k} V_{j,k}^2 (the quantity squared in the identity)
    kaplan_quartic: Poly
    identity_residual: Poly    # W+^2 + W-^2 + 2 V - 2 K
    laplacians: dict

    @property
    def exact(self) -> bool:
        return self.identity_residual.is_zero() and all(p.is_zero() for p in self.laplacians.values())


def harmonic_library(G: CarnotGroup) -> HarmonicLibrary:
    """Harmonic polynomials of H^n and the Kaplan identity.

    W_pm = 4z pm 2 sum_j x_j x_{2n-j+1},  V_{j,k} = (x_j - x_{2n-j+1})(x_k + x_{2n-k+1}),
    and  W_+^2 + W_-^2 + 2 sum_{j,k} V_{j,k}^2 = 2 (|x|^4 + 16 z^2).
    """
    if not G.is_heisenberg:
        raise GroupKindError("harmonic library is defined on Heisenberg groups")
    n, dim = G.n, G.dim
    x = Poly.gens(dim)
    z = x[-1]
    s = sum((x[j] * x[G.partner(j)] for j in range(n)), Poly.zero(dim))
    w_plus = z.scale(4) + s.scale(2)
    w_minus = z.scale(4) - s.scale(2)
    v_terms = {}
    for j in range(n):
        for k in range(n):
            v_terms[(j + 1, k + 1)] = (x[j] - x[G.partner(j)]) * (x[k] + x[G.partner(k)])
    v_agg = sum((v * v for v in v_terms.values()), Poly.zero(dim))
    K = kaplan_quartic_poly(G)
    residual = w_plus * w_plus + w_minus * w_minus + v_agg.scale(2) - K.scale(2)
    lap = sub_laplacian(G)
    laps = {"W+": lap.apply(w_plus), "W-": lap.apply(w_minus)}
    for key, v in v_terms.items():
        laps[f"V{key}"] = lap.apply(v)
    return HarmonicLibrary(w_plus, w_minus, v_terms, v_agg, K, residual, laps)


def dual_biorthogonality(G: CarnotGroup, max_order: int = 4) -> dict:
    """Check nabla^beta w_alpha = delta_{alpha beta} for |alpha| = |beta| <= max_order.

    Returns a mapping (alpha, beta) -> value (a constant polynomial) and a flag.
    """
    k = G.horizontal
    table = {}
    ok = True
    for order in range(max_order + 1):
        idx = multi_indices(k, order)
        for a in idx:
            w = dual_weight(a, k, G.dim)
            for b in idx:
                val = nabla_multi(G, b, w)
                want = Poly.const(G.dim, 1 if a == b else 0)
                if val != want:
                    ok = False
                table[(a, b)] = val
    return {"exact": ok, "table": table}
