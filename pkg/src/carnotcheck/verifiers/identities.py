"""Exact symbolic checks: harmonic library, dual weights, deformed-field brackets, ad-expansion."""

from __future__ import annotations

import itertools
from typing import Sequence

import numpy as np

from ..diffop import commutator
from ..group import CarnotGroup, make_group
from ..operators import (ad_closed, ad_power, bracket_field, dual_biorthogonality, harmonic_library,
                         l_operator, sub_laplacian, v_fields)
from ..poly import Poly, random_poly
from .reports import CheckReport


def harmonic_check(G: CarnotGroup) -> CheckReport:
    lib = harmonic_library(G)
    x = Poly.gens(G.dim)
    # x^2 - y^2 in the first symplectic pair
    extra = x[0] * x[0] - x[G.partner(0)] * x[G.partner(0)]
    lap_extra = sub_laplacian(G).apply(extra)
    ok = lib.exact and lap_extra.is_zero()
    return CheckReport(f"harmonic_library[{G.kind}{G.n}]", ok,
                       {"identity_residual": lib.identity_residual,
                        "laplacians": {k: v for k, v in lib.laplacians.items()},
                        "laplacian_x2_minus_y2": lap_extra,
                        "w_plus": lib.w_plus, "w_minus": lib.w_minus})


def biorthogonality_check(G: CarnotGroup, max_order: int = 3) -> CheckReport:
    res = dual_biorthogonality(G, max_order)
    bad = [f"{a}/{b}" for (a, b), v in res["table"].items() if v != Poly.const(G.dim, 1 if a == b else 0)]
    return CheckReport(f"dual_biorthogonality[{G.kind}{G.n}]", res["exact"],
                       {"max_order": max_order, "pairs": len(res["table"]), "failures": bad})


def _random_potentials(G: CarnotGroup, count: int, seed: int, max_deg: int = 4) -> list[Poly]:
    rng = np.random.default_rng(seed)
    return [random_poly(rng, G.dim, max_deg) for _ in range(count)]


def bracket_check(G: CarnotGroup, count: int = 20, seed: int = 0, max_deg: int = 4) -> CheckReport:
    """[V_j, V_k] = V_{j,k} and every triple bracket of V-fields is a multiplication operator."""
    k = G.horizontal
    failures = []
    for t, U in enumerate(_random_potentials(G, count, seed, max_deg)):
        V = v_fields(G, U)
        for a, b in itertools.combinations(range(k), 2):
            if commutator(V[a], V[b]) != bracket_field(G, U, a, b):
                failures.append({"U": U, "pair": (a + 1, b + 1)})
        for a, b, c in itertools.product(range(k), repeat=3):
            if not commutator(commutator(V[a], V[b]), V[c]).is_multiplication():
                failures.append({"U": U, "triple": (a + 1, b + 1, c + 1)})
    return CheckReport(f"bracket_fields[{G.kind}{G.n}]", not failures,
                       {"potentials": count, "seed": seed, "max_degree": max_deg, "failures": failures})


def ad_check(G: CarnotGroup, orders: Sequence[int] = (1, 2, 3), count: int = 10, seed: int = 0,
             max_deg: int = 4) -> CheckReport:
    """Brute-force ad_L^m(V_l) against the closed bracket-chain expansion."""
    failures = []
    for U in _random_potentials(G, count, seed, max_deg):
        L = l_operator(G, U)
        V = v_fields(G, U)
        for l in range(G.horizontal):
            for m in orders:
                if ad_power(L, V[l], m) != ad_closed(G, U, l, m):
                    failures.append({"U": U, "l": l + 1, "m": m})
    return CheckReport(f"ad_expansion[{G.kind}{G.n}]", not failures,
                       {"orders": list(orders), "potentials": count, "seed": seed, "failures": failures})


def identity_suite(seed: int = 0, quick: bool = False) -> list[CheckReport]:
    """Built-in exact suite over H^1..H^3 and euclidean(2)."""
    out = []
    for n in (1, 2, 3):
        G = make_group("heisenberg", n)
        out.append(harmonic_check(G))
        out.append(biorthogonality_check(G, 2 if n > 1 else 3))
    n_br = 5 if quick else 20
    n_ad = 3 if quick else 10
    for n in (1, 2):
        G = make_group("heisenberg", n)
        out.append(bracket_check(G, n_br, seed))
        out.append(ad_check(G, (1, 2) if quick else (1, 2, 3), n_ad, seed))
    return out
