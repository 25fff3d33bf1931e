"""Helpers shared by the verifiers: integrators, families, observables."""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from ..group import CarnotGroup, kaplan_norm_array
from ..operators import grad_sq, v_potential_poly
from ..poly import Poly, parse_expr
from ..potentials import PotentialSpec, u_jet_array
from ..sampler import (GaussianMomentIntegrator, GridIntegrator, GridSpec, MCIntegrator,
                       SamplerConfig, run_chains)


class InvalidScenarioError(ValueError):
    pass


def build_integrator(G: CarnotGroup, pot: PotentialSpec, cfg: Mapping | None = None, seed: int = 0):
    """Integrator from a plain config mapping ``{"kind": "grid"|"mc"|"exact", ...}``."""
    cfg = dict(cfg or {})
    kind = cfg.pop("kind", "grid")
    if kind == "grid":
        spec = GridSpec(radius=_tuple(cfg.get("radius", 10.0)), nodes=_tuple(cfg.get("nodes", 101)),
                        rule=cfg.get("rule", "trapezoid"), tail_tol=cfg.get("tail_tol", 1e-10))
        return GridIntegrator(G, pot, spec)
    if kind == "mc":
        sc = SamplerConfig(chains=cfg.get("chains", 4), steps=cfg.get("steps", 20000),
                           burn_in=cfg.get("burn_in", 2000),
                           proposal_scale=cfg.get("proposal_scale", 1.0),
                           seed=cfg.get("seed", seed), drift=cfg.get("drift", False))
        return MCIntegrator(run_chains(G, pot, sc))
    if kind == "exact":
        U = pot.symbolic(G)
        if U is None:
            raise InvalidScenarioError("exact moments need a polynomial interaction")
        return GaussianMomentIntegrator(U)
    raise InvalidScenarioError(f"unknown integrator kind {kind!r}")


def _tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else v


def parse_family(G: CarnotGroup, family: Sequence) -> list[Poly]:
    out = []
    for f in family:
        if isinstance(f, Poly):
            if f.dim != G.dim:
                raise InvalidScenarioError(f"test polynomial {f} has the wrong dimension")
            out.append(f)
        else:
            out.append(parse_expr(str(f), G.names))
    return out


def default_family(G: CarnotGroup) -> list[Poly]:
    """Coordinates and their pairwise products (a generic non-constant family)."""
    x = Poly.gens(G.dim)
    fam = list(x)
    for i in range(G.dim):
        for j in range(i, G.dim):
            fam.append(x[i] * x[j])
    return fam


def group_norm_array(G: CarnotGroup, pts: np.ndarray) -> np.ndarray:
    if G.is_heisenberg:
        return kaplan_norm_array(G, pts)
    return np.linalg.norm(np.atleast_2d(pts), axis=1)


def shell_points(G: CarnotGroup, radii: Sequence[float], n_dirs: int = 24, seed: int = 0) -> np.ndarray:
    """Points on homogeneous-norm shells: coordinate axes plus seeded random directions."""
    rng = np.random.default_rng(seed)
    dirs = np.vstack([np.eye(G.dim), -np.eye(G.dim), rng.normal(size=(n_dirs, G.dim))])
    w = np.array(G.weights(), float)
    N = group_norm_array(G, dirs)
    unit = dirs / N[:, None] ** w[None, :]
    pts = [unit * float(r) ** w[None, :] for r in radii]
    return np.vstack(pts)


def pot_symbolic(G: CarnotGroup, pot: PotentialSpec) -> Poly | None:
    return pot.symbolic(G)


def fast_poly(f: Poly) -> Callable[[np.ndarray], np.ndarray]:
    return f.eval_array


class Fields:
    """U-dependent integrand pieces, symbolic when U is a polynomial."""

    def __init__(self, G: CarnotGroup, pot: PotentialSpec):
        self.G, self.pot = G, pot
        self.U = pot.symbolic(G)
        if self.U is not None:
            self.gradU = [X.apply(self.U) for X in G.generators]
            self.gradsq = grad_sq(G, self.U)
            self.V = v_potential_poly(G, self.U)

    @property
    def symbolic(self) -> bool:
        return self.U is not None

    def jet(self, pts):
        return u_jet_array(self.G, self.pot, pts, strict=False)

    def v_array(self, pts) -> np.ndarray:
        if self.symbolic:
            return self.V.eval_array(pts)
        J = self.jet(pts)
        return 0.25 * J.gradsq - 0.5 * J.lap

    def gradsq_array(self, pts) -> np.ndarray:
        if self.symbolic:
            return self.gradsq.eval_array(pts)
        return self.jet(pts).gradsq

    def gradU_array(self, pts) -> np.ndarray:
        if self.symbolic:
            return np.stack([g.eval_array(pts) for g in self.gradU], axis=1)
        return self.jet(pts).grad_h


def to_fraction(est, max_den: int = 10**9) -> Fraction:
    """Exact value when known; otherwise the float snapped to a nearby small rational."""
    if est.exact is not None:
        return est.exact
    return Fraction(est.mean).limit_denominator(max_den)


def sum_polys(ps, dim: int) -> Poly:
    out = Poly.zero(dim)
    for p in ps:
        out = out + p
    return out
