"""Expectations under d mu = exp(-U) d lambda / Z.

Three integrators share one interface, ``expect_many(observables)``:

* :class:`GridIntegrator` runs tensor trapezoid (or Simpson) quadrature for
  groups of dimension at most 3 and is the deterministic oracle.
* :class:`MCIntegrator` averages over a :class:`SampleBatch` from
  :func:`run_chains`, with batch-means error bars.
* :class:`GaussianMomentIntegrator` evaluates polynomial observables exactly
  when U is a diagonal positive quadratic.

An observable is a :class:`~carnotcheck.poly.Poly` or a callable that maps an
``(m, dim)`` array of points to ``m`` values.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence, Union

import numpy as np

from .group import CarnotGroup
from .poly import Poly
from .potentials import PotentialSpec, u_value_array

Observable = Union[Poly, Callable[[np.ndarray], np.ndarray]]

N_BATCHES = 32


class TaintedEstimateError(ValueError):
    """An observable returned a non-finite value."""


class UnsupportedDimensionError(ValueError):
    pass


class TruncationError(ValueError):
    """The integrand still carries mass at the edge of the grid."""


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_err: float = 0.0
    ess: float | None = None
    n: int = 0
    method: str = "grid"
    exact: Fraction | None = None

    def __sub__(self, other: "Estimate") -> "Estimate":
        return combine([self, other], [1, -1])

    def __add__(self, other: "Estimate") -> "Estimate":
        return combine([self, other], [1, 1])

    def scale(self, c: float) -> "Estimate":
        return combine([self], [c])

    def to_dict(self) -> dict:
        d = {"mean": self.mean, "std_err": self.std_err, "method": self.method, "n": self.n}
        if self.ess is not None:
            d["ess"] = self.ess
        if self.exact is not None:
            d["exact"] = f"{self.exact.numerator}/{self.exact.denominator}"
        return d


def combine(ests: Sequence[Estimate], coeffs: Sequence[float]) -> Estimate:
    """Linear combination; error bars add in quadrature."""
    mean = math.fsum(float(c) * e.mean for c, e in zip(coeffs, ests))
    err = math.sqrt(math.fsum((float(c) * e.std_err) ** 2 for c, e in zip(coeffs, ests)))
    exact = None
    if all(e.exact is not None for e in ests) and all(
            isinstance(c, (int, Fraction)) for c in coeffs):
        exact = sum((Fraction(c) * e.exact for c, e in zip(coeffs, ests)), Fraction(0))
        mean = float(exact)
    methods = {e.method for e in ests}
    return Estimate(mean, err, None, max((e.n for e in ests), default=0),
                    methods.pop() if len(methods) == 1 else "mixed", exact)


def _evaluate(obs: Observable, pts: np.ndarray) -> np.ndarray:
    if isinstance(obs, Poly):
        return obs.eval_array(pts)
    vals = np.asarray(obs(pts), dtype=float)
    if vals.shape == ():
        vals = np.full(pts.shape[0], float(vals))
    return vals


def _check_finite(vals: np.ndarray, pts: np.ndarray, label: str = "observable") -> None:
    bad = ~np.isfinite(vals)
    if bad.any():
        k = int(np.argmax(bad))
        raise TaintedEstimateError(f"{label} is {vals[k]} at point {pts[k].tolist()}")


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    steps: int = 20000
    burn_in: int = 2000
    proposal_scale: float = 1.0
    seed: int = 0
    drift: bool = False
    tune: bool = True
    chain_ids: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.chains < 1:
            raise ValueError("chains must be at least 1")
        if not 0 <= self.burn_in < self.steps:
            raise ValueError("need 0 <= burn_in < steps")
        if not self.proposal_scale > 0:
            raise ValueError("proposal_scale must be positive")
        if self.chain_ids is not None and len(self.chain_ids) != self.chains:
            raise ValueError("chain_ids must list one id per chain")

    def ids(self) -> tuple[int, ...]:
        return tuple(range(self.chains)) if self.chain_ids is None else tuple(self.chain_ids)


@dataclass(frozen=True)
class SampleBatch:
    points: np.ndarray              # (chains, kept, dim)
    acceptance_rate: np.ndarray     # (chains,)
    proposal_scale: np.ndarray      # tuned scale per chain
    seed: int
    chain_ids: tuple[int, ...]
    warnings: tuple[str, ...] = ()

    @property
    def n_samples(self) -> int:
        return self.points.shape[0] * self.points.shape[1]

    def to_csv(self, path) -> None:
        dim = self.points.shape[2]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "step"] + [f"x{i + 1}" for i in range(dim)])
            for c, cid in enumerate(self.chain_ids):
                for s in range(self.points.shape[1]):
                    w.writerow([cid, s] + [repr(float(v)) for v in self.points[c, s]])


def _coord_grad(G: CarnotGroup, pot: PotentialSpec, pts: np.ndarray) -> np.ndarray:
    """Euclidean coordinate gradient of U by central differences (drift proposals)."""
    h = 1e-5 * (1.0 + np.abs(pts).max(axis=1, keepdims=True))
    out = np.empty_like(pts)
    for k in range(pts.shape[1]):
        e = np.zeros(pts.shape[1])
        e[k] = 1.0
        out[:, k] = (u_value_array(G, pot, pts + h * e) - u_value_array(G, pot, pts - h * e)) / (2 * h[:, 0])
    return out


def run_chains(G: CarnotGroup, pot: PotentialSpec, cfg: SamplerConfig) -> SampleBatch:
    """Random-walk Metropolis (or MALA when ``cfg.drift``) targeting exp(-U).

    Each chain draws from its own generator seeded by ``(cfg.seed, chain id)``
    and tunes its own proposal scale during burn-in, so a chain's trajectory
    does not depend on the other chains.
    """
    pot.validate_measure(G)
    ids = cfg.ids()
    C, S, d = cfg.chains, cfg.steps, G.dim
    noise = np.empty((C, S, d))
    unif = np.empty((C, S))
    start = np.empty((C, d))
    for c, cid in enumerate(ids):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(cid,))))
        start[c] = rng.normal(size=d)
        noise[c] = rng.normal(size=(S, d))
        unif[c] = rng.random(S)
    logu = np.log(unif)
    x = start.copy()
    ux = u_value_array(G, pot, x)
    gx = _coord_grad(G, pot, x) if cfg.drift else None
    scale = np.full(C, float(cfg.proposal_scale))
    factor = np.full(C, 2.0)
    last_dir = np.zeros(C)
    window = 100
    acc_window = np.zeros(C)
    acc_total = np.zeros(C)
    kept = np.empty((C, S - cfg.burn_in, d))
    for t in range(S):
        s = scale[:, None]
        if cfg.drift:
            mean_x = x - 0.5 * s * s * gx
            y = mean_x + s * noise[:, t]
            uy = u_value_array(G, pot, y)
            gy = _coord_grad(G, pot, y)
            mean_y = y - 0.5 * s * s * gy
            log_q = (-np.sum((x - mean_y) ** 2, axis=1) + np.sum((y - mean_x) ** 2, axis=1)) / (2 * scale**2)
            log_a = ux - uy + log_q
        else:
            y = x + s * noise[:, t]
            uy = u_value_array(G, pot, y)
            log_a = ux - uy
        acc = logu[:, t] < log_a
        x = np.where(acc[:, None], y, x)
        ux = np.where(acc, uy, ux)
        if cfg.drift:
            gx = np.where(acc[:, None], gy, gx)
        acc_window += acc
        if t < cfg.burn_in:
            if cfg.tune and (t + 1) % window == 0:
                rate = acc_window / window
                direction = np.where(rate > 0.40, 1.0, np.where(rate < 0.25, -1.0, 0.0))
                flip = (direction != 0) & (last_dir != 0) & (direction != last_dir)
                factor = np.where(flip, np.sqrt(factor), factor)
                scale = scale * np.where(direction > 0, factor, np.where(direction < 0, 1 / factor, 1.0))
                last_dir = np.where(direction != 0, direction, last_dir)
                acc_window[:] = 0
            elif not cfg.tune and (t + 1) % window == 0:
                acc_window[:] = 0
        else:
            acc_total += acc
            kept[:, t - cfg.burn_in] = x
    rate = acc_total / (S - cfg.burn_in)
    notes = []
    for c, cid in enumerate(ids):
        if rate[c] < 0.01:
            notes.append(f"chain {cid}: acceptance rate {rate[c]:.4f} below 1%")
    for n in notes:
        warnings.warn(n, RuntimeWarning, stacklevel=2)
    return SampleBatch(kept, rate, scale, cfg.seed, ids, tuple(notes))


def estimate(batch: SampleBatch, obs: Observable, n_batches: int = N_BATCHES) -> Estimate:
    return MCIntegrator(batch, n_batches).expect(obs)


class MCIntegrator:
    """Batch-means estimates over a fixed sample batch.

    Sums use ``math.fsum`` so that reordering chains changes no digit.
    """

    method = "mc"

    def __init__(self, batch: SampleBatch, n_batches: int = N_BATCHES):
        self.batch = batch
        C, K, d = batch.points.shape
        self.n_batches = max(1, min(n_batches, K))
        self.bsize = K // self.n_batches
        self.used = self.bsize * self.n_batches
        self.flat = batch.points[:, :self.used].reshape(-1, d)

    def expect_many(self, observables: Sequence[Observable]) -> list[Estimate]:
        return [self._one(o) for o in observables]

    def expect(self, obs: Observable) -> Estimate:
        return self._one(obs)

    def _one(self, obs: Observable) -> Estimate:
        C = self.batch.points.shape[0]
        vals = _evaluate(obs, self.flat)
        _check_finite(vals, self.flat)
        N = vals.size
        mean = math.fsum(vals) / N
        per = vals.reshape(C * self.n_batches, self.bsize)
        bmeans = np.array([math.fsum(r) / self.bsize for r in per])
        nb = bmeans.size
        if nb > 1:
            bvar = math.fsum((bmeans - mean) ** 2) / (nb - 1)
        else:
            bvar = 0.0
        std_err = math.sqrt(bvar / nb)
        var = math.fsum((vals - mean) ** 2) / max(N - 1, 1)
        if std_err == 0.0 or var == 0.0:
            ess = float(N)
        else:
            ess = min(float(N), var / std_err**2)
        return Estimate(mean, std_err, ess, N, "mc")


# ---------------------------------------------------------------------------
# Grid quadrature

@dataclass(frozen=True)
class GridSpec:
    radius: float | tuple[float, ...] = 8.0
    nodes: int | tuple[int, ...] = 81
    rule: str = "trapezoid"
    tail_tol: float = 1e-10
    center: tuple[float, ...] | None = None

    def axes(self, dim: int) -> list[np.ndarray]:
        R = self.radius if isinstance(self.radius, (tuple, list)) else (self.radius,) * dim
        M = self.nodes if isinstance(self.nodes, (tuple, list)) else (self.nodes,) * dim
        if len(R) != dim or len(M) != dim:
            raise ValueError("radius/nodes lists must match the group dimension")
        c = self.center or (0.0,) * dim
        return [np.linspace(ci - r, ci + r, m) for ci, r, m in zip(c, R, M)]

    def rule_weights(self, m: int) -> np.ndarray:
        w = np.ones(m)
        if self.rule == "trapezoid":
            w[0] = w[-1] = 0.5
        elif self.rule == "simpson":
            if m % 2 == 0:
                raise ValueError("Simpson's rule needs an odd number of nodes")
            w[1:-1:2] = 4.0
            w[2:-1:2] = 2.0
        else:
            raise ValueError(f"unknown rule {self.rule!r}")
        return w


class GridIntegrator:
    """Normalised tensor-grid quadrature of f exp(-U); dimension <= 3."""

    method = "grid"

    def __init__(self, G: CarnotGroup, pot: PotentialSpec, spec: GridSpec = GridSpec(),
                 check_tail: bool = True):
        if G.dim > 3:
            raise UnsupportedDimensionError(f"grid quadrature supports dim <= 3, got {G.dim}")
        pot.check_group(G)
        self.G, self.pot, self.spec = G, pot, spec
        self.check_tail = check_tail
        axes = spec.axes(G.dim)
        self.axes = axes
        rw = [spec.rule_weights(len(a)) for a in axes]
        rest = axes[1:]
        if rest:
            mesh = np.meshgrid(*rest, indexing="ij")
            self._rest = np.stack([m.ravel() for m in mesh], axis=1)
            wmesh = np.meshgrid(*rw[1:], indexing="ij")
            self._rest_w = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
            edge = np.zeros(self._rest.shape[0], bool)
            for k, m in enumerate(mesh):
                idx = np.meshgrid(*[np.arange(len(a)) for a in rest], indexing="ij")[k].ravel()
                edge |= (idx == 0) | (idx == len(rest[k]) - 1)
            self._rest_edge = edge
        else:
            self._rest = np.zeros((1, 0))
            self._rest_w = np.ones(1)
            self._rest_edge = np.zeros(1, bool)
        self._w0 = rw[0]
        u = [u_value_array(G, pot, self._slab(i)) for i in range(len(axes[0]))]
        umin = min(float(v.min()) for v in u)
        self._weights = [np.exp(-(v - umin)) * self._rest_w * self._w0[i] for i, v in enumerate(u)]
        self.n_nodes = sum(w.size for w in self._weights)

    def _slab(self, i: int) -> np.ndarray:
        x0 = np.full((self._rest.shape[0], 1), self.axes[0][i])
        return np.hstack([x0, self._rest])

    def expect(self, obs: Observable) -> Estimate:
        return self.expect_many([obs])[0]

    def expect_many(self, observables: Sequence[Observable]) -> list[Estimate]:
        k = len(observables)
        sums = [[] for _ in range(k)]
        norm = []
        edge_max = np.zeros(k)
        inner_max = np.zeros(k)
        last = len(self.axes[0]) - 1
        for i, w in enumerate(self._weights):
            pts = self._slab(i)
            norm.append(float(np.dot(np.ones_like(w), w)))
            edge = np.ones(w.size, bool) if i in (0, last) else self._rest_edge
            for j, obs in enumerate(observables):
                vals = _evaluate(obs, pts)
                _check_finite(vals, pts)
                sums[j].append(float(np.dot(vals, w)))
                if self.check_tail:
                    mass = np.abs(vals) * w
                    if edge.any():
                        edge_max[j] = max(edge_max[j], float(mass[edge].max()))
                    if (~edge).any():
                        inner_max[j] = max(inner_max[j], float(mass[~edge].max()))
        Z = math.fsum(norm)
        out = []
        for j in range(k):
            if self.check_tail and edge_max[j] > self.spec.tail_tol * inner_max[j] and edge_max[j] > 0:
                R = self.spec.radius
                raise TruncationError(
                    f"observable {j} keeps relative mass {edge_max[j] / max(inner_max[j], 1e-300):.2e} "
                    f"on the grid boundary; try a larger radius than {R}")
            out.append(Estimate(math.fsum(sums[j]) / Z, 0.0, None, self.n_nodes, "grid"))
        return out


def grid_quadrature(G: CarnotGroup, pot: PotentialSpec, f: Observable,
                    spec: GridSpec = GridSpec()) -> float:
    return GridIntegrator(G, pot, spec).expect(f).mean


# ---------------------------------------------------------------------------
# Exact Gaussian moments

class GaussianMomentIntegrator:
    """Exact expectations of polynomials when U = c_0 + sum_i c_i x_i^2, c_i > 0."""

    method = "exact"

    def __init__(self, U: Poly):
        self.dim = U.dim
        self.c = [Fraction(0)] * U.dim
        for e, coef in U.terms.items():
            if sum(e) == 0:
                continue
            if sum(e) != 2 or max(e) != 2:
                raise ValueError("exact moments need a diagonal quadratic interaction")
            self.c[e.index(2)] = coef
        if any(c <= 0 for c in self.c):
            raise ValueError("every coordinate needs a positive quadratic coefficient")
        # variance 1 / (2 c_i)
        self.var = [1 / (2 * c) for c in self.c]

    def moment(self, e: Sequence[int]) -> Fraction:
        out = Fraction(1)
        for k, v in zip(e, self.var):
            if k % 2:
                return Fraction(0)
            dfact = 1
            for j in range(k - 1, 0, -2):
                dfact *= j
            out *= dfact * v ** (k // 2)
        return out

    def expect_exact(self, f: Poly) -> Fraction:
        return sum((c * self.moment(e) for e, c in f.terms.items()), Fraction(0))

    def expect(self, obs: Observable) -> Estimate:
        if not isinstance(obs, Poly):
            raise TypeError("exact moments need a polynomial observable")
        v = self.expect_exact(obs)
        return Estimate(float(v), 0.0, None, 0, "exact", v)

    def expect_many(self, observables: Sequence[Observable]) -> list[Estimate]:
        return [self.expect(o) for o in observables]
