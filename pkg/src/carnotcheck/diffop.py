"""Differential operators with polynomial coefficients, kept in normal order.

An operator is a finite sum  sum_alpha c_alpha(x) d^alpha  with every
coefficient to the left of every partial.  In that form two operators are
equal iff their coefficient maps agree, which is what makes the operator
identities decidable.
"""

from __future__ import annotations

import itertools
import math
from typing import Iterable, Sequence

from .poly import DimensionError, Exponent, Poly, default_names

MAX_ORDER = 12


class OperatorOverflowError(RuntimeError):
    """Total derivative order exceeded the configured cap."""


def _sub_indices(alpha: Exponent):
    return itertools.product(*(range(a + 1) for a in alpha))


def _binom_multi(alpha: Exponent, gamma: Sequence[int]) -> int:
    out = 1
    for a, g in zip(alpha, gamma):
        out *= math.comb(a, g)
    return out


class DiffOp:
    __slots__ = ("dim", "terms", "max_order")

    def __init__(self, dim: int, terms: dict[Exponent, Poly] | None = None,
                 max_order: int = MAX_ORDER):
        self.dim = dim
        self.max_order = max_order
        clean: dict[Exponent, Poly] = {}
        for a, c in (terms or {}).items():
            a = tuple(a)
            if len(a) != dim:
                raise DimensionError(f"derivative index {a} does not match dimension {dim}")
            if c.dim != dim:
                raise DimensionError("coefficient dimension mismatch")
            if sum(a) > max_order:
                raise OperatorOverflowError(
                    f"derivative order {sum(a)} exceeds cap {max_order}")
            if c:
                clean[a] = clean[a] + c if a in clean else c
                if not clean[a]:
                    del clean[a]
        self.terms = clean

    # -- constructors ---------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> "DiffOp":
        return cls(dim)

    @classmethod
    def identity(cls, dim: int) -> "DiffOp":
        return cls(dim, {(0,) * dim: Poly.const(dim, 1)})

    @classmethod
    def mult(cls, f: Poly) -> "DiffOp":
        """Multiplication by the polynomial ``f``."""
        return cls(f.dim, {(0,) * f.dim: f})

    @classmethod
    def partial(cls, dim: int, i: int, k: int = 1) -> "DiffOp":
        if not 0 <= i < dim:
            raise IndexError(f"coordinate index {i} out of range")
        a = [0] * dim
        a[i] = k
        return cls(dim, {tuple(a): Poly.const(dim, 1)})

    # -- structure ------------------------------------------------------
    @property
    def order(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def is_zero(self) -> bool:
        return not self.terms

    def is_multiplication(self) -> bool:
        """True when the operator has no derivative part."""
        return all(not any(a) for a in self.terms)

    def multiplier(self) -> Poly:
        if not self.is_multiplication():
            raise ValueError("operator has a derivative part")
        return self.terms.get((0,) * self.dim, Poly.zero(self.dim))

    def part(self, order: int) -> "DiffOp":
        return DiffOp(self.dim, {a: c for a, c in self.terms.items() if sum(a) == order})

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def _check(self, other: "DiffOp"):
        if not isinstance(other, DiffOp):
            raise TypeError(f"expected DiffOp, got {type(other).__name__}")
        if other.dim != self.dim:
            raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")

    # -- linear structure -----------------------------------------------
    def __add__(self, other: "DiffOp") -> "DiffOp":
        self._check(other)
        out = dict(self.terms)
        for a, c in other.terms.items():
            s = out[a] + c if a in out else c
            if s:
                out[a] = s
            else:
                out.pop(a, None)
        return DiffOp(self.dim, out, max(self.max_order, other.max_order))

    def __neg__(self) -> "DiffOp":
        return DiffOp(self.dim, {a: -c for a, c in self.terms.items()}, self.max_order)

    def __sub__(self, other: "DiffOp") -> "DiffOp":
        return self + (-other)

    def scale(self, s) -> "DiffOp":
        return DiffOp(self.dim, {a: c.scale(s) for a, c in self.terms.items()}, self.max_order)

    def lmul(self, f: Poly) -> "DiffOp":
        """Left multiplication by a polynomial: f * A."""
        return DiffOp(self.dim, {a: f * c for a, c in self.terms.items()}, self.max_order)

    # -- action and products --------------------------------------------
    def apply(self, f: Poly) -> Poly:
        if f.dim != self.dim:
            raise DimensionError(f"dimension mismatch: operator {self.dim}, polynomial {f.dim}")
        out = Poly.zero(self.dim)
        for a, c in self.terms.items():
            d = f.derive_multi(a)
            if d:
                out = out + c * d
        return out

    __call__ = apply

    def compose(self, other: "DiffOp") -> "DiffOp":
        """Normal-ordered product  self o other."""
        self._check(other)
        cap = max(self.max_order, other.max_order)
        out: dict[Exponent, Poly] = {}
        deriv_cache: dict[tuple[Exponent, Exponent], Poly] = {}
        for alpha, a in self.terms.items():
            for beta, b in other.terms.items():
                for gamma in _sub_indices(alpha):
                    key = (beta, gamma)
                    db = deriv_cache.get(key)
                    if db is None:
                        db = b.derive_multi(gamma)
                        deriv_cache[key] = db
                    if not db:
                        continue
                    k = _binom_multi(alpha, gamma)
                    idx = tuple(x - g + y for x, g, y in zip(alpha, gamma, beta))
                    if sum(idx) > cap:
                        raise OperatorOverflowError(
                            f"composition reaches derivative order {sum(idx)} > cap {cap}")
                    term = (a * db).scale(k)
                    s = out[idx] + term if idx in out else term
                    if s:
                        out[idx] = s
                    else:
                        out.pop(idx, None)
        return DiffOp(self.dim, out, cap)

    def __mul__(self, other):
        if isinstance(other, DiffOp):
            return self.compose(other)
        if isinstance(other, Poly):
            return self.compose(DiffOp.mult(other))
        return self.scale(other)

    def __rmul__(self, other):
        if isinstance(other, Poly):
            return self.lmul(other)
        return self.scale(other)

    def __pow__(self, k: int) -> "DiffOp":
        out = DiffOp.identity(self.dim)
        for _ in range(k):
            out = out.compose(self)
        return out

    def apply_at(self, f: Poly, point):
        return self.apply(f).eval(point)

    # -- text -----------------------------------------------------------
    def to_str(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else default_names(self.dim)
        if not self.terms:
            return "0"
        parts = []
        for a in sorted(self.terms, key=lambda e: (sum(e), e)):
            c = self.terms[a]
            marks = " ".join(
                f"D[{names[i]}]" if k == 1 else f"D[{names[i]}]^{k}" for i, k in enumerate(a) if k
            )
            cs = c.to_str(names)
            if not marks:
                parts.append(f"({cs})")
            else:
                parts.append(f"({cs}) {marks}")
        return " + ".join(parts)

    def __repr__(self):
        return f"DiffOp({self.to_str()})"


def commutator(A: DiffOp, B: DiffOp) -> DiffOp:
    return A.compose(B) - B.compose(A)


def anticommutator(A: DiffOp, B: DiffOp) -> DiffOp:
    return A.compose(B) + B.compose(A)


def compose_all(ops: Iterable[DiffOp]) -> DiffOp:
    """Expand a word A_1 A_2 ... A_k into a single normal-ordered operator."""
    ops = list(ops)
    if not ops:
        raise ValueError("empty operator word")
    out = ops[0]
    for op in ops[1:]:
        out = out.compose(op)
    return out


class OperatorWord:
    """An unexpanded product of operators, e.g. V_{j2} V_{j1 j2} V_{l j1}."""

    __slots__ = ("factors",)

    def __init__(self, factors: Sequence[DiffOp]):
        if not factors:
            raise ValueError("an operator word needs at least one factor")
        dims = {f.dim for f in factors}
        if len(dims) != 1:
            raise DimensionError("factors live in different dimensions")
        self.factors = tuple(factors)

    def expand(self) -> DiffOp:
        return compose_all(self.factors)

    def __len__(self):
        return len(self.factors)

    def apply(self, f: Poly) -> Poly:
        for op in reversed(self.factors):
            f = op.apply(f)
        return f
