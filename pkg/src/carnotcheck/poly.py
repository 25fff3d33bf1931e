"""Sparse multivariate polynomials with exact rational coefficients.

A :class:`Poly` lives in a fixed ambient dimension and stores a mapping from
exponent tuples to nonzero :class:`fractions.Fraction` coefficients.  All ring
operations return canonical values (no zero terms), so equality is term-wise.
"""

from __future__ import annotations

import ast
import math
import re
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

Exponent = tuple[int, ...]


class DimensionError(ValueError):
    pass


def _as_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, (int, np.integer)):
        return Fraction(int(c))
    if isinstance(c, str):
        return Fraction(c)
    if isinstance(c, float):
        return Fraction(c)
    raise TypeError(f"cannot use {type(c).__name__} as an exact coefficient")


def grlex_key(e: Exponent):
    """Graded-lex key: total degree first, then lexicographic on exponents."""
    return (sum(e), e)


class Poly:
    __slots__ = ("dim", "terms", "_hash")

    def __init__(self, dim: int, terms: Mapping[Exponent, object] | None = None):
        if dim < 0:
            raise DimensionError("dimension must be non-negative")
        self.dim = dim
        clean: dict[Exponent, Fraction] = {}
        if terms:
            for e, c in terms.items():
                e = tuple(int(k) for k in e)
                if len(e) != dim:
                    raise DimensionError(f"exponent {e} does not match dimension {dim}")
                if any(k < 0 for k in e):
                    raise ValueError(f"negative exponent in {e}")
                c = _as_fraction(c)
                if c:
                    clean[e] = clean.get(e, Fraction(0)) + c
                    if not clean[e]:
                        del clean[e]
        self.terms = clean
        self._hash = None

    # -- constructors ---------------------------------------------------
    @classmethod
    def _raw(cls, dim: int, terms: dict[Exponent, Fraction]) -> "Poly":
        p = cls.__new__(cls)
        p.dim = dim
        p.terms = terms
        p._hash = None
        return p

    @classmethod
    def zero(cls, dim: int) -> "Poly":
        return cls._raw(dim, {})

    @classmethod
    def const(cls, dim: int, c=1) -> "Poly":
        c = _as_fraction(c)
        return cls._raw(dim, {(0,) * dim: c} if c else {})

    @classmethod
    def var(cls, dim: int, i: int) -> "Poly":
        if not 0 <= i < dim:
            raise IndexError(f"coordinate index {i} out of range for dimension {dim}")
        e = [0] * dim
        e[i] = 1
        return cls._raw(dim, {tuple(e): Fraction(1)})

    @classmethod
    def gens(cls, dim: int) -> list["Poly"]:
        return [cls.var(dim, i) for i in range(dim)]

    # -- basic protocol -------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=-1)

    def constant_term(self) -> Fraction:
        return self.terms.get((0,) * self.dim, Fraction(0))

    def coeff(self, e: Sequence[int]) -> Fraction:
        return self.terms.get(tuple(e), Fraction(0))

    def __eq__(self, other) -> bool:
        if isinstance(other, Poly):
            return self.dim == other.dim and self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == ({(0,) * self.dim: Fraction(other)} if other else {})
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.dim, frozenset(self.terms.items())))
        return self._hash

    def __bool__(self):
        return bool(self.terms)

    def _coerce(self, other) -> "Poly":
        if isinstance(other, Poly):
            if other.dim != self.dim:
                raise DimensionError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        return Poly.const(self.dim, other)

    # -- ring operations ------------------------------------------------
    def __add__(self, other) -> "Poly":
        other = self._coerce(other)
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e)
            if s is None:
                out[e] = c
            else:
                s += c
                if s:
                    out[e] = s
                else:
                    del out[e]
        return Poly._raw(self.dim, out)

    __radd__ = __add__

    def __neg__(self) -> "Poly":
        return Poly._raw(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other) -> "Poly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Poly":
        return self._coerce(other) - self

    def scale(self, s) -> "Poly":
        s = _as_fraction(s)
        if not s:
            return Poly.zero(self.dim)
        return Poly._raw(self.dim, {e: c * s for e, c in self.terms.items()})

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            return self.scale(other)
        other = self._coerce(other)
        if len(self.terms) > len(other.terms):
            a, b = other.terms, self.terms
        else:
            a, b = self.terms, other.terms
        out: dict[Exponent, Fraction] = {}
        for ea, ca in a.items():
            for eb, cb in b.items():
                e = tuple(x + y for x, y in zip(ea, eb))
                s = out.get(e)
                out[e] = ca * cb if s is None else s + ca * cb
        return Poly._raw(self.dim, {e: c for e, c in out.items() if c})

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise ValueError("negative powers are not polynomials")
        result = Poly.const(self.dim, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- calculus -------------------------------------------------------
    def derive(self, i: int, k: int = 1) -> "Poly":
        """Exact k-th partial derivative in coordinate ``i``."""
        if not 0 <= i < self.dim:
            raise IndexError(f"coordinate index {i} out of range for dimension {self.dim}")
        out: dict[Exponent, Fraction] = {}
        for e, c in self.terms.items():
            if e[i] < k:
                continue
            f = math.perm(e[i], k)
            ne = list(e)
            ne[i] -= k
            out[tuple(ne)] = c * f
        return Poly._raw(self.dim, out)

    def derive_multi(self, alpha: Sequence[int]) -> "Poly":
        p = self
        for i, k in enumerate(alpha):
            if k:
                p = p.derive(i, k)
        return p

    # -- evaluation -----------------------------------------------------
    def __call__(self, point):
        return self.eval(point)

    def eval(self, point):
        """Evaluate at a point.  Exact when every coordinate is rational."""
        if len(point) != self.dim:
            raise DimensionError(f"point has {len(point)} coordinates, expected {self.dim}")
        exact = all(isinstance(v, (int, Fraction, np.integer)) for v in point)
        if exact:
            pt = [Fraction(int(v)) if isinstance(v, np.integer) else Fraction(v) for v in point]
            total = Fraction(0)
        else:
            pt = [float(v) for v in point]
            total = 0.0
        for e, c in self.terms.items():
            t = c if exact else float(c)
            for v, k in zip(pt, e):
                if k:
                    t = t * v**k
            total += t
        return total

    def eval_array(self, pts: np.ndarray) -> np.ndarray:
        """Vectorised float evaluation; ``pts`` has shape (m, dim)."""
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.dim:
            raise DimensionError(f"points have {pts.shape[1]} coordinates, expected {self.dim}")
        m = pts.shape[0]
        out = np.zeros(m)
        if not self.terms:
            return out
        maxdeg = [0] * self.dim
        for e in self.terms:
            for i, k in enumerate(e):
                if k > maxdeg[i]:
                    maxdeg[i] = k
        powers = []
        for i in range(self.dim):
            col = pts[:, i]
            pw = [None, col]
            for _ in range(2, maxdeg[i] + 1):
                pw.append(pw[-1] * col)
            powers.append(pw)
        for e, c in self.terms.items():
            t = None
            for i, k in enumerate(e):
                if k:
                    t = powers[i][k] if t is None else t * powers[i][k]
            if t is None:
                out += float(c)
            else:
                out += float(c) * t
        return out

    def compose(self, subs: Sequence["Poly"]) -> "Poly":
        """Substitute polynomial ``subs[i]`` for coordinate i."""
        if len(subs) != self.dim:
            raise DimensionError("substitution list must match dimension")
        target = subs[0].dim if subs else 0
        out = Poly.zero(target)
        cache: dict[tuple[int, int], Poly] = {}
        for e, c in self.terms.items():
            t = Poly.const(target, c)
            for i, k in enumerate(e):
                if k:
                    key = (i, k)
                    if key not in cache:
                        cache[key] = subs[i] ** k
                    t = t * cache[key]
            out = out + t
        return out

    # -- text format ----------------------------------------------------
    def sorted_terms(self) -> list[tuple[Exponent, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))

    def to_str(self, names: Sequence[str] | None = None) -> str:
        names = list(names) if names is not None else default_names(self.dim)
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            s = f"{c.numerator}/{c.denominator}"
            mono = " ".join(
                names[i] if k == 1 else f"{names[i]}^{k}" for i, k in enumerate(e) if k
            )
            parts.append(f"{s} * {mono}" if mono else s)
        return " + ".join(parts)

    def __str__(self):
        return self.to_str()

    def __repr__(self):
        return f"Poly({self.dim}, {self.to_str()!r})"


def default_names(dim: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dim)]


_TERM_RE = re.compile(r"^\s*(?P<coeff>[-+]?\d+(?:/\d+)?)\s*(?:\*\s*(?P<mono>.+))?$")


def parse_poly(text: str, names: Sequence[str] | None = None, dim: int | None = None) -> Poly:
    """Inverse of :meth:`Poly.to_str`.

    Terms are ``coeff * v1^a1 v2^a2 ...`` joined by `` + ``; a bare monomial
    without coefficient is accepted too.
    """
    if names is None:
        if dim is None:
            raise ValueError("either names or dim is required")
        names = default_names(dim)
    names = list(names)
    dim = len(names)
    index = {n: i for i, n in enumerate(names)}
    text = text.strip()
    if text == "0":
        return Poly.zero(dim)
    terms: dict[Exponent, Fraction] = {}
    for raw in text.split(" + "):
        raw = raw.strip()
        m = _TERM_RE.match(raw)
        if m:
            coeff = Fraction(m.group("coeff"))
            mono = m.group("mono") or ""
        else:
            coeff, mono = Fraction(1), raw
            if mono.startswith("-"):
                coeff, mono = Fraction(-1), mono[1:]
        e = [0] * dim
        for factor in mono.split():
            base, _, power = factor.partition("^")
            if base not in index:
                raise ValueError(f"unknown variable {base!r} in term {raw!r}")
            e[index[base]] += int(power) if power else 1
        key = tuple(e)
        terms[key] = terms.get(key, Fraction(0)) + coeff
    return Poly(dim, terms)


def parse_expr(text: str, names: Sequence[str]) -> Poly:
    """Parse an arithmetic expression such as ``"x^2 - 3/2*x*y + (z+1)^2"``.

    Supports ``+ - * / ^ **`` and parentheses; division only by constants.
    """
    names = list(names)
    dim = len(names)
    index = {n: i for i, n in enumerate(names)}
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse polynomial {text!r}: {exc.msg}") from None

    def walk(node) -> Poly:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return Poly.const(dim, Fraction(str(node.value)))
        if isinstance(node, ast.Name):
            if node.id not in index:
                raise ValueError(f"unknown variable {node.id!r} in {text!r}; expected one of {names}")
            return Poly.var(dim, index[node.id])
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            a, b = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div):
                if b.degree() > 0 or b.is_zero():
                    raise ValueError(f"division by a non-constant or zero in {text!r}")
                return a.scale(1 / b.constant_term())
            if isinstance(node.op, ast.Pow):
                if b.degree() > 0 or b.constant_term().denominator != 1 or b.constant_term() < 0:
                    raise ValueError(f"exponents must be non-negative integers in {text!r}")
                return a ** int(b.constant_term())
        raise ValueError(f"unsupported syntax in polynomial {text!r}")

    return walk(tree)


def monomial(alpha: Sequence[int]) -> Poly:
    return Poly._raw(len(alpha), {tuple(int(a) for a in alpha): Fraction(1)})


def multi_factorial(alpha: Iterable[int]) -> int:
    out = 1
    for a in alpha:
        out *= math.factorial(a)
    return out


def multi_indices(n: int, total: int) -> list[Exponent]:
    """All exponent tuples of length n with the given total degree, grlex order."""
    if n == 0:
        return [()] if total == 0 else []
    out: list[Exponent] = []

    def rec(prefix: list[int], remaining: int, slots: int):
        if slots == 1:
            out.append(tuple(prefix + [remaining]))
            return
        for k in range(remaining, -1, -1):
            rec(prefix + [k], remaining - k, slots - 1)

    rec([], total, n)
    return sorted(out, key=grlex_key)


def random_poly(rng: np.random.Generator, dim: int, max_deg: int, n_terms: int = 6,
                coeff_range: int = 5, denominators: Sequence[int] = (1, 2, 3)) -> Poly:
    """Random sparse polynomial with small rational coefficients (test helper)."""
    terms: dict[Exponent, Fraction] = {}
    for _ in range(n_terms):
        deg = int(rng.integers(0, max_deg + 1))
        e = [0] * dim
        for _ in range(deg):
            e[int(rng.integers(0, dim))] += 1
        num = int(rng.integers(-coeff_range, coeff_range + 1))
        den = int(rng.choice(denominators))
        terms[tuple(e)] = terms.get(tuple(e), Fraction(0)) + Fraction(num, den)
    return Poly(dim, terms)


def dual_weight(alpha: Sequence[int], horizontal: int, dim: int | None = None) -> Poly:
    """The dual polynomial eta^alpha / alpha! over the first ``horizontal`` coordinates.

    ``alpha`` may be given over the horizontal coordinates only, or over all
    ``dim`` coordinates as long as the non-horizontal entries are zero.
    """
    alpha = [int(a) for a in alpha]
    dim = horizontal if dim is None else dim
    if len(alpha) == dim and dim != horizontal:
        if any(alpha[horizontal:]):
            raise ValueError(f"dual weights live on horizontal coordinates only; got {alpha}")
        alpha = alpha[:horizontal]
    if len(alpha) != horizontal:
        raise DimensionError(f"multi-index {alpha} has wrong length for {horizontal} horizontal coordinates")
    e = tuple(alpha) + (0,) * (dim - horizontal)
    return Poly._raw(dim, {e: Fraction(1, multi_factorial(alpha))})
