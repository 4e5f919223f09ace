"""Exact multivariate polynomials in the state variables and the formal
parameter eps, and polynomial vector fields built from them.

A PolyExpr over dimension d is a map from multi-indices (e_1, ..., e_d,
e_eps) to Surd coefficients; zero coefficients are never stored, so two
expressions are equal iff their term maps are identical.  VectorField
wraps d components and provides the differential-geometric operations:
Lie bracket, divergence, directional derivative and iterated ad powers.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Iterable, Sequence, Union

import numpy as np

from .surd import ONE, ZERO, Surd

Coeff = Union[int, Fraction, Surd]


def _surd(c: Coeff) -> Surd:
    return c if isinstance(c, Surd) else Surd.of(c)


class PolyExpr:
    """Polynomial in x_1..x_d and eps with exact Surd coefficients."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms=None):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        clean: dict[tuple, Surd] = {}
        if terms:
            for key, c in (terms.items() if isinstance(terms, dict) else terms):
                key = tuple(key)
                if len(key) != dim + 1:
                    raise ValueError(f"multi-index {key} does not match dim {dim}")
                if any(e < 0 for e in key):
                    raise ValueError("negative exponent in multi-index")
                c = _surd(c)
                if not c.is_zero():
                    acc = clean.get(key)
                    c = c if acc is None else acc + c
                    if c.is_zero():
                        del clean[key]
                    else:
                        clean[key] = c
        self.terms = clean

    # -- constructors --------------------------------------------------

    @staticmethod
    def zero(dim: int) -> "PolyExpr":
        return PolyExpr(dim)

    @staticmethod
    def const(dim: int, c: Coeff) -> "PolyExpr":
        return PolyExpr(dim, {(0,) * (dim + 1): _surd(c)})

    @staticmethod
    def var(dim: int, i: int) -> "PolyExpr":
        """The coordinate x_{i+1} (0-based index i)."""
        if not 0 <= i < dim:
            raise ValueError(f"variable index {i} out of range for dim {dim}")
        key = [0] * (dim + 1)
        key[i] = 1
        return PolyExpr(dim, {tuple(key): ONE})

    @staticmethod
    def eps(dim: int) -> "PolyExpr":
        key = [0] * (dim + 1)
        key[dim] = 1
        return PolyExpr(dim, {tuple(key): ONE})

    # -- queries ---------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(all(e == 0 for e in k) for k in self.terms)

    def eps_degree(self) -> int:
        return max((k[self.dim] for k in self.terms), default=0)

    def state_degree(self) -> int:
        return max((sum(k[: self.dim]) for k in self.terms), default=0)

    def constant_value(self) -> Surd:
        if self.is_zero():
            return ZERO
        if not self.is_constant():
            raise ValueError("not a constant polynomial")
        return next(iter(self.terms.values()))

    # -- ring operations -------------------------------------------------

    def _check(self, other: "PolyExpr"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other):
        if isinstance(other, (int, Fraction, Surd)):
            other = PolyExpr.const(self.dim, other)
        self._check(other)
        acc = dict(self.terms)
        for k, c in other.terms.items():
            acc[k] = acc[k] + c if k in acc else c
        return PolyExpr(self.dim, acc)

    __radd__ = __add__

    def __neg__(self):
        return PolyExpr(self.dim, {k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction, Surd)):
            other = PolyExpr.const(self.dim, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, Surd)):
            c = _surd(other)
            return PolyExpr(self.dim, {k: v * c for k, v in self.terms.items()})
        self._check(other)
        acc: dict[tuple, Surd] = {}
        for k1, c1 in self.terms.items():
            for k2, c2 in other.terms.items():
                k = tuple(a + b for a, b in zip(k1, k2))
                c = c1 * c2
                if k in acc:
                    acc[k] = acc[k] + c
                else:
                    acc[k] = c
        return PolyExpr(self.dim, acc)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("polynomial powers must be nonnegative integers")
        out = PolyExpr.const(self.dim, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out

    def partial(self, i: int) -> "PolyExpr":
        """d/dx_{i+1}; eps is a parameter and is never differentiated."""
        if not 0 <= i < self.dim:
            raise ValueError(f"variable index {i} out of range")
        acc = {}
        for k, c in self.terms.items():
            if k[i] == 0:
                continue
            kk = list(k)
            kk[i] -= 1
            acc[tuple(kk)] = c * k[i]
        return PolyExpr(self.dim, acc)

    # -- evaluation --------------------------------------------------------

    def eval(self, x: Sequence[Coeff], eps: Coeff = 0) -> Surd:
        """Exact evaluation at a rational (or Surd) point."""
        if len(x) != self.dim:
            raise ValueError("point dimension mismatch")
        xs = [_surd(v) for v in x]
        e = _surd(eps)
        total = ZERO
        for k, c in self.terms.items():
            term = c
            for i, p in enumerate(k[: self.dim]):
                if p:
                    term = term * xs[i] ** p
            if k[self.dim]:
                term = term * e ** k[self.dim]
            total = total + term
        return total

    def compile(self) -> Callable[[np.ndarray, float], np.ndarray]:
        """Float evaluator for arrays of states, shape (..., d)."""
        items = [
            (float(c), k[: self.dim], k[self.dim]) for k, c in self.terms.items()
        ]

        def ev(x: np.ndarray, eps: float = 0.0) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            out = np.zeros(x.shape[:-1])
            for coef, exps, eeps in items:
                term = np.full(x.shape[:-1], coef * eps**eeps)
                for i, p in enumerate(exps):
                    if p == 1:
                        term = term * x[..., i]
                    elif p:
                        term = term * x[..., i] ** p
                out += term
            return out

        return ev

    # -- identity ------------------------------------------------------------

    def __eq__(self, other):
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, frozenset(self.terms.items())))

    def __repr__(self):
        from .parse import format_scalar

        return f"PolyExpr({format_scalar(self)!r}, dim={self.dim})"


class VectorField:
    """A polynomial vector field X = sum_j X^j d/dx_j on R^d."""

    __slots__ = ("dim", "components")

    def __init__(self, components: Iterable[PolyExpr]):
        comps = tuple(components)
        if not comps:
            raise ValueError("vector field needs at least one component")
        dim = comps[0].dim
        if any(c.dim != dim for c in comps):
            raise ValueError("components disagree on dimension")
        if len(comps) != dim:
            raise ValueError(f"expected {dim} components, got {len(comps)}")
        self.dim = dim
        self.components = comps

    @staticmethod
    def zero(dim: int) -> "VectorField":
        return VectorField([PolyExpr.zero(dim)] * dim)

    @staticmethod
    def basis(dim: int, i: int, scale: Coeff = 1) -> "VectorField":
        """scale * d/dx_{i+1}."""
        comps = [PolyExpr.zero(dim) for _ in range(dim)]
        comps[i] = PolyExpr.const(dim, scale)
        return VectorField(comps)

    def _check(self, other: "VectorField"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def __add__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(a + b for a, b in zip(self.components, other.components))

    def __sub__(self, other: "VectorField") -> "VectorField":
        self._check(other)
        return VectorField(a - b for a, b in zip(self.components, other.components))

    def __neg__(self) -> "VectorField":
        return VectorField(-c for c in self.components)

    def scale(self, c: Coeff) -> "VectorField":
        return VectorField(comp * c for comp in self.components)

    def scale_poly(self, p: PolyExpr) -> "VectorField":
        return VectorField(comp * p for comp in self.components)

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def constant_vector(self):
        """Float vector if every component is constant, else None."""
        if all(c.is_constant() for c in self.components):
            return np.array([float(c.constant_value()) for c in self.components])
        return None

    def apply(self, f: PolyExpr) -> PolyExpr:
        """Directional derivative Xf = sum_j X^j df/dx_j."""
        if f.dim != self.dim:
            raise ValueError("dimension mismatch")
        out = PolyExpr.zero(self.dim)
        for j, comp in enumerate(self.components):
            if not comp.is_zero():
                out = out + comp * f.partial(j)
        return out

    def divergence(self) -> PolyExpr:
        out = PolyExpr.zero(self.dim)
        for j, comp in enumerate(self.components):
            out = out + comp.partial(j)
        return out

    def eval(self, x: Sequence[Coeff], eps: Coeff = 0) -> list[Surd]:
        return [c.eval(x, eps) for c in self.components]

    def compile(self) -> Callable[[np.ndarray, float], np.ndarray]:
        evs = [c.compile() for c in self.components]

        def ev(x: np.ndarray, eps: float = 0.0) -> np.ndarray:
            x = np.asarray(x, dtype=float)
            return np.stack([f(x, eps) for f in evs], axis=-1)

        return ev

    def __eq__(self, other):
        if not isinstance(other, VectorField):
            return NotImplemented
        return self.dim == other.dim and self.components == other.components

    def __hash__(self):
        return hash((self.dim, self.components))

    def __repr__(self):
        from .parse import format_field

        return f"VectorField({format_field(self)!r}, dim={self.dim})"


def lie_bracket(X: VectorField, Y: VectorField) -> VectorField:
    """Commutator [X, Y]^j = sum_k (X^k dY^j/dx_k - Y^k dX^j/dx_k)."""
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    comps = []
    for j in range(X.dim):
        acc = PolyExpr.zero(X.dim)
        yj, xj = Y.components[j], X.components[j]
        for k in range(X.dim):
            xk, yk = X.components[k], Y.components[k]
            if not xk.is_zero():
                acc = acc + xk * yj.partial(k)
            if not yk.is_zero():
                acc = acc - yk * xj.partial(k)
        comps.append(acc)
    return VectorField(comps)


def divergence(X: VectorField) -> PolyExpr:
    return X.divergence()


def apply_to_scalar(X: VectorField, f: PolyExpr) -> PolyExpr:
    return X.apply(f)


def ad_power(X: VectorField, Y: VectorField, j: int) -> VectorField:
    """ad^0 X(Y) = Y and ad^j X(Y) = ad^{j-1} X([X, Y])."""
    if X.dim != Y.dim:
        raise ValueError(f"dimension mismatch: {X.dim} vs {Y.dim}")
    if not isinstance(j, int) or j < 0:
        raise ValueError("ad power must be a nonnegative integer")
    out = Y
    for _ in range(j):
        out = lie_bracket(X, out)
    return out
