"""Complex polynomials in (q, p) and their exact Moyal algebra.

For polynomials the bidifferential Moyal series terminates, so the star
product and bracket here are exact (up to floating-point coefficient
arithmetic).
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Mapping

import numpy as np


class PolyObservable:
    """Finite sum of c_ij q^i p^j with complex coefficients.

    Coefficients are stored in a dict keyed by the exponent pair ``(i, j)``;
    exact zeros are never stored.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping[tuple[int, int], complex] | None = None):
        clean = {}
        for (i, j), c in (terms or {}).items():
            if i < 0 or j < 0:
                raise ValueError(f"negative exponent in monomial {(i, j)}")
            c = complex(c)
            if c != 0:
                clean[(int(i), int(j))] = c
        self._terms = clean

    # construction helpers
    @classmethod
    def constant(cls, c) -> "PolyObservable":
        return cls({(0, 0): c})

    @classmethod
    def q(cls) -> "PolyObservable":
        return cls({(1, 0): 1})

    @classmethod
    def p(cls) -> "PolyObservable":
        return cls({(0, 1): 1})

    @classmethod
    def monomial(cls, i: int, j: int, c=1.0) -> "PolyObservable":
        return cls({(i, j): c})

    @classmethod
    def random(cls, rng: np.random.Generator, degree: int, complex_coeffs=True) -> "PolyObservable":
        terms = {}
        for i in range(degree + 1):
            for j in range(degree + 1 - i):
                c = rng.normal()
                if complex_coeffs:
                    c = c + 1j * rng.normal()
                terms[(i, j)] = c
        return cls(terms)

    @property
    def terms(self) -> dict[tuple[int, int], complex]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        return max((i + j for i, j in self._terms), default=0)

    def coefficient(self, i: int, j: int) -> complex:
        return self._terms.get((i, j), 0j)

    def is_zero(self) -> bool:
        return not self._terms

    def __iter__(self):
        return iter(self._terms.items())

    def __repr__(self):
        if not self._terms:
            return "PolyObservable(0)"
        parts = [f"({c:.6g})*q^{i}*p^{j}" for (i, j), c in sorted(self._terms.items())]
        return "PolyObservable(" + " + ".join(parts) + ")"

    # linear structure
    def __add__(self, other):
        other = _as_poly(other)
        out = defaultdict(complex, self._terms)
        for k, c in other._terms.items():
            out[k] += c
        return PolyObservable(out)

    __radd__ = __add__

    def __neg__(self):
        return PolyObservable({k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        """Pointwise (commutative) product."""
        if not isinstance(other, PolyObservable):
            return PolyObservable({k: c * other for k, c in self._terms.items()})
        out = defaultdict(complex)
        for (i1, j1), c1 in self._terms.items():
            for (i2, j2), c2 in other._terms.items():
                out[(i1 + i2, j1 + j2)] += c1 * c2
        return PolyObservable(out)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return PolyObservable({k: c / scalar for k, c in self._terms.items()})

    def conj(self) -> "PolyObservable":
        return PolyObservable({k: c.conjugate() for k, c in self._terms.items()})

    def derivative(self, n_q: int = 0, n_p: int = 0) -> "PolyObservable":
        out = {}
        for (i, j), c in self._terms.items():
            if i >= n_q and j >= n_p:
                fac = math.perm(i, n_q) * math.perm(j, n_p)
                out[(i - n_q, j - n_p)] = c * fac
        return PolyObservable(out)

    def __call__(self, q, p):
        q = np.asarray(q)
        p = np.asarray(p)
        total = np.zeros(np.broadcast(q, p).shape, dtype=complex)
        for (i, j), c in self._terms.items():
            total = total + c * q**i * p**j
        return total if total.ndim else complex(total)

    def max_abs_difference(self, other) -> float:
        other = _as_poly(other)
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.coefficient(*k) - other.coefficient(*k)) for k in keys), default=0.0)

    def max_abs_coefficient(self) -> float:
        return max((abs(c) for c in self._terms.values()), default=0.0)

    def allclose(self, other, atol=1e-12, rtol=1e-12) -> bool:
        other = _as_poly(other)
        scale = max(self.max_abs_coefficient(), other.max_abs_coefficient(), 1.0)
        return self.max_abs_difference(other) <= atol + rtol * scale

    def __eq__(self, other):
        if not isinstance(other, (PolyObservable, int, float, complex)):
            return NotImplemented
        return self._terms == _as_poly(other)._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))


def _as_poly(x) -> PolyObservable:
    if isinstance(x, PolyObservable):
        return x
    return PolyObservable.constant(x)


def _moyal_terms(f: PolyObservable, g: PolyObservable, hbar: float, odd_only=False):
    """Yield the order-n pieces of the terminating Moyal series.

    Order n contributes (i hbar/2)^n / n! * sum_j C(n,j) (-1)^j
    (d_q^{n-j} d_p^j f)(d_p^{n-j} d_q^j g).
    """
    top = min(f.degree, g.degree)
    for n in range(top + 1):
        if odd_only and n % 2 == 0:
            continue
        piece = PolyObservable()
        for j in range(n + 1):
            df = f.derivative(n - j, j)
            if df.is_zero():
                continue
            dg = g.derivative(j, n - j)
            if dg.is_zero():
                continue
            piece = piece + (math.comb(n, j) * (-1) ** j) * (df * dg)
        if not piece.is_zero():
            yield n, piece * ((0.5j * hbar) ** n / math.factorial(n))


def star(f: PolyObservable, g: PolyObservable, hbar: float) -> PolyObservable:
    f, g = _as_poly(f), _as_poly(g)
    out = PolyObservable()
    for _, piece in _moyal_terms(f, g, hbar):
        out = out + piece
    return out


def bracket(f: PolyObservable, g: PolyObservable, hbar: float) -> PolyObservable:
    """(f*g - g*f)/(i hbar), computed from the odd orders only."""
    f, g = _as_poly(f), _as_poly(g)
    out = PolyObservable()
    for _, piece in _moyal_terms(f, g, hbar, odd_only=True):
        out = out + piece
    # even orders cancel in the commutator, odd ones double
    return out * (2 / (1j * hbar))


def poisson(f: PolyObservable, g: PolyObservable) -> PolyObservable:
    f, g = _as_poly(f), _as_poly(g)
    return f.derivative(1, 0) * g.derivative(0, 1) - f.derivative(0, 1) * g.derivative(1, 0)
