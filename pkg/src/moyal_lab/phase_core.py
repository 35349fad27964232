"""Simulation configuration, the phase-space grid and Liouville integration.

All numerical modules share the same conventions: a uniform, periodic
rectangular grid over (q, p) with nodes ``q_min + i*dq`` (the upper bound is
excluded), complex storage, and the normalized Liouville measure
``dl = dq dp / (2 pi hbar)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import IncompatibleGridsError, InvalidFieldError


@dataclass(frozen=True)
class SimConfig:
    hbar: float = 1.0
    default_tolerance: float = 1e-10

    def __post_init__(self):
        if not (self.hbar > 0 and math.isfinite(self.hbar)):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar!r}")
        if not self.default_tolerance > 0:
            raise ValueError("default_tolerance must be positive")


@dataclass(frozen=True)
class PhaseGrid:
    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int = 256
    n_p: int = 256

    def __post_init__(self):
        if not self.q_max > self.q_min or not self.p_max > self.p_min:
            raise ValueError("grid bounds must satisfy max > min on both axes")
        for n in (self.n_q, self.n_p):
            if int(n) != n or n < 8 or n % 2:
                raise ValueError(f"sample counts must be even integers >= 8, got {n!r}")

    @classmethod
    def square(cls, half_width: float, n: int = 256, center=(0.0, 0.0)) -> "PhaseGrid":
        q0, p0 = center
        return cls(q0 - half_width, q0 + half_width, p0 - half_width, p0 + half_width, n, n)

    @classmethod
    def around(cls, q0: float, p0: float, cfg: SimConfig, sigmas: float = 8.0, n: int = 256):
        """Default desk-scale grid: [-8 sqrt(hbar), 8 sqrt(hbar)]^2 about (q0, p0)."""
        return cls.square(sigmas * math.sqrt(cfg.hbar), n, center=(q0, p0))

    @property
    def dq(self) -> float:
        return (self.q_max - self.q_min) / self.n_q

    @property
    def dp(self) -> float:
        return (self.p_max - self.p_min) / self.n_p

    @property
    def q(self) -> np.ndarray:
        return self.q_min + self.dq * np.arange(self.n_q)

    @property
    def p(self) -> np.ndarray:
        return self.p_min + self.dp * np.arange(self.n_p)

    @property
    def center(self) -> tuple[float, float]:
        return 0.5 * (self.q_min + self.q_max), 0.5 * (self.p_min + self.p_max)

    @property
    def half_widths(self) -> tuple[float, float]:
        return 0.5 * (self.q_max - self.q_min), 0.5 * (self.p_max - self.p_min)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as two (n_q, n_p) arrays, q varying along axis 0."""
        return np.meshgrid(self.q, self.p, indexing="ij")

    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        """Angular wavenumbers (FFT ordering) dual to q and p."""
        kq = 2 * np.pi * np.fft.fftfreq(self.n_q, self.dq)
        kp = 2 * np.pi * np.fft.fftfreq(self.n_p, self.dp)
        return kq, kp


@dataclass(frozen=True, eq=False)
class GridField:
    """Complex samples of a phase-space function on a :class:`PhaseGrid`.

    ``support_warning`` is set by operations whose accuracy contract requires
    the inputs to vanish near the periodic boundary and found that they do not.
    """

    grid: PhaseGrid
    values: np.ndarray
    support_warning: bool = field(default=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        expected = (self.grid.n_q, self.grid.n_p)
        if vals.shape != expected:
            raise ValueError(f"values have shape {vals.shape}, grid needs {expected}")
        if not np.all(np.isfinite(vals)):
            i, j = np.argwhere(~np.isfinite(vals))[0]
            loc = (float(self.grid.q[i]), float(self.grid.p[j]))
            raise InvalidFieldError(f"non-finite field value at (q, p) = {loc}", loc)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def _check(self, other: "GridField"):
        if other.grid != self.grid:
            raise IncompatibleGridsError("fields live on different grids")

    def _combine(self, other, op):
        if isinstance(other, GridField):
            self._check(other)
            return GridField(self.grid, op(self.values, other.values),
                             self.support_warning or other.support_warning)
        return GridField(self.grid, op(self.values, other), self.support_warning)

    def __add__(self, other):
        return self._combine(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, other):
        return self._combine(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._combine(other, np.divide)

    def __neg__(self):
        return GridField(self.grid, -self.values, self.support_warning)

    def conj(self) -> "GridField":
        return GridField(self.grid, self.values.conj(), self.support_warning)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())


def integrate_liouville(f: GridField, cfg: SimConfig) -> complex:
    """Integral of ``f`` against dl = dq dp / (2 pi hbar).

    On the periodic grid the trapezoidal rule reduces to the plain node sum,
    which is spectrally accurate for smooth fields that decay at the boundary.
    """
    if not np.all(np.isfinite(f.values)):
        raise InvalidFieldError("field contains non-finite values")
    g = f.grid
    total = f.values.sum() * g.dq * g.dp / (2 * np.pi * cfg.hbar)
    return complex(total)


def rasterize(f: Callable, grid: PhaseGrid) -> GridField:
    """Sample ``f(q, p)`` at every grid node.

    ``f`` should accept broadcast numpy arrays; scalar-only callables are
    retried element by element.
    """
    Q, P = grid.mesh()
    with np.errstate(all="ignore"):
        try:
            vals = np.asarray(f(Q, P), dtype=complex)
        except (TypeError, ValueError):
            vals = None
        if vals is not None and vals.ndim == 0:
            vals = np.full(Q.shape, vals)
        elif vals is None or vals.shape != Q.shape:
            vals = np.vectorize(lambda a, b: complex(f(a, b)))(Q, P)
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        loc = (float(Q[i, j]), float(P[i, j]))
        raise InvalidFieldError(f"function is not finite at node (q, p) = {loc}", loc)
    return GridField(grid, vals)
