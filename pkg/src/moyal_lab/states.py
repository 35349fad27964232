"""Coherent and squeezed Gaussian states.

All three families of initial states used here are uncorrelated Gaussians
in (q, p), so a single type holding the means and the two variances covers
them; the squeezing parameter gamma and the quartic-state width w are
recovered as ratios of the variances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .phase_core import GridField, PhaseGrid, SimConfig, rasterize


@dataclass(frozen=True)
class GaussianState:
    q0: float
    p0: float
    var_q: float
    var_p: float

    def __post_init__(self):
        if not (self.var_q > 0 and self.var_p > 0):
            raise DomainError("Gaussian variances must be positive")

    @property
    def gamma(self) -> float:
        """Squeezing parameter: var_p / var_q = gamma**2 for an ideal squeezed state."""
        return math.sqrt(self.var_p / self.var_q)

    @property
    def w(self) -> float:
        """Width parameter of a quartic coherent state (inverse of gamma)."""
        return math.sqrt(self.var_q / self.var_p)

    @property
    def uncertainty_product(self) -> float:
        return self.var_q * self.var_p

    def satisfies_heisenberg(self, cfg: SimConfig, tol: float | None = None) -> bool:
        tol = cfg.default_tolerance if tol is None else tol
        return self.uncertainty_product >= cfg.hbar**2 / 4 - tol

    def is_pure(self, cfg: SimConfig, tol: float | None = None) -> bool:
        tol = cfg.default_tolerance if tol is None else tol
        return abs(self.uncertainty_product - cfg.hbar**2 / 4) <= tol

    def covariance(self) -> np.ndarray:
        return np.diag([self.var_q, self.var_p])

    def mean(self) -> np.ndarray:
        return np.array([self.q0, self.p0])

    def moment(self, i: int, j: int) -> float:
        """Exact E[q^i p^j] (q and p are independent)."""
        return _raw_moment(self.q0, self.var_q, i) * _raw_moment(self.p0, self.var_p, j)

    def default_grid(self, cfg: SimConfig, n: int = 256, sigmas: float = 8.0) -> PhaseGrid:
        """Square grid about the centre spanning at least ``sigmas`` standard deviations."""
        half = sigmas * max(math.sqrt(cfg.hbar), math.sqrt(self.var_q), math.sqrt(self.var_p))
        return PhaseGrid.square(half, n, center=(self.q0, self.p0))


def _raw_moment(mu: float, var: float, n: int) -> float:
    # E[(mu + sigma Z)^n] = sum_{k even} C(n,k) mu^(n-k) var^(k/2) (k-1)!!
    total = 0.0
    for k in range(0, n + 1, 2):
        dfact = math.prod(range(k - 1, 0, -2)) if k else 1
        total += math.comb(n, k) * mu ** (n - k) * var ** (k // 2) * dfact
    return total


def coherent(q0: float, p0: float, cfg: SimConfig) -> GaussianState:
    half = cfg.hbar / 2
    return GaussianState(float(q0), float(p0), half, half)


def squeezed(q0: float, p0: float, gamma: float, cfg: SimConfig) -> GaussianState:
    if not gamma > 0:
        raise DomainError(f"squeezing parameter gamma must be positive, got {gamma!r}")
    return GaussianState(float(q0), float(p0), cfg.hbar / gamma / 2, cfg.hbar * gamma / 2)


def quartic_coherent(q0: float, p0: float, w: float, cfg: SimConfig) -> GaussianState:
    """Coherent state of the quartic system, widths (hbar w / 2, hbar / (2 w))."""
    if not w > 0:
        raise DomainError(f"width parameter w must be positive, got {w!r}")
    return GaussianState(float(q0), float(p0), cfg.hbar * w / 2, cfg.hbar / w / 2)


def density(s: GaussianState, q, p, cfg: SimConfig):
    """Phase-space density normalized so that the integral over dl is 1.

    A minimum-uncertainty state peaks at exactly 2.
    """
    pref = cfg.hbar / math.sqrt(s.var_q * s.var_p)
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    val = pref * np.exp(-((q - s.q0) ** 2) / (2 * s.var_q) - (p - s.p0) ** 2 / (2 * s.var_p))
    return val if val.ndim else float(val)


def rasterize_state(s: GaussianState, grid: PhaseGrid, cfg: SimConfig) -> GridField:
    return rasterize(lambda q, p: density(s, q, p, cfg), grid)
