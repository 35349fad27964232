"""Independent numerical checks for the closed forms.

* ``evolve_wigner``: RK4 integration of d rho/dt = [[H, rho]] on a periodic
  grid, with spectral derivatives.  For polynomial H the Moyal bracket is a
  finite differential operator, built once from the polynomial coefficients.
* ``classical_transport``: exact Gaussian moment transport for quadratic H.
* ``quadrature_expectation``: Gauss-Hermite integration of a field against a
  Gaussian state, with a 64 vs 128 node convergence certificate.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
import scipy.fft as sfft

from .errors import (DomainTooSmallError, NormalizationError, QuadratureDivergenceError,
                     StepSizeError)
from .phase_core import GridField, PhaseGrid, SimConfig, integrate_liouville, rasterize
from .quadratic_flow import CovarianceMatrix, QuadraticHamiltonian, flow_matrices
from .star_algebra.polynomial import PolyObservable
from .states import GaussianState

NORM_DRIFT_TOL = 1e-6
IMAG_TOL = 1e-8
BOUNDARY_MASS_TOL = 1e-6
BOUNDARY_BAND = 0.05          # outer fraction of each axis counted as boundary
FILTER_FRACTION = 2.0 / 3.0   # radial spectral cutoff, fraction of the Nyquist wavenumber
RK4_IMAG_REACH = 2.0 * math.sqrt(2.0)

QUAD_LOW, QUAD_HIGH = 64, 128
QUAD_RTOL = 1e-6


# ---------------------------------------------------------------- quadrature

def _gauss_hermite(field_fn, state: GaussianState, n: int) -> tuple[float, float]:
    x, wts = np.polynomial.hermite.hermgauss(n)
    X, Y = np.meshgrid(x, x, indexing="ij")
    W = np.outer(wts, wts) / math.pi
    q = state.q0 + math.sqrt(2 * state.var_q) * X
    p = state.p0 + math.sqrt(2 * state.var_p) * Y
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(field_fn(q, p), dtype=float)
        vals = np.broadcast_to(vals, q.shape)
        return float(np.sum(W * vals)), float(np.sum(W * np.abs(vals)))


def quadrature_expectation(field_fn: Callable, state: GaussianState, cfg: SimConfig,
                           orders: tuple[int, int] = (QUAD_LOW, QUAD_HIGH), rtol: float = QUAD_RTOL) -> float:
    """Integral of field * rho over dl for a Gaussian rho, certified by order doubling.

    The integrand is sampled at Gauss-Hermite nodes scaled to the state's
    widths.  If the two orders disagree by more than ``rtol`` (relative to the
    result, floored at 1e-12 of the absolute integral) or anything overflows,
    the integral is declared divergent.
    """
    lo_n, hi_n = orders
    lo, _ = _gauss_hermite(field_fn, state, lo_n)
    hi, scale = _gauss_hermite(field_fn, state, hi_n)
    if not (math.isfinite(lo) and math.isfinite(hi) and math.isfinite(scale)):
        raise QuadratureDivergenceError(
            f"quadrature overflowed ({lo_n} nodes: {lo!r}, {hi_n} nodes: {hi!r})", lo, hi)
    floor = max(abs(hi), 1e-12 * scale)
    if abs(hi - lo) > rtol * floor:
        raise QuadratureDivergenceError(
            f"no convergence: {lo_n} nodes give {lo:.12g}, {hi_n} nodes give {hi:.12g}", lo, hi)
    return hi


# ------------------------------------------------------- classical transport

class TransportedMoments(NamedTuple):
    mean: np.ndarray
    covariance: CovarianceMatrix


def classical_transport(H: QuadraticHamiltonian, rho0: GaussianState, t: float) -> TransportedMoments:
    M = flow_matrices(H, t)
    mean = M @ rho0.mean()
    cov = M @ rho0.covariance() @ M.T
    return TransportedMoments(mean, CovarianceMatrix(0.5 * (cov + cov.T)))


def grid_moments(rho: GridField, cfg: SimConfig) -> TransportedMoments:
    """Means and covariance of a grid Wigner function (plain node sums)."""
    Q, P = rho.grid.mesh()
    r = rho.values.real
    norm = integrate_liouville(rho, cfg).real

    def avg(f):
        return float(np.sum(f * r)) * rho.grid.dq * rho.grid.dp / (2 * math.pi * cfg.hbar) / norm

    mq, mp = avg(Q), avg(P)
    vq = avg((Q - mq) ** 2)
    vp = avg((P - mp) ** 2)
    cqp = avg((Q - mq) * (P - mp))
    return TransportedMoments(np.array([mq, mp]), CovarianceMatrix(np.array([[vq, cqp], [cqp, vp]])))


# ---------------------------------------------------------- Wigner evolution

def bracket_operator(H: PolyObservable, cfg: SimConfig, quantum: bool = True
                     ) -> dict[tuple[int, int], PolyObservable]:
    """[[H, .]] as {(order_q, order_p): coefficient polynomial}.

    Only odd orders of the Moyal series survive in the bracket; order n
    carries (-hbar^2/4)^((n-1)/2) / n!.  ``quantum=False`` keeps n = 1 (the
    Poisson bracket) only.
    """
    if H.degree > 4:
        raise ValueError("bracket operator is only built for deg H <= 4")
    ops: dict[tuple[int, int], PolyObservable] = defaultdict(PolyObservable)
    top = H.degree if quantum else 1
    for n in range(1, top + 1, 2):
        pref = (-cfg.hbar**2 / 4) ** ((n - 1) // 2) / math.factorial(n)
        for j in range(n + 1):
            dH = H.derivative(n - j, j)
            if dH.is_zero():
                continue
            ops[(j, n - j)] = ops[(j, n - j)] + dH * (pref * math.comb(n, j) * (-1) ** j)
    return {k: v for k, v in ops.items() if not v.is_zero()}


@dataclass
class EvolutionRun:
    initial: GridField
    hamiltonian: PolyObservable
    dt: float
    n_steps: int
    snapshots: Sequence[int] = ()
    quantum: bool = True
    filtered: bool = True

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("step count must be at least 1")
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        snaps = sorted(set(self.snapshots) | {0, self.n_steps})
        if snaps[0] < 0 or snaps[-1] > self.n_steps:
            raise ValueError("snapshot steps must lie in [0, n_steps]")
        self.snapshots = tuple(snaps)


@dataclass
class EvolutionResult:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    norm_drift: float = 0.0
    max_imag: float = 0.0
    boundary_mass: float = 0.0


class _Operator:
    """Precomputed spectral pieces of rho -> [[H, rho]] on one grid."""

    def __init__(self, ops, grid: PhaseGrid, filtered: bool):
        kq, kp = grid.wavenumbers()
        KQ, KP = np.meshgrid(kq, kp, indexing="ij")
        if filtered:
            kc = FILTER_FRACTION * min(math.pi / grid.dq, math.pi / grid.dp)
            self.mask = (KQ**2 + KP**2) <= kc**2
            self.k_max = kc
        else:
            self.mask = np.ones(KQ.shape, dtype=bool)
            self.k_max = math.hypot(np.abs(kq).max(), np.abs(kp).max())
        self.terms = []
        for (a, b), coeff in ops.items():
            mult = (1j * KQ) ** a * (1j * KP) ** b * self.mask
            self.terms.append((rasterize(coeff, grid).values, mult, a + b))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        spec = sfft.fft2(rho, workers=-1)
        out = np.zeros_like(rho)
        for c, mult, _ in self.terms:
            out += c * sfft.ifft2(spec * mult, workers=-1)
        return out

    def filter(self, rho: np.ndarray) -> np.ndarray:
        return sfft.ifft2(sfft.fft2(rho, workers=-1) * self.mask, workers=-1)

    def stability_limit(self) -> float:
        """Largest RK4 step keeping every resolved mode inside the stability region.

        First-order terms are bounded by |velocity| * k_max (Cauchy-Schwarz),
        higher orders by max|coefficient| * k_max^order.
        """
        vel2 = 0.0
        rate = 0.0
        for c, _, order in self.terms:
            if order == 1:
                vel2 = vel2 + np.abs(c) ** 2
            else:
                rate += float(np.abs(c).max()) * self.k_max**order
        if not np.isscalar(vel2):
            rate += float(np.sqrt(vel2).max()) * self.k_max
        return math.inf if rate == 0 else RK4_IMAG_REACH / rate


def boundary_mass(rho: GridField, cfg: SimConfig, band: float = BOUNDARY_BAND) -> float:
    """Integral of |rho| dl over the outer band of the grid."""
    g = rho.grid
    bq = max(1, int(round(band * g.n_q)))
    bp = max(1, int(round(band * g.n_p)))
    m = np.zeros((g.n_q, g.n_p), dtype=bool)
    m[:bq] = m[-bq:] = True
    m[:, :bp] = m[:, -bp:] = True
    return float(np.abs(rho.values)[m].sum()) * g.dq * g.dp / (2 * math.pi * cfg.hbar)


def stability_limit(run: EvolutionRun, cfg: SimConfig) -> float:
    ops = bracket_operator(run.hamiltonian, cfg, run.quantum)
    return _Operator(ops, run.initial.grid, run.filtered).stability_limit()


def stable_steps(H: PolyObservable, grid: PhaseGrid, t_end: float, cfg: SimConfig,
                 quantum: bool = True, safety: float = 0.9) -> int:
    """Smallest step count reaching t_end with dt <= safety * stability limit."""
    limit = _Operator(bracket_operator(H, cfg, quantum), grid, True).stability_limit()
    return max(1, math.ceil(abs(t_end) / (safety * limit))) if math.isfinite(limit) else 1


def evolve_wigner(run: EvolutionRun, cfg: SimConfig) -> EvolutionResult:
    grid = run.initial.grid
    ops = bracket_operator(run.hamiltonian, cfg, run.quantum)
    L = _Operator(ops, grid, run.filtered)
    limit = L.stability_limit()
    if run.dt > limit:
        raise StepSizeError(f"time step {run.dt:.4g} exceeds the RK4 stability limit {limit:.4g}", limit)

    norm0 = integrate_liouville(run.initial, cfg).real
    if abs(norm0 - 1) > NORM_DRIFT_TOL:
        raise NormalizationError(f"initial state integrates to {norm0:.12g}", norm0)

    res = EvolutionResult()
    mass0 = boundary_mass(run.initial, cfg)
    if mass0 > BOUNDARY_MASS_TOL:
        raise DomainTooSmallError(f"initial boundary mass {mass0:.3e} exceeds {BOUNDARY_MASS_TOL:g}", mass0)

    rho = run.initial.values.astype(complex)
    if run.filtered and ops:
        rho = L.filter(rho)
    dt = run.dt
    wanted = set(run.snapshots)

    def record(step, r):
        f = GridField(grid, r)
        norm = integrate_liouville(f, cfg).real
        res.norm_drift = max(res.norm_drift, abs(norm - norm0))
        res.max_imag = max(res.max_imag, float(np.abs(r.imag).max()))
        bm = boundary_mass(f, cfg)
        res.boundary_mass = max(res.boundary_mass, bm)
        if bm > BOUNDARY_MASS_TOL:
            raise DomainTooSmallError(
                f"boundary mass {bm:.3e} at t = {step * dt:.6g} exceeds {BOUNDARY_MASS_TOL:g}", bm)
        if step in wanted:
            res.times.append(step * dt)
            res.states.append(f)

    record(0, rho)
    for step in range(1, run.n_steps + 1):
        if ops:
            k1 = L(rho)
            k2 = L(rho + 0.5 * dt * k1)
            k3 = L(rho + 0.5 * dt * k2)
            k4 = L(rho + dt * k3)
            rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if step in wanted or step % 50 == 0:
            record(step, rho)

    if res.norm_drift > NORM_DRIFT_TOL:
        raise NormalizationError(f"normalization drifted by {res.norm_drift:.3e}", norm0 + res.norm_drift)
    return res


def snapshot_rows(rho: GridField) -> list[tuple[float, float, float, float]]:
    """(q, p, Re rho, Im rho) rows for CSV export."""
    Q, P = rho.grid.mesh()
    v = rho.values
    return list(zip(Q.ravel().tolist(), P.ravel().tolist(), v.real.ravel().tolist(), v.imag.ravel().tolist()))
