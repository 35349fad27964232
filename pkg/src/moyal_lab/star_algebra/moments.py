"""Expectation values, Moyal-squared uncertainties and purity on states."""
from __future__ import annotations

from typing import Union

import numpy as np

from ..errors import IncompatibleGridsError, NormalizationError, StarProductAccuracyError
from ..phase_core import GridField, SimConfig, integrate_liouville, rasterize
from ..states import GaussianState, rasterize_state
from .polynomial import PolyObservable, star
from .spectral import star_grid

Observable = Union[PolyObservable, GridField]
State = Union[GridField, GaussianState]

NORMALIZATION_TOL = 1e-6
GRID_VARIANCE_TOL = 1e-8


def _check_normalized(rho: GridField, cfg: SimConfig, tol: float):
    norm = integrate_liouville(rho, cfg)
    if abs(norm - 1) > tol:
        raise NormalizationError(f"state is not normalized: integral over dl = {norm:.12g}", norm)


def expectation(A: Observable, rho: State, cfg: SimConfig, *, norm_tol: float = NORMALIZATION_TOL,
                return_residue: bool = False):
    """<A>_rho = integral of A rho dl.

    The star product under the integral is dropped; on grids that is only
    valid when both factors vanish at the boundary, which the caller owns.
    Polynomial observables in an analytic Gaussian state are evaluated from
    exact moments without any grid.
    """
    if isinstance(rho, GaussianState) and isinstance(A, PolyObservable):
        value = sum(c * rho.moment(i, j) for (i, j), c in A)
        value = complex(value)
    else:
        if isinstance(rho, GaussianState):
            if not isinstance(A, GridField):
                raise TypeError(f"unsupported observable type {type(A).__name__}")
            rho = rasterize_state(rho, A.grid, cfg)
        _check_normalized(rho, cfg, norm_tol)
        if isinstance(A, PolyObservable):
            A = rasterize(A, rho.grid)
        elif callable(A) and not isinstance(A, GridField):
            A = rasterize(A, rho.grid)
        if A.grid != rho.grid:
            raise IncompatibleGridsError("observable and state live on different grids")
        value = integrate_liouville(A * rho, cfg)
    if return_residue:
        return value.real, abs(value.imag)
    return value.real


def uncertainty_sq(A: Observable, rho: State, cfg: SimConfig, *, tol: float | None = None) -> float:
    """(Delta A)^2 = <A * A> - <A>^2 with the Moyal square."""
    if isinstance(A, PolyObservable):
        A2 = star(A, A, cfg.hbar)
        default_tol = cfg.default_tolerance if isinstance(rho, GaussianState) else GRID_VARIANCE_TOL
    else:
        if isinstance(rho, GaussianState):
            rho = rasterize_state(rho, A.grid, cfg)
        A2 = star_grid(A, A, cfg)
        default_tol = GRID_VARIANCE_TOL
    second = expectation(A2, rho, cfg)
    first = expectation(A, rho, cfg)
    var = second - first**2
    tol = default_tol if tol is None else tol
    if var < -tol * max(1.0, abs(second)):
        raise StarProductAccuracyError(
            f"negative variance {var:.3e} (<A*A> = {second:.12g}, <A> = {first:.12g})")
    return var


def central_mask(grid, fraction: float = 0.5) -> np.ndarray:
    qc, pc = grid.center
    hq, hp = grid.half_widths
    Q, P = grid.mesh()
    return (np.abs(Q - qc) <= fraction * hq) & (np.abs(P - pc) <= fraction * hp)


def purity_defect(rho: GridField, cfg: SimConfig, mask: np.ndarray | None = None) -> float:
    """Max |rho * rho - rho| over the interior (central half of the grid by default)."""
    rr = star_grid(rho, rho, cfg)
    mask = central_mask(rho.grid) if mask is None else mask
    return float(np.abs(rr.values - rho.values)[mask].max())
