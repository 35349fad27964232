"""Moyal product of grid fields as a twisted convolution of their spectra.

With F, G the discrete Fourier transforms of f and g, the star product is

    (f * g)^(K, L) = sum_{k,l} F(K-k, L-l) G(k, l) exp(-i hbar (K l - L k) / 2),

the Fourier image of the integral kernel of the Moyal product.  The phase
factorizes into a part depending on (K, l) and one depending on (L, k), so for
each output row K the inner sum over l is an ordinary circular convolution
(done with FFTs along p) and the remaining sum over k is a weighted reduction.
Cost is O(n_q^2 n_p log n_p).

The discrete product is exact for band-limited periodic fields.  Fields that
do not decay at the boundary must be multiplied by :func:`smooth_window`
first; the product is then only trusted on :func:`interior_mask`.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from ..errors import IncompatibleGridsError
from ..phase_core import GridField, PhaseGrid, SimConfig

# erfc rolloff: width in units of sqrt(hbar), centre this many widths inside the edge
ROLLOFF_WIDTH = 0.7
ROLLOFF_OFFSET = 5.0
# distance (units of sqrt(hbar)) kept between the rolloff centre and the trusted interior
INTERIOR_MARGIN = 3.5

_CHUNK_BYTES = 64 * 2**20


def boundary_tail(f: GridField, cells: int = 2) -> float:
    """Largest |f| over the outermost ``cells`` rows/columns, relative to max |f|."""
    v = np.abs(f.values)
    peak = v.max()
    if peak == 0:
        return 0.0
    edge = max(v[:cells].max(), v[-cells:].max(), v[:, :cells].max(), v[:, -cells:].max())
    return float(edge / peak)


def star_grid(f: GridField, g: GridField, cfg: SimConfig, support_tol: float | None = None) -> GridField:
    if f.grid != g.grid:
        raise IncompatibleGridsError("star product needs both fields on the same grid")
    grid = f.grid
    tol = cfg.default_tolerance if support_tol is None else support_tol
    warn = f.support_warning or g.support_warning \
        or boundary_tail(f) > tol or boundary_tail(g) > tol

    n, m = grid.n_q, grid.n_p
    kq, kp = grid.wavenumbers()
    hbar = cfg.hbar
    F = np.fft.fft2(f.values)
    G = np.fft.fft2(g.values)
    F_rows = np.fft.ifft(F, axis=1)            # F(k, p): mixed representation
    out_phase = np.exp(0.5j * hbar * np.outer(kp, kq))   # [L, k] -> exp(i hbar L k / 2)
    idx = np.arange(n)
    out = np.empty((n, m), dtype=complex)

    chunk = max(1, int(_CHUNK_BYTES // (16 * n * m)))
    for start in range(0, n, chunk):
        Ks = np.arange(start, min(n, start + chunk))
        shift = np.exp(-0.5j * hbar * np.outer(kq[Ks], kp))    # [b, l]
        G_sh = np.fft.ifft(G[None, :, :] * shift[:, None, :], axis=2)
        F_sh = F_rows[(Ks[:, None] - idx[None, :]) % n]       # [b, k, p]
        conv = np.fft.fft(F_sh * G_sh, axis=2)                 # [b, k, L]
        out[Ks] = np.einsum("bkL,Lk->bL", conv, out_phase)
    values = np.fft.ifft2(out) / (n * m) * m
    return GridField(grid, values, warn)


def _rolloff(x: np.ndarray, center: float, half_width: float, hbar: float) -> np.ndarray:
    s = ROLLOFF_WIDTH * math.sqrt(hbar)
    c = half_width - ROLLOFF_OFFSET * s
    return 0.5 * erfc((np.abs(x - center) - c) / s)


def smooth_window(grid: PhaseGrid, cfg: SimConfig) -> GridField:
    """Flat-topped window with Gaussian-smoothed (erfc) edges.

    The edge sharpness is tied to sqrt(hbar): the Moyal product couples a
    feature of width s to points a distance ~ hbar/s away, so the smoothest
    edge that still fits is the best choice.
    """
    qc, pc = grid.center
    hq, hp = grid.half_widths
    Q, P = grid.mesh()
    w = _rolloff(Q, qc, hq, cfg.hbar) * _rolloff(P, pc, hp, cfg.hbar)
    return GridField(grid, w)


def windowed(f: GridField, cfg: SimConfig) -> GridField:
    return GridField(f.grid, f.values * smooth_window(f.grid, cfg).values)


def interior_half_widths(grid: PhaseGrid, cfg: SimConfig) -> tuple[float, float]:
    root = math.sqrt(cfg.hbar)
    out = []
    for h in grid.half_widths:
        c = h - ROLLOFF_OFFSET * ROLLOFF_WIDTH * root
        r = c - INTERIOR_MARGIN * root
        if r <= 0:
            raise ValueError(
                f"grid half-width {h:g} too small for windowed products at hbar={cfg.hbar:g}; "
                f"need more than {(ROLLOFF_OFFSET * ROLLOFF_WIDTH + INTERIOR_MARGIN) * root:g}")
        out.append(r)
    return out[0], out[1]


def interior_mask(grid: PhaseGrid, cfg: SimConfig) -> np.ndarray:
    """Boolean mask of nodes where windowed star products are trusted."""
    rq, rp = interior_half_widths(grid, cfg)
    qc, pc = grid.center
    Q, P = grid.mesh()
    return (np.abs(Q - qc) <= rq) & (np.abs(P - pc) <= rp)
