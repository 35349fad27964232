"""The Moyal product and bracket, exact on polynomials and spectral on grids."""
from ..phase_core import SimConfig
from .moments import expectation, purity_defect, uncertainty_sq
from .polynomial import PolyObservable, bracket, poisson, star
from .spectral import interior_mask, smooth_window, star_grid, windowed


def star_poly(f: PolyObservable, g: PolyObservable, cfg: SimConfig) -> PolyObservable:
    return star(f, g, cfg.hbar)


def moyal_bracket_poly(f: PolyObservable, g: PolyObservable, cfg: SimConfig) -> PolyObservable:
    return bracket(f, g, cfg.hbar)


def poisson_bracket(f: PolyObservable, g: PolyObservable) -> PolyObservable:
    return poisson(f, g)


def moyal_bracket_grid(f, g, cfg: SimConfig):
    """(f * g - g * f) / (i hbar) on a grid."""
    return (star_grid(f, g, cfg) - star_grid(g, f, cfg)) * (1 / (1j * cfg.hbar))


__all__ = [
    "PolyObservable", "star_poly", "moyal_bracket_poly", "poisson_bracket", "star_grid",
    "moyal_bracket_grid", "smooth_window", "windowed", "interior_mask", "expectation",
    "uncertainty_sq", "purity_defect",
]
