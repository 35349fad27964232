"""Self-checks run by ``moyal-lab verify``.

Each check yields a measured number, the bound it must respect and whether
it passed.  Suites are deterministic (fixed RNG seeds) and sized to finish in
seconds; the heavier cross-checks live in the test suite.
"""
from __future__ import annotations

import math
from typing import Callable, Iterator, NamedTuple

import numpy as np

from . import quartic_flow as qf
from .errors import QuadratureDivergenceError
from .liouville_oracle import (EvolutionRun, classical_transport, evolve_wigner, grid_moments,
                               quadrature_expectation, stable_steps)
from .phase_core import PhaseGrid, SimConfig, rasterize
from .quadratic_flow import (CaseTag, CovarianceMatrix, QuadraticHamiltonian, closed_form_uncertainties,
                             minimization_times, propagate_variances, reduce_normal_form)
from .star_algebra import (PolyObservable, interior_mask, moyal_bracket_poly, poisson_bracket,
                           purity_defect, star_grid, star_poly, windowed)
from .states import coherent, quartic_coherent, rasterize_state, squeezed


class Check(NamedTuple):
    name: str
    measured: float
    bound: float
    passed: bool

    def line(self) -> str:
        return f"{self.name} measured={self.measured:.6e} bound={self.bound:.1e} {'PASS' if self.passed else 'FAIL'}"


def _le(name, measured, bound) -> Check:
    return Check(name, float(measured), float(bound), bool(measured <= bound))


def _ge(name, measured, bound) -> Check:
    return Check(name, float(measured), float(bound), bool(measured >= bound))


def _rel(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


# ------------------------------------------------------------------- star

def star_suite(cfg: SimConfig) -> Iterator[Check]:
    rng = np.random.default_rng(7)
    worst_assoc = worst_jacobi = worst_leibniz = 0.0
    for _ in range(20):
        f, g, h = (PolyObservable.random(rng, 4) for _ in range(3))
        lhs = star_poly(star_poly(f, g, cfg), h, cfg)
        rhs = star_poly(f, star_poly(g, h, cfg), cfg)
        worst_assoc = max(worst_assoc, lhs.max_abs_difference(rhs) / max(1.0, lhs.max_abs_coefficient()))
        br = lambda a, b: moyal_bracket_poly(a, b, cfg)  # noqa: E731
        jac = br(f, br(g, h)) + br(g, br(h, f)) + br(h, br(f, g))
        worst_jacobi = max(worst_jacobi, jac.max_abs_coefficient() / max(1.0, br(f, br(g, h)).max_abs_coefficient()))
        lhs = br(f, star_poly(g, h, cfg))
        rhs = star_poly(br(f, g), h, cfg) + star_poly(g, br(f, h), cfg)
        worst_leibniz = max(worst_leibniz, lhs.max_abs_difference(rhs) / max(1.0, lhs.max_abs_coefficient()))
    yield _le("star.associativity", worst_assoc, 1e-12)
    yield _le("star.jacobi", worst_jacobi, 1e-12)
    yield _le("star.leibniz", worst_leibniz, 1e-12)

    q, p = PolyObservable.q(), PolyObservable.p()
    comm = star_poly(q, p, cfg) - star_poly(p, q, cfg)
    yield _le("star.canonical_commutator", comm.max_abs_difference(PolyObservable.constant(1j * cfg.hbar)), 1e-15)

    worst = 0.0
    for _ in range(20):
        H = PolyObservable.random(rng, 2, complex_coeffs=False)
        f = PolyObservable.random(rng, 4)
        worst = max(worst, moyal_bracket_poly(H, f, cfg).max_abs_difference(poisson_bracket(H, f)))
    yield _le("star.quadratic_bracket_is_poisson", worst, 1e-12)

    grid = PhaseGrid.square(8.0, 128)
    fq = windowed(rasterize(lambda a, b: a, grid), cfg)
    fp = windowed(rasterize(lambda a, b: b, grid), cfg)
    prod = star_grid(fq, fp, cfg)
    Q, P = grid.mesh()
    mask = interior_mask(grid, cfg)
    err = np.abs(prod.values - (Q * P + 0.5j * cfg.hbar))[mask].max()
    yield _le("star.grid_q_star_p_interior", err, 1e-4)

    rho = rasterize_state(coherent(0.0, 0.0, cfg), grid, cfg)
    yield _le("star.coherent_purity_defect", purity_defect(rho, cfg), 1e-6)
    rho = rasterize_state(squeezed(0.5, -0.3, 1.5, cfg), grid, cfg)
    yield _le("star.squeezed_purity_defect", purity_defect(rho, cfg), 1e-6)


# -------------------------------------------------------------- quadratic

def _quadratic_cases():
    return [
        (CaseTag.ELLIPTIC_GENERAL, QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3), 1.7),
        (CaseTag.ELLIPTIC_COHERENT, QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3), 1.0),
        (CaseTag.BETA0_GENERAL, QuadraticHamiltonian(5.0, 2.0, 0.0), 0.6),
        (CaseTag.BETA0_COHERENT, QuadraticHamiltonian(5.0, 2.0, 0.0), 1.0),
        (CaseTag.HYPERBOLIC_OMEGA0_GENERAL, QuadraticHamiltonian.from_polar(0.0, 2.0, math.pi / 4), 1.6),
        (CaseTag.HYPERBOLIC_OMEGA0_COHERENT, QuadraticHamiltonian.from_polar(0.0, 2.0, math.pi / 4), 1.0),
        (CaseTag.SCALING_GENERAL, QuadraticHamiltonian(0.0, 2.0, 0.0), 2.5),
        (CaseTag.PARABOLIC, QuadraticHamiltonian.from_polar(1.0, 1.0, 0.4), 1.4),
    ]


def master_oracle_errors(cfg: SimConfig, samples: int = 1000):
    """Max relative closed-form vs covariance-propagation error per case."""
    out = {}
    for case, H, gamma in _quadratic_cases():
        span = 2 * math.pi / H.R if H.R > 0 and H.regime.value == "elliptic" else 2.0
        t = np.linspace(0.0, span, samples)
        vq, vp, prod = closed_form_uncertainties(case, H, gamma, t, cfg)
        oq, op = propagate_variances(H, CovarianceMatrix.squeezed(gamma, cfg), t)
        out[case] = max(_rel(vq, oq), _rel(vp, op), _rel(prod, oq * op))
    return out


def quadratic_suite(cfg: SimConfig) -> Iterator[Check]:
    for case, err in master_oracle_errors(cfg).items():
        yield _le(f"quadratic.oracle.{case.value}", err, 1e-10)

    H = QuadraticHamiltonian(0.0, 2.0, 0.0)
    t = np.linspace(0, 2 * math.pi, 400) / H.R
    _, _, prod = closed_form_uncertainties(CaseTag.SCALING_GENERAL, H, 1.0, t, cfg)
    yield _le("quadratic.scaling_product_constant", np.abs(prod - cfg.hbar**2 / 4).max(), 1e-12)

    H = QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3)
    mt = minimization_times(H)
    ts = mt.times(4 * math.pi / H.R)
    _, _, prod = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, ts, cfg)
    yield _le("quadratic.minimization_times_product", np.abs(prod - cfg.hbar**2 / 4).max(), 1e-12)
    mids = 0.5 * (ts[1:] + ts[:-1])
    _, _, prod = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, mids, cfg)
    yield _ge("quadratic.midpoint_excess", (prod - cfg.hbar**2 / 4).min(), 1e-6)

    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(20):
        w = rng.uniform(1.0, 3.0)
        a, b = rng.uniform(-0.6, 0.6, 2) * w
        H = QuadraticHamiltonian(w, a, b)
        nf = reduce_normal_form(H, 0.5)
        worst = max(worst, abs(nf.transform.det - 1),
                    abs(nf.hamiltonian.omega - H.R), abs(nf.hamiltonian.alpha), abs(nf.hamiltonian.beta))
    yield _le("quadratic.normal_form_elliptic", worst, 1e-10)


# ---------------------------------------------------------------- quartic

FIG2_STATE = (0.01, 1.0, 1.0)


def quartic_suite(cfg: SimConfig) -> Iterator[Check]:
    lam = 1.0
    s = quartic_coherent(*FIG2_STATE, cfg)

    worst = 0.0
    for t in np.linspace(-0.7, 0.7, 8):
        flow = qf.flow_quantum(lam, t, cfg)
        fm = qf.first_moments(s, lam, t, cfg)
        worst = max(worst, _rel(fm.mean_q, quadrature_expectation(flow.Q, s, cfg)),
                    _rel(fm.mean_p, quadrature_expectation(flow.P, s, cfg)))
    yield _le("quartic.first_moments_vs_quadrature", worst, 1e-6)

    worst = 0.0
    for t in np.linspace(-0.35, 0.35, 8):
        flow = qf.flow_quantum(lam, t, cfg)
        u = qf.uncertainties(s, lam, t, cfg)
        mq = quadrature_expectation(flow.Q, s, cfg)
        mp = quadrature_expectation(flow.P, s, cfg)
        vq = quadrature_expectation(qf.star_square(lam, t, "Q", cfg), s, cfg) - mq**2
        vp = quadrature_expectation(qf.star_square(lam, t, "P", cfg), s, cfg) - mp**2
        worst = max(worst, _rel(u.var_q, vq), _rel(u.var_p, vp))
    yield _le("quartic.uncertainties_vs_quadrature", worst, 1e-6)

    try:
        quadrature_expectation(qf.flow_quantum(lam, 0.8, cfg).Q, s, cfg)
        diverged = 0.0
    except QuadratureDivergenceError:
        diverged = 1.0
    yield _ge("quartic.quadrature_diverges_past_window", diverged, 1.0)

    u = qf.uncertainties(s, lam, math.pi / (cfg.hbar * lam), cfg)
    yield _le("quartic.coherence_return", abs(u.product - cfg.hbar**2 / 4), 1e-10)
    u = qf.uncertainties(s, lam, 0.9 * math.pi / (8 * cfg.hbar * lam), cfg)
    yield _ge("quartic.off_return_excess", u.product - cfg.hbar**2 / 4, 1e-6)

    u = no_squeezing_scan(s, lam, cfg)
    yield _ge("quartic.no_squeezing_var_Q", u[0], -1e-10)
    yield _ge("quartic.no_squeezing_var_P", u[1], -1e-10)


def no_squeezing_scan(s, lam: float, cfg: SimConfig, samples: int = 10_000) -> tuple[float, float]:
    """Smallest var - initial var over the n = 0 uncertainty window."""
    iv = qf.validity(qf.Quantity.UNCERTAINTIES, lam, cfg, 0)
    guard = 1e-3 * math.pi / abs(cfg.hbar * lam)
    t = np.linspace(iv.t_lo + guard, iv.t_hi - guard, samples)
    u = qf.uncertainties(s, lam, t, cfg)
    return float((u.var_q - s.var_q).min()), float((u.var_p - s.var_p).min())


# ----------------------------------------------------------------- oracle

def oracle_suite(cfg: SimConfig) -> Iterator[Check]:
    s = coherent(1.0, 0.0, cfg)
    for name, fn, exact in [("q", lambda q, p: q, s.q0),
                            ("q2p2", lambda q, p: q**2 * p**2, s.moment(2, 2))]:
        yield _le(f"oracle.quadrature_{name}", abs(quadrature_expectation(fn, s, cfg) - exact), 1e-12)

    H = QuadraticHamiltonian(1.0, 0.0, 0.0)
    grid = PhaseGrid.square(8.0, 128)
    t_end = math.pi / 2
    run = EvolutionRun(rasterize_state(s, grid, cfg), H.as_poly(), t_end / 200, 200)
    res = evolve_wigner(run, cfg)
    got = grid_moments(res.states[-1], cfg)
    want = classical_transport(H, s, t_end)
    err = max(np.abs(got.mean - want.mean).max(),
              np.abs(got.covariance.matrix - want.covariance.matrix).max())
    yield _le("oracle.oscillator_quarter_period", err, 1e-4)
    yield _le("oracle.norm_drift", res.norm_drift, 1e-6)
    yield _le("oracle.imaginary_part", res.max_imag, 1e-8)

    sq = quartic_coherent(*FIG2_STATE, cfg)
    grid = PhaseGrid.square(8.0, 96)
    t_end = 0.01
    Hq = PolyObservable({(2, 2): 1.0})
    n = stable_steps(Hq, grid, t_end, cfg)
    run = EvolutionRun(rasterize_state(sq, grid, cfg), Hq, t_end / n, n)
    res = evolve_wigner(run, cfg)
    got = grid_moments(res.states[-1], cfg)
    u = qf.uncertainties(sq, 1.0, t_end, cfg)
    err = max(_rel(got.covariance.var_q, u.var_q), _rel(got.covariance.var_p, u.var_p))
    yield _le("oracle.quartic_grid_vs_closed_form", err, 1e-3)


SUITES: dict[str, Callable[[SimConfig], Iterator[Check]]] = {
    "star": star_suite,
    "quadratic": quadratic_suite,
    "quartic": quartic_suite,
    "oracle": oracle_suite,
}


def run_suite(name: str, cfg: SimConfig) -> list[Check]:
    names = list(SUITES) if name == "all" else [name]
    out = []
    for n in names:
        out.extend(SUITES[n](cfg))
    return out
