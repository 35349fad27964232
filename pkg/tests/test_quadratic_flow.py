import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from moyal_lab.errors import CaseConstraintError, DomainError, UnsupportedRegimeError
from moyal_lab.phase_core import SimConfig
from moyal_lab.quadratic_flow import (CaseTag, CovarianceMatrix, QuadraticHamiltonian, Regime, case_for,
                                      classify, closed_form_uncertainties, flow, flow_matrices,
                                      minimization_times, normal_form_target, propagate_covariance,
                                      propagate_variances, reduce_normal_form, rotate_frame,
                                      transform_hamiltonian)
from moyal_lab.star_algebra import moyal_bracket_poly, PolyObservable


def test_classification_examples(cfg):
    H = classify(5, 2 * math.cos(math.pi / 3), 2 * math.sin(math.pi / 3), cfg)
    assert H.regime is Regime.ELLIPTIC
    assert H.r == pytest.approx(2) and H.theta == pytest.approx(math.pi / 3)
    assert H.R == pytest.approx(math.sqrt(21))
    assert classify(0, 2, 0, cfg).regime is Regime.HYPERBOLIC
    assert classify(1, 1, 0, cfg).regime is Regime.PARABOLIC
    assert classify(1, 0, 1 + 1e-14, cfg).regime is Regime.PARABOLIC


@settings(max_examples=50, deadline=None)
@given(w=st.floats(-3, 3), a=st.floats(-3, 3), b=st.floats(-3, 3), t=st.floats(-2, 2))
def test_flow_matches_matrix_exponential(w, a, b, t):
    H = QuadraticHamiltonian(w, a, b)
    M = flow(H, t).matrix
    assert np.allclose(M, expm(t * H.generator()), rtol=1e-9, atol=1e-9)
    assert abs(np.linalg.det(M) - 1) < 1e-8 * max(1.0, np.abs(M).max() ** 2)


def test_flow_solves_heisenberg_equations(cfg):
    """dQ/dt = [[Q, H]] for the linear observables, checked by finite differences."""
    H = QuadraticHamiltonian(1.3, 0.4, -0.2)
    h = PolyObservable({(0, 2): (H.omega + H.beta) / 2, (2, 0): (H.omega - H.beta) / 2, (1, 1): H.alpha})
    dq = moyal_bracket_poly(PolyObservable.q(), h, cfg)
    dp = moyal_bracket_poly(PolyObservable.p(), h, cfg)
    A = np.array([[dq.coefficient(1, 0).real, dq.coefficient(0, 1).real],
                  [dp.coefficient(1, 0).real, dp.coefficient(0, 1).real]])
    assert np.allclose(A, H.generator())


def test_harmonic_flow_is_rotation():
    M = flow(QuadraticHamiltonian(1, 0, 0), 0.7).matrix
    c, s = math.cos(0.7), math.sin(0.7)
    assert np.allclose(M, [[c, s], [-s, c]])


def test_covariance_propagation_keeps_determinant(cfg):
    H = QuadraticHamiltonian(0.2, 1.0, 0.5)
    S0 = CovarianceMatrix.squeezed(1.7, cfg)
    for t in (0.0, 0.5, 2.0):
        S = propagate_covariance(H, S0, t)
        assert S.det == pytest.approx(cfg.hbar**2 / 4, rel=1e-9)
        assert S.satisfies_heisenberg(cfg)


CASES = [
    (CaseTag.ELLIPTIC_GENERAL, QuadraticHamiltonian.from_polar(1.0, 0.6, 0.7), 1.7, 20),
    (CaseTag.ELLIPTIC_GENERAL, QuadraticHamiltonian.from_polar(-2.0, 0.9, -2.2), 0.4, 20),
    (CaseTag.ELLIPTIC_COHERENT, QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3), 1.0, 5),
    (CaseTag.BETA0_GENERAL, QuadraticHamiltonian(1.3, 0.5, 0.0), 0.6, 20),
    (CaseTag.BETA0_COHERENT, QuadraticHamiltonian(5.0, 2.0, 0.0), 1.0, 5),
    (CaseTag.HYPERBOLIC_OMEGA0_GENERAL, QuadraticHamiltonian.from_polar(0.0, 1.0, 0.9), 1.6, 2),
    (CaseTag.HYPERBOLIC_OMEGA0_COHERENT, QuadraticHamiltonian.from_polar(0.0, 2.0, math.pi / 4), 1.0, 2),
    (CaseTag.SCALING_GENERAL, QuadraticHamiltonian(0.0, 0.8, 0.0), 2.0, 2),
    (CaseTag.PARABOLIC, QuadraticHamiltonian.from_polar(1.0, 1.0, 0.4), 1.4, 5),
]


@pytest.mark.parametrize("case,H,gamma,span", CASES, ids=lambda v: getattr(v, "value", None))
@pytest.mark.parametrize("hbar", [1.0, 0.37])
def test_closed_forms_match_covariance_propagation(case, H, gamma, span, hbar):
    cfg = SimConfig(hbar=hbar)
    t = np.linspace(-span, span, 501)
    vq, vp, prod = closed_form_uncertainties(case, H, gamma, t, cfg)
    oq, op = propagate_variances(H, CovarianceMatrix.squeezed(gamma, cfg), t)
    assert np.allclose(vq, oq, rtol=1e-10, atol=0)
    assert np.allclose(vp, op, rtol=1e-10, atol=0)
    assert np.allclose(prod, oq * op, rtol=1e-10, atol=0)
    assert np.all(prod >= hbar**2 / 4 - 1e-10)


@pytest.mark.parametrize("case,H,gamma,span", CASES, ids=lambda v: getattr(v, "value", None))
def test_initial_values(case, H, gamma, span, cfg):
    vq, vp, prod = closed_form_uncertainties(case, H, gamma, 0.0, cfg)
    assert vq == pytest.approx(0.5 / gamma) and vp == pytest.approx(0.5 * gamma)
    assert prod == pytest.approx(0.25)


def test_general_products_carry_a_cross_term(cfg):
    H = QuadraticHamiltonian(1.3, 0.5, 0.0)
    g, t = 0.6, np.linspace(0.1, 3, 7)
    _, _, fixed = closed_form_uncertainties(CaseTag.BETA0_GENERAL, H, g, t, cfg)
    _, _, dropped = closed_form_uncertainties(CaseTag.BETA0_GENERAL, H, g, t, cfg, drop_cross_term=True)
    cross = 0.25 * (g**2 - 1) * (g**-2 - 1) * H.omega**4 * np.sin(H.R * t) ** 4 / H.R**4
    assert np.allclose(fixed - dropped, cross, rtol=1e-12, atol=1e-15)

    H = QuadraticHamiltonian.from_polar(0.0, 1.0, 0.9)
    _, _, fixed = closed_form_uncertainties(CaseTag.HYPERBOLIC_OMEGA0_GENERAL, H, g, t, cfg)
    _, _, dropped = closed_form_uncertainties(CaseTag.HYPERBOLIC_OMEGA0_GENERAL, H, g, t, cfg,
                                              drop_cross_term=True)
    cross = 0.25 * (g**2 - 1) * (g**-2 - 1) * math.sin(0.9) ** 4 * np.sinh(t) ** 4
    assert np.allclose(fixed - dropped, cross, rtol=1e-12)

    # at gamma = 1 both agree
    for case, H in [(CaseTag.BETA0_GENERAL, QuadraticHamiltonian(1.3, 0.5, 0.0)),
                    (CaseTag.HYPERBOLIC_OMEGA0_GENERAL, QuadraticHamiltonian.from_polar(0.0, 1.0, 0.9))]:
        a = closed_form_uncertainties(case, H, 1.0, t, cfg)[2]
        b = closed_form_uncertainties(case, H, 1.0, t, cfg, drop_cross_term=True)[2]
        assert np.array_equal(a, b)


def test_general_case_reduces_to_coherent(cfg):
    H = QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3)
    t = np.linspace(0, 3, 50)
    a = closed_form_uncertainties(CaseTag.ELLIPTIC_GENERAL, H, 1.0, t, cfg)
    b = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, t, cfg)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12)


def test_regular_at_multiples_of_pi(cfg):
    H = QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3)
    vq, vp, prod = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, math.pi / H.R, cfg)
    assert math.isfinite(vq) and prod == pytest.approx(0.25, abs=1e-14)


def test_harmonic_oscillator_keeps_coherence(cfg):
    H = QuadraticHamiltonian(1.0, 0.0, 0.0)
    vq, vp, _ = closed_form_uncertainties(CaseTag.BETA0_COHERENT, H, 1.0, np.linspace(0, 2 * math.pi, 100), cfg)
    assert np.allclose(vq, 0.5, atol=1e-15) and np.allclose(vp, 0.5, atol=1e-15)


@pytest.mark.parametrize("case,H,gamma", [
    (CaseTag.ELLIPTIC_COHERENT, QuadraticHamiltonian(5, 1, 1), 2.0),
    (CaseTag.BETA0_GENERAL, QuadraticHamiltonian(5, 1, 1), 1.0),
    (CaseTag.BETA0_GENERAL, QuadraticHamiltonian(5, -1, 0), 1.0),
    (CaseTag.HYPERBOLIC_OMEGA0_GENERAL, QuadraticHamiltonian(0.5, 2, 0), 1.0),
    (CaseTag.SCALING_GENERAL, QuadraticHamiltonian(0, 2, 1), 1.0),
    (CaseTag.PARABOLIC, QuadraticHamiltonian(2, 1, 0), 1.0),
    (CaseTag.ELLIPTIC_GENERAL, QuadraticHamiltonian(0, 2, 0), 1.0),
])
def test_case_constraints(case, H, gamma, cfg):
    with pytest.raises(CaseConstraintError):
        closed_form_uncertainties(case, H, gamma, 0.1, cfg)


def test_case_lookup():
    assert case_for(QuadraticHamiltonian(0, 2, 0), 3.0) is CaseTag.SCALING_GENERAL
    assert case_for(QuadraticHamiltonian(5, 2, 0), 1.0) is CaseTag.BETA0_COHERENT
    assert case_for(QuadraticHamiltonian(5, 2, 1), 1.5) is CaseTag.ELLIPTIC_GENERAL
    assert case_for(QuadraticHamiltonian(1, 3, 0), 1.5) is None


def test_minimization_times_of_figure_parameters(cfg):
    H = QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3)
    mt = minimization_times(H)
    assert mt.phase == pytest.approx(math.atan(H.R / 5 * math.tan(math.pi / 3)))
    ts = mt.times(3 * math.pi / H.R)
    assert len(ts) == 7  # both families, t = 0 and the endpoint included
    prod = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, ts, cfg)[2]
    assert np.all(np.abs(prod - 0.25) <= 1e-12)


def test_minimization_times_at_right_angle(cfg):
    H = QuadraticHamiltonian.from_polar(2.0, 1.0, math.pi / 2)
    mt = minimization_times(H)
    assert mt.phase == pytest.approx(math.pi / 2) or mt.phase == pytest.approx(-math.pi / 2)
    prod = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, mt.times(10.0), cfg)[2]
    assert np.all(np.abs(prod - 0.25) <= 1e-12)


def test_minimization_times_need_elliptic():
    with pytest.raises(UnsupportedRegimeError):
        minimization_times(QuadraticHamiltonian(0.0, 1.0, 0.0))


@pytest.mark.parametrize("H", [QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3),
                               QuadraticHamiltonian.from_polar(0.0, 2.0, math.pi / 4),
                               QuadraticHamiltonian(-1.0, 0.3, -2.0)])
def test_rotation_removes_beta(H):
    rot, Hr = rotate_frame(H)
    assert abs(Hr.beta) < 1e-12
    assert Hr.omega == pytest.approx(H.omega) and Hr.alpha == pytest.approx(H.r)
    assert np.linalg.det(rot.matrix) == pytest.approx(1.0)


def _check_normal_form(H, a, branch=1, sign=None):
    nf = reduce_normal_form(H, a, branch, sign)
    target = normal_form_target(nf, H)
    assert abs(nf.transform.det - 1) <= 1e-10
    for x, y in zip((nf.hamiltonian.omega, nf.hamiltonian.alpha, nf.hamiltonian.beta),
                    (target.omega, target.alpha, target.beta)):
        assert abs(x - y) <= 1e-10
    # flows are conjugate: T M(t) = M'(t) T
    T = nf.transform.matrix
    for t in (0.3, 1.1):
        assert np.allclose(T @ flow(H, t).matrix, flow(target, t).matrix @ T, atol=1e-9)
    return nf


def test_normal_forms_examples():
    nf = _check_normal_form(QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3), 1.0)
    assert nf.kind == "oscillator" and nf.hamiltonian.omega == pytest.approx(math.sqrt(21))
    nf = _check_normal_form(QuadraticHamiltonian(0.0, math.sqrt(2), math.sqrt(2)), 1.0)
    assert nf.kind == "squeeze" and nf.hamiltonian.alpha == pytest.approx(2.0)
    nf = _check_normal_form(QuadraticHamiltonian(1.0, 0.0, 0.0), 1.0)
    assert np.allclose(nf.transform.matrix, np.eye(2))


def test_normal_form_branches_and_signs():
    _check_normal_form(QuadraticHamiltonian(-2.0, 0.5, 0.7), 0.3, branch=-1)
    _check_normal_form(QuadraticHamiltonian(0.3, 1.0, 2.0), 0.5, sign=-1)
    _check_normal_form(QuadraticHamiltonian(0.3, 1.0, 2.0), -2.0, branch=-1)


def test_normal_form_domain_errors():
    H = QuadraticHamiltonian(2.0, 0.5, 0.0)
    with pytest.raises(DomainError):
        reduce_normal_form(H, 5.0)
    with pytest.raises(DomainError):
        reduce_normal_form(QuadraticHamiltonian(0.0, 1.0, 0.0), 1.0)
    with pytest.raises(DomainError):
        reduce_normal_form(QuadraticHamiltonian(0.3, 1.0, 2.0), 0.0)
    with pytest.raises(UnsupportedRegimeError):
        reduce_normal_form(QuadraticHamiltonian(1.0, 1.0, 0.0), 0.5)


def test_transform_roundtrip():
    H = QuadraticHamiltonian(1.0, 0.3, 0.2)
    T = np.array([[2.0, 1.0], [1.0, 1.0]])
    back = transform_hamiltonian(transform_hamiltonian(H, T), np.linalg.inv(T))
    assert np.allclose([back.omega, back.alpha, back.beta], [H.omega, H.alpha, H.beta])


@pytest.mark.parametrize("H", [QuadraticHamiltonian(2.0, 0.5, 0.3), QuadraticHamiltonian(0.2, 1.5, -0.4),
                               QuadraticHamiltonian.from_polar(1.0, 1.0, 0.7)])
def test_flow_group_property(H):
    t = np.linspace(-10, 10, 41)
    fwd, back = flow_matrices(H, t), flow_matrices(H, -t)
    prod = np.einsum("nij,njk->nik", fwd, back)
    scale = np.maximum(1.0, np.abs(fwd).max(axis=(1, 2)) ** 2)
    assert np.all(np.abs(prod - np.eye(2)).max(axis=(1, 2)) <= 1e-12 * scale)
    assert np.all(np.abs(np.linalg.det(fwd) - 1) <= 1e-12 * scale)


def test_parabolic_flow_destroys_squeezing(cfg):
    H = QuadraticHamiltonian.from_polar(1.0, 1.0, 0.4)
    gamma = 0.4
    t = np.linspace(0, 60, 6001)
    vq, vp, _ = closed_form_uncertainties(CaseTag.PARABOLIC, H, gamma, t, cfg)
    squeezed_now = np.minimum(vq, vp) < cfg.hbar / 2
    assert squeezed_now[0]
    last = np.flatnonzero(squeezed_now)[-1]
    assert last < t.size - 1000   # no squeezing over the final stretch of the scan


@pytest.mark.parametrize("theta", [0.3, math.pi / 4, 2.0])
def test_hyperbolic_squeezing_only_at_first(cfg, theta):
    """Coherent start, omega = 0: some variance drops below hbar/2 at first and never again."""
    H = QuadraticHamiltonian.from_polar(0.0, 1.0, theta)
    t = np.linspace(1e-4, 8, 8001)
    vq, vp, _ = closed_form_uncertainties(CaseTag.HYPERBOLIC_OMEGA0_COHERENT, H, 1.0, t, cfg)
    squeezed_now = np.minimum(vq, vp) < cfg.hbar / 2 - 1e-12
    assert squeezed_now[0] and not squeezed_now[-1]
    first_off = np.flatnonzero(~squeezed_now)[0]
    assert not squeezed_now[first_off:].any()


def test_elliptic_product_never_below_minimum(cfg):
    H = QuadraticHamiltonian.from_polar(5.0, 2.0, math.pi / 3)
    t = np.linspace(0, 10, 5001)
    _, _, prod = closed_form_uncertainties(CaseTag.ELLIPTIC_COHERENT, H, 1.0, t, cfg)
    assert prod.min() >= 0.25 - 1e-12
