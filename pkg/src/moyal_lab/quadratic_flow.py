"""Quadratic Hamiltons H = (w+b)/2 p^2 + (w-b)/2 q^2 + a q p.

For quadratic H the Moyal bracket equals the Poisson bracket, so quantum and
classical flows coincide and are linear: (Q, P) = M(t) (q, p).  A Gaussian
state is transported exactly, with covariance M S0 M^T.  That propagation is
the general engine here; the explicit uncertainty formulas for the
elliptic, beta = 0, omega = 0, scaling and parabolic cases are kept as
closed forms and checked against it.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CaseConstraintError, DomainError, UnsupportedRegimeError
from .phase_core import SimConfig
from .star_algebra.polynomial import PolyObservable

PARABOLIC_RTOL = 1e-12


class Regime(enum.Enum):
    ELLIPTIC = "elliptic"
    HYPERBOLIC = "hyperbolic"
    PARABOLIC = "parabolic"


@dataclass(frozen=True)
class QuadraticHamiltonian:
    omega: float
    alpha: float
    beta: float
    r: float = field(init=False)
    theta: float = field(init=False)
    R: float = field(init=False)
    regime: Regime = field(init=False)

    def __post_init__(self):
        for name in ("omega", "alpha", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        disc = self.omega**2 - self.alpha**2 - self.beta**2
        if abs(disc) <= PARABOLIC_RTOL * max(1.0, self.omega**2):
            regime = Regime.PARABOLIC
        elif disc > 0:
            regime = Regime.ELLIPTIC
        else:
            regime = Regime.HYPERBOLIC
        object.__setattr__(self, "r", math.hypot(self.alpha, self.beta))
        object.__setattr__(self, "theta", math.atan2(self.beta, self.alpha))
        object.__setattr__(self, "R", 0.0 if regime is Regime.PARABOLIC else math.sqrt(abs(disc)))
        object.__setattr__(self, "regime", regime)

    @classmethod
    def from_polar(cls, omega: float, r: float, theta: float) -> "QuadraticHamiltonian":
        return cls(omega, r * math.cos(theta), r * math.sin(theta))

    @classmethod
    def from_form(cls, S: np.ndarray) -> "QuadraticHamiltonian":
        """From the symmetric matrix S with H = z^T S z / 2, z = (q, p)."""
        return cls(0.5 * (S[0, 0] + S[1, 1]), S[0, 1], 0.5 * (S[1, 1] - S[0, 0]))

    def form(self) -> np.ndarray:
        return np.array([[self.omega - self.beta, self.alpha],
                         [self.alpha, self.omega + self.beta]])

    def generator(self) -> np.ndarray:
        """A with d/dt (q, p) = A (q, p)."""
        return np.array([[self.alpha, self.beta + self.omega],
                         [self.beta - self.omega, -self.alpha]])

    def as_poly(self) -> PolyObservable:
        return PolyObservable({(0, 2): 0.5 * (self.omega + self.beta),
                               (2, 0): 0.5 * (self.omega - self.beta),
                               (1, 1): self.alpha})

    def __call__(self, q, p):
        return 0.5 * (self.omega + self.beta) * p**2 + 0.5 * (self.omega - self.beta) * q**2 \
            + self.alpha * q * p


def classify(omega: float, alpha: float, beta: float, cfg: SimConfig | None = None) -> QuadraticHamiltonian:
    return QuadraticHamiltonian(float(omega), float(alpha), float(beta))


@dataclass(frozen=True)
class LinearFlowMap:
    """Q = M11 q + M12 p, P = M21 q + M22 p."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("a linear flow map is a 2x2 matrix")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def __call__(self, q, p):
        m = self.matrix
        return m[0, 0] * q + m[0, 1] * p, m[1, 0] * q + m[1, 1] * p

    def __matmul__(self, other: "LinearFlowMap") -> "LinearFlowMap":
        return LinearFlowMap(self.matrix @ other.matrix)

    def inverse(self) -> "LinearFlowMap":
        return LinearFlowMap(np.linalg.inv(self.matrix))


def flow_matrices(H: QuadraticHamiltonian, t) -> np.ndarray:
    """M(t) for an array of times, shape t.shape + (2, 2).

    Uses A^2 = (a^2 + b^2 - w^2) I, so exp(tA) = c(t) I + s(t) A with
    (cos, sin/R), (cosh, sinh/R) or (1, t) depending on the regime.
    """
    t = np.asarray(t, dtype=float)
    if H.regime is Regime.ELLIPTIC:
        c, s = np.cos(H.R * t), np.sin(H.R * t) / H.R
    elif H.regime is Regime.HYPERBOLIC:
        c, s = np.cosh(H.R * t), np.sinh(H.R * t) / H.R
    else:
        c, s = np.ones_like(t), t
    A = H.generator()
    return c[..., None, None] * np.eye(2) + s[..., None, None] * A


def flow(H: QuadraticHamiltonian, t: float) -> LinearFlowMap:
    return LinearFlowMap(flow_matrices(H, t))


@dataclass(frozen=True)
class CovarianceMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        if m.shape != (2, 2):
            raise ValueError("covariance must be 2x2")
        if abs(m[0, 1] - m[1, 0]) > 1e-12 * max(1.0, np.abs(m).max()):
            raise ValueError("covariance must be symmetric")
        if m[0, 0] <= 0 or np.linalg.det(m) <= 0:
            raise ValueError("covariance must be positive definite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def diagonal(cls, var_q: float, var_p: float) -> "CovarianceMatrix":
        return cls(np.diag([var_q, var_p]))

    @classmethod
    def squeezed(cls, gamma: float, cfg: SimConfig) -> "CovarianceMatrix":
        return cls.diagonal(cfg.hbar / gamma / 2, cfg.hbar * gamma / 2)

    @property
    def var_q(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def var_p(self) -> float:
        return float(self.matrix[1, 1])

    @property
    def cov_qp(self) -> float:
        return float(self.matrix[0, 1])

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def satisfies_heisenberg(self, cfg: SimConfig, tol: float = 1e-10) -> bool:
        return self.det >= cfg.hbar**2 / 4 - tol


def propagate_covariance(H: QuadraticHamiltonian, sigma0: CovarianceMatrix, t: float) -> CovarianceMatrix:
    M = flow_matrices(H, t)
    S = M @ sigma0.matrix @ M.T
    return CovarianceMatrix(0.5 * (S + S.T))


def propagate_variances(H: QuadraticHamiltonian, sigma0: CovarianceMatrix, t) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized diagonal of M(t) S0 M(t)^T for an array of times."""
    M = flow_matrices(H, t)
    S = np.einsum("...ij,jk,...lk->...il", M, sigma0.matrix, M)
    return S[..., 0, 0], S[..., 1, 1]


class CaseTag(enum.Enum):
    ELLIPTIC_GENERAL = "EllipticGeneral"
    ELLIPTIC_COHERENT = "EllipticCoherent"
    BETA0_GENERAL = "Beta0General"
    BETA0_COHERENT = "Beta0Coherent"
    HYPERBOLIC_OMEGA0_GENERAL = "HyperbolicOmega0General"
    HYPERBOLIC_OMEGA0_COHERENT = "HyperbolicOmega0Coherent"
    SCALING_GENERAL = "ScalingGeneral"
    PARABOLIC = "Parabolic"


_ZERO_ATOL = 1e-12


def _is_zero(x: float, scale: float = 1.0) -> bool:
    return abs(x) <= _ZERO_ATOL * max(1.0, scale)


def _check_case(case: CaseTag, H: QuadraticHamiltonian, gamma: float):
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma!r}")
    scale = max(abs(H.omega), H.r)
    coherent_cases = {CaseTag.ELLIPTIC_COHERENT, CaseTag.BETA0_COHERENT,
                      CaseTag.HYPERBOLIC_OMEGA0_COHERENT}
    problems = []
    if case in coherent_cases and gamma != 1:
        problems.append("gamma must equal 1")
    if case in {CaseTag.ELLIPTIC_GENERAL, CaseTag.ELLIPTIC_COHERENT,
                CaseTag.BETA0_GENERAL, CaseTag.BETA0_COHERENT}:
        if H.regime is not Regime.ELLIPTIC:
            problems.append("requires omega^2 > alpha^2 + beta^2")
    if case in {CaseTag.BETA0_GENERAL, CaseTag.BETA0_COHERENT}:
        if not _is_zero(H.beta, scale) or H.alpha < 0:
            problems.append("requires beta = 0 and alpha >= 0")
    if case in {CaseTag.HYPERBOLIC_OMEGA0_GENERAL, CaseTag.HYPERBOLIC_OMEGA0_COHERENT}:
        if not _is_zero(H.omega, scale) or H.r == 0:
            problems.append("requires omega = 0 and r > 0")
    if case is CaseTag.SCALING_GENERAL:
        if not (_is_zero(H.omega, scale) and _is_zero(H.beta, scale)) or H.alpha <= 0:
            problems.append("requires omega = beta = 0 and alpha > 0")
    if case is CaseTag.PARABOLIC and H.regime is not Regime.PARABOLIC:
        problems.append("requires omega^2 = alpha^2 + beta^2")
    if problems:
        raise CaseConstraintError(f"{case.value}: " + "; ".join(problems))


def closed_form_uncertainties(case: CaseTag, H: QuadraticHamiltonian, gamma: float, t, cfg: SimConfig,
                              drop_cross_term: bool = False):
    """Explicit (var_Q, var_P, var_Q*var_P) for an initial ideal squeezed state.

    ``t`` may be an array.  Every cot(Rt) sin^2(Rt) is evaluated as
    sin(Rt) cos(Rt), so Rt = k pi is regular.

    For the general-gamma beta = 0 and omega = 0 cases the product contains
    the cross term (gamma^2 - 1)(gamma^-2 - 1) X^2 of the two variance
    corrections.  ``drop_cross_term=True`` omits it, which no longer equals
    var_Q * var_P.  The term vanishes for gamma = 1.
    """
    case = CaseTag(case)
    _check_case(case, H, gamma)
    t = np.asarray(t, dtype=float)
    hb = cfg.hbar
    g = gamma
    g2, gm2 = g * g, 1.0 / (g * g)
    w, r, th, R = H.omega, H.r, H.theta, H.R
    st, ct = math.sin(th), math.cos(th)

    if case in (CaseTag.ELLIPTIC_GENERAL, CaseTag.ELLIPTIC_COHERENT,
                CaseTag.BETA0_GENERAL, CaseTag.BETA0_COHERENT):
        s, c = np.sin(R * t), np.cos(R * t)
        sc = s * c

    if case is CaseTag.ELLIPTIC_GENERAL:
        xq = 2 * r**2 + 2 * g2 * w * r * st + (g2 - 1) * (w**2 + r**2 * st**2)
        xp = 2 * r**2 - 2 * gm2 * w * r * st + (gm2 - 1) * (w**2 + r**2 * st**2)
        vq = hb / 2 / g * (1 + s**2 * xq / R**2 + 2 * r * ct * sc / R)
        vp = hb / 2 * g * (1 + s**2 * xp / R**2 - 2 * r * ct * sc / R)
        prod = vq * vp
    elif case is CaseTag.ELLIPTIC_COHERENT:
        vq = hb / 2 * (1 + 2 * r / R * (s**2 * (r + w * st) / R + ct * sc))
        vp = hb / 2 * (1 + 2 * r / R * (s**2 * (r - w * st) / R - ct * sc))
        prod = hb**2 / 4 * (1 + 4 * r**2 / R**2 * s**2 * (w / R * ct * s - st * c) ** 2)
    elif case is CaseTag.BETA0_GENERAL:
        vq = hb / 2 / g * (1 + s**2 * (2 * r**2 + (g2 - 1) * w**2) / R**2 + 2 * r * sc / R)
        vp = hb / 2 * g * (1 + s**2 * (2 * r**2 + (gm2 - 1) * w**2) / R**2 - 2 * r * sc / R)
        k = g2 + gm2
        prod = hb**2 / 4 * (1 + k * 2 * w**2 * r**2 / R**4 * s**4
                            + (k - 2) * w**2 / R**2 * s**2
                            - (g2 - gm2) * 2 * w**2 * r / R**3 * s**3 * c)
        if not drop_cross_term:
            prod = prod + hb**2 / 4 * (g2 - 1) * (gm2 - 1) * w**4 / R**4 * s**4
    elif case is CaseTag.BETA0_COHERENT:
        vq = hb / 2 * (1 + 2 * r / R * (s**2 * r / R + sc))
        vp = hb / 2 * (1 + 2 * r / R * (s**2 * r / R - sc))
        prod = hb**2 / 4 * (1 + 4 * w**2 * r**2 / R**4 * s**4)
    elif case in (CaseTag.HYPERBOLIC_OMEGA0_GENERAL, CaseTag.HYPERBOLIC_OMEGA0_COHERENT):
        ch2, sh2 = np.cosh(2 * r * t), np.sinh(2 * r * t)
        shr2 = np.sinh(r * t) ** 2
        if case is CaseTag.HYPERBOLIC_OMEGA0_COHERENT:
            vq = hb / 2 * (ch2 + ct * sh2)
            vp = hb / 2 * (ch2 - ct * sh2)
            prod = hb**2 / 4 * (1 + st**2 * sh2**2)
        else:
            vq = hb / 2 / g * (ch2 + ct * sh2 + (g2 - 1) * st**2 * shr2)
            vp = hb / 2 * g * (ch2 - ct * sh2 + (gm2 - 1) * st**2 * shr2)
            prod = hb**2 / 4 * (1 + st**2 * sh2**2
                                + (g2 - 1) * st**2 * shr2 * (ch2 - ct * sh2)
                                + (gm2 - 1) * st**2 * shr2 * (ch2 + ct * sh2))
            if not drop_cross_term:
                prod = prod + hb**2 / 4 * (g2 - 1) * (gm2 - 1) * st**4 * shr2**2
    elif case is CaseTag.SCALING_GENERAL:
        vq = hb / 2 / g * np.exp(2 * r * t)
        vp = hb / 2 * g * np.exp(-2 * r * t)
        prod = np.full_like(t, hb**2 / 4)
    else:
        a, b = H.alpha, H.beta
        vq = hb / 2 * ((1 + a * t) ** 2 / g + (b + w) ** 2 * t**2 * g)
        vp = hb / 2 * ((b - w) ** 2 * t**2 / g + (1 - a * t) ** 2 * g)
        prod = hb**2 / 4 * (1 - 2 * a**2 * t**2 + 2 * a**4 * t**4
                            + (1 + a * t) ** 2 * (b - w) ** 2 * t**2 * gm2
                            + (1 - a * t) ** 2 * (b + w) ** 2 * t**2 * g2)
    if t.ndim == 0:
        return float(vq), float(vp), float(prod)
    return vq, vp, prod


def case_for(H: QuadraticHamiltonian, gamma: float) -> CaseTag | None:
    """Most specific closed-form case covering (H, gamma), or None."""
    for case in (CaseTag.SCALING_GENERAL, CaseTag.PARABOLIC,
                 CaseTag.BETA0_COHERENT, CaseTag.BETA0_GENERAL,
                 CaseTag.ELLIPTIC_COHERENT, CaseTag.ELLIPTIC_GENERAL,
                 CaseTag.HYPERBOLIC_OMEGA0_COHERENT, CaseTag.HYPERBOLIC_OMEGA0_GENERAL):
        try:
            _check_case(case, H, gamma)
        except CaseConstraintError:
            continue
        return case
    return None


@dataclass(frozen=True)
class MinimizationTimes:
    """Times at which a coherent state is again minimum-uncertainty.

    Two arithmetic progressions with common step pi/R: k pi / R and
    (phi + k pi) / R with phi = arctan((R/omega) tan(theta)).
    """

    R: float
    phase: float

    @property
    def step(self) -> float:
        return math.pi / self.R

    def first_family(self, k) -> np.ndarray:
        return np.asarray(k) * math.pi / self.R

    def second_family(self, k) -> np.ndarray:
        return (self.phase + np.asarray(k) * math.pi) / self.R

    def times(self, t_max: float, t_min: float = 0.0) -> np.ndarray:
        """All times of both families in [t_min, t_max], sorted, duplicates merged."""
        k_lo = math.floor(t_min * self.R / math.pi) - 1
        k_hi = math.ceil(t_max * self.R / math.pi) + 1
        k = np.arange(k_lo, k_hi + 1)
        ts = np.concatenate([self.first_family(k), self.second_family(k)])
        ts = np.sort(ts[(ts >= t_min - 1e-15) & (ts <= t_max + 1e-15)])
        keep = np.concatenate([[True], np.diff(ts) > 1e-12 * max(1.0, t_max)])
        return ts[keep]


def minimization_times(H: QuadraticHamiltonian) -> MinimizationTimes:
    if H.regime is not Regime.ELLIPTIC:
        raise UnsupportedRegimeError("minimization times are defined for the elliptic regime only")
    if H.omega == 0:
        raise DomainError("second family arctan((R/omega) tan(theta)) is undefined for omega = 0")
    # arctan2 form stays finite at theta = +-pi/2 (tan(theta) infinite); equal mod pi otherwise
    phase = math.atan2(H.R * math.sin(H.theta), H.omega * math.cos(H.theta))
    phase = (phase + math.pi / 2) % math.pi - math.pi / 2
    return MinimizationTimes(H.R, phase)


def transform_hamiltonian(H: QuadraticHamiltonian, T: np.ndarray) -> QuadraticHamiltonian:
    """Express H in new coordinates z' = T z, i.e. H'(z') = H(T^-1 z')."""
    Ti = np.linalg.inv(np.asarray(T, dtype=float))
    return QuadraticHamiltonian.from_form(Ti.T @ H.form() @ Ti)


def rotate_frame(H: QuadraticHamiltonian) -> tuple[LinearFlowMap, QuadraticHamiltonian]:
    """Rotation by theta/2 removing the beta term: H' = w/2 (p'^2 + q'^2) + r q' p'."""
    h = H.theta / 2
    rot = np.array([[math.cos(h), math.sin(h)], [-math.sin(h), math.cos(h)]])
    return LinearFlowMap(rot), transform_hamiltonian(H, rot)


@dataclass(frozen=True)
class NormalForm:
    transform: LinearFlowMap
    hamiltonian: QuadraticHamiltonian
    kind: str  # "oscillator" or "squeeze"
    sign: int


def reduce_normal_form(H: QuadraticHamiltonian, a: float, branch: int = 1,
                       sign: int | None = None) -> NormalForm:
    """One-parameter families of linear canonical maps to a normal form.

    Elliptic: q', p' with H = +-R/2 (p'^2 + q'^2); ``branch`` picks the sign
    of A = +-sqrt(+-(w + b)/R - a^2).  Hyperbolic: H = +-R q' p', a != 0.
    ``sign`` selects the target sign; by default the one for which the
    elliptic family is real (sign of w + b), and + for hyperbolic.
    """
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    w, al, be, R = H.omega, H.alpha, H.beta, H.R
    wb = w + be
    if H.regime is Regime.PARABOLIC:
        raise UnsupportedRegimeError("no normal-form reduction for the parabolic regime")
    if wb == 0:
        raise DomainError("omega + beta = 0: the reduction families are singular")
    if H.regime is Regime.ELLIPTIC:
        sign = (1 if wb > 0 else -1) if sign is None else sign
        rad = sign * wb / R - a * a
        if -1e-14 * max(1.0, a * a) <= rad < 0:
            rad = 0.0   # a on the edge of the family, lost to rounding
        if rad < 0:
            raise DomainError(
                f"A = sqrt({sign:+d}(omega+beta)/R - a^2) is imaginary for a = {a!r}; "
                f"need a^2 <= {sign * wb / R:g}")
        A = branch * math.sqrt(rad)
        top = [(R * a + al * A) / wb, A]
        if sign < 0:
            top = [-top[0], -top[1]]
        T = np.array([top, [(al * a - R * A) / wb, a]])
        target = QuadraticHamiltonian(sign * R, 0.0, 0.0)
        kind = "oscillator"
    else:
        sign = 1 if sign is None else sign
        if a == 0:
            raise DomainError("the hyperbolic family needs a != 0")
        if sign > 0:
            T = np.array([[-(R + al) / wb * a, -a],
                          [(R - al) / (2 * R * a), -wb / (2 * R * a)]])
        else:
            T = np.array([[(R - al) / wb * a, -a],
                          [(R + al) / (2 * R * a), wb / (2 * R * a)]])
        target = QuadraticHamiltonian(0.0, sign * R, 0.0)
        kind = "squeeze"
    return NormalForm(LinearFlowMap(T), transform_hamiltonian(H, T), kind, sign)


def normal_form_target(nf: NormalForm, H: QuadraticHamiltonian) -> QuadraticHamiltonian:
    if nf.kind == "oscillator":
        return QuadraticHamiltonian(nf.sign * H.R, 0.0, 0.0)
    return QuadraticHamiltonian(0.0, nf.sign * H.R, 0.0)
