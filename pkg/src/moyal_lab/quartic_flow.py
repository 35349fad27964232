"""H = lam q^2 p^2: flows, star squares and moments in a quartic coherent state.

All closed forms are functions of x = hbar lam t.  The Moyal-evolved
observables Q(t), P(t) blow up at x = n pi / 2 (n != 0), and their moments in a
Gaussian state are finite only on windows around integer multiples of pi
(first moments, second-moment halves, uncertainty eighths).  Each window is
handled independently.

The state width is called ``w``: var_q = hbar w / 2, var_p = hbar / (2 w).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, FlowSingularityError, FormulaConsistencyError, OutsideValidityError
from .phase_core import SimConfig
from .states import GaussianState
from .star_algebra.polynomial import PolyObservable

# distance to a pole, in units of pi / (hbar lam), treated as singular
SINGULAR_RTOL = 1e-9


@dataclass(frozen=True)
class QuarticHamiltonian:
    lam: float

    def as_poly(self) -> PolyObservable:
        return PolyObservable({(2, 2): self.lam})

    def __call__(self, q, p):
        return self.lam * q**2 * p**2


class Quantity(enum.Enum):
    FIRST_MOMENTS = "FirstMoments"
    SECOND_MOMENTS = "SecondMoments"
    UNCERTAINTIES = "Uncertainties"
    FLOW = "Flow"


# half-width c and spacing s of the windows (-c + n s, c + n s), in units of pi in x
_WINDOWS = {
    Quantity.FIRST_MOMENTS: (0.25, 1.0),
    Quantity.SECOND_MOMENTS: (0.125, 0.5),
    Quantity.UNCERTAINTIES: (0.125, 1.0),
}


@dataclass(frozen=True)
class ValidityInterval:
    t_lo: float
    t_hi: float
    n: int

    def __post_init__(self):
        if not self.t_lo < self.t_hi:
            raise ValueError("empty validity interval")

    def contains(self, t) -> np.ndarray | bool:
        t = np.asarray(t)
        out = (t > self.t_lo) & (t < self.t_hi)
        return bool(out) if out.ndim == 0 else out

    def __str__(self):
        return f"({self.t_lo:.12g}, {self.t_hi:.12g}) [n={self.n}]"


def _scale(lam: float, cfg: SimConfig) -> float:
    if lam == 0:
        raise DomainError("lambda = 0 has no validity windows (the flow is trivial)")
    return cfg.hbar * lam


def _x_to_t(x_lo: float, x_hi: float, hl: float, n: int) -> ValidityInterval:
    a, b = x_lo / hl, x_hi / hl
    return ValidityInterval(min(a, b), max(a, b), n)


def validity(quantity: Quantity, lam: float, cfg: SimConfig, n: int = 0) -> ValidityInterval:
    """Window n of the given quantity.

    For FLOW the windows are the gaps between consecutive poles at
    x = k pi / 2, k != 0: n = 0 is (-pi/2, pi/2), n > 0 is (n pi/2, (n+1) pi/2)
    and n < 0 mirrors it.
    """
    quantity = Quantity(quantity)
    hl = _scale(lam, cfg)
    n = int(n)
    if quantity is Quantity.FLOW:
        h = math.pi / 2
        if n == 0:
            return _x_to_t(-h, h, hl, 0)
        if n > 0:
            return _x_to_t(n * h, (n + 1) * h, hl, n)
        return _x_to_t((n - 1) * h, n * h, hl, n)
    c, s = _WINDOWS[quantity]
    return _x_to_t((n * s - c) * math.pi, (n * s + c) * math.pi, hl, n)


def window_index(quantity: Quantity, lam: float, t, cfg: SimConfig) -> np.ndarray:
    """Index n of the window (of the right spacing) nearest to each t."""
    _, s = _WINDOWS[Quantity(quantity)]
    x = _scale(lam, cfg) * np.asarray(t, dtype=float)
    return np.rint(x / (s * math.pi)).astype(int)


def _require_window(quantity: Quantity, lam: float, t, cfg: SimConfig) -> ValidityInterval:
    """Check that all t lie strictly inside one common window and return it."""
    c, s = _WINDOWS[quantity]
    t = np.asarray(t, dtype=float)
    x = _scale(lam, cfg) * t
    n = np.rint(x / (s * math.pi)).astype(int)
    dist = np.abs(x - n * s * math.pi) / math.pi
    bad = ~(dist < c - SINGULAR_RTOL)
    if np.any(bad) or not np.all(np.isfinite(x)):
        k = int(np.flatnonzero(bad.ravel())[0]) if np.any(bad) else 0
        tk = float(t.ravel()[k])
        near = validity(quantity, lam, cfg, int(n.ravel()[k]))
        raise OutsideValidityError(
            f"{quantity.value} undefined at t = {tk:.12g}; nearest window is {near}", near)
    n0 = int(n.ravel()[0])
    if np.any(n != n0):
        raise OutsideValidityError(
            f"{quantity.value}: samples span several windows; evaluate each window separately",
            validity(quantity, lam, cfg, n0))
    return validity(quantity, lam, cfg, n0)


def _check_pole(x, spacing: float, what: str, hl: float, skip_zero: bool):
    """Raise if any x is within SINGULAR_RTOL * pi of a pole k * spacing * pi (+ offset)."""
    x = np.asarray(x, dtype=float)
    k = np.rint(x / (spacing * math.pi))
    near = np.abs(x - k * spacing * math.pi) <= SINGULAR_RTOL * math.pi
    if skip_zero:
        near &= k != 0
    if np.any(near):
        kk = float(k[near].ravel()[0])
        t_pole = kk * spacing * math.pi / hl
        raise FlowSingularityError(f"{what} is singular near t = {t_pole:.12g}", t_pole)


class FlowPair(NamedTuple):
    Q: callable
    P: callable


def flow_quantum(lam: float, t: float, cfg: SimConfig) -> FlowPair:
    """Moyal-evolved position and momentum observables at time t."""
    hb = cfg.hbar
    x = hb * lam * t
    if lam != 0:
        _check_pole(x, 0.5, "quantum flow", hb * lam, skip_zero=True)
    sec2 = 1.0 / math.cos(x) ** 2
    k = 2.0 / hb * math.tan(x)

    def Q(q, p):
        return sec2 * q * np.exp(k * q * p)

    def P(q, p):
        return sec2 * p * np.exp(-k * q * p)

    return FlowPair(Q, P)


def flow_classical(lam: float, t: float) -> FlowPair:
    def Q(q, p):
        return q * np.exp(2 * lam * t * q * p)

    def P(q, p):
        return p * np.exp(-2 * lam * t * q * p)

    return FlowPair(Q, P)


def star_square(lam: float, t: float, which: str, cfg: SimConfig):
    """Q * Q (which='Q') or P * P (which='P') of the quantum flow, closed form.

    The tan/sec arguments are 2 hbar lam t: this is not the pointwise square.
    """
    if which not in ("Q", "P"):
        raise ValueError("which must be 'Q' or 'P'")
    hb = cfg.hbar
    y = 2 * hb * lam * t
    # poles where cos(2x) = 0, i.e. y = pi/2 + k pi
    if lam != 0:
        _check_pole(y - math.pi / 2, 1.0, "star square", 2 * hb * lam, skip_zero=False)
    sec3 = 1.0 / math.cos(y) ** 3
    k = 2.0 / hb * math.tan(y)
    if which == "Q":
        return lambda q, p: sec3 * q**2 * np.exp(k * q * p)
    return lambda q, p: sec3 * p**2 * np.exp(-k * q * p)


def _check_state(state: GaussianState, cfg: SimConfig):
    if abs(state.var_q * state.var_p - cfg.hbar**2 / 4) > 1e-12 * max(1.0, cfg.hbar**2):
        raise DomainError("quartic moment formulas need a minimum-uncertainty state "
                          "(var_q = hbar w / 2, var_p = hbar / (2 w))")


def _ab(q0, p0, w, x):
    root = np.sqrt(np.cos(2 * x))
    c, s = np.cos(x), np.sin(x)
    return (c * q0 + w * s * p0) / root, (-s * q0 / w + c * p0) / root


def ab_coefficients(state: GaussianState, lam: float, t, cfg: SimConfig):
    x = cfg.hbar * lam * np.asarray(t, dtype=float)
    cos2 = np.cos(2 * x)
    if np.any(~(cos2 > 0)):
        k = int(np.flatnonzero(~(cos2 > 0).ravel())[0])
        n = int(window_index(Quantity.FIRST_MOMENTS, lam, np.ravel(t)[k], cfg)) if lam else 0
        raise OutsideValidityError(f"cos(2 hbar lam t) <= 0 at t = {np.ravel(t)[k]:.12g}",
                                   validity(Quantity.FIRST_MOMENTS, lam, cfg, n) if lam else None)
    a, b = _ab(state.q0, state.p0, state.w, x)
    if a.ndim == 0:
        return float(a), float(b)
    return a, b


class FirstMoments(NamedTuple):
    mean_q: np.ndarray
    mean_p: np.ndarray
    interval: ValidityInterval


class SecondMoments(NamedTuple):
    q2: np.ndarray
    p2: np.ndarray
    interval: ValidityInterval


class Uncertainties(NamedTuple):
    var_q: np.ndarray
    var_p: np.ndarray
    product: np.ndarray
    interval: ValidityInterval


def _out(v):
    v = np.asarray(v)
    return float(v) if v.ndim == 0 else v


def _first(state, lam, t, cfg):
    hb, w, q0, p0 = cfg.hbar, state.w, state.q0, state.p0
    x = hb * lam * np.asarray(t, dtype=float)
    a, b = _ab(q0, p0, w, x)
    cos2 = np.cos(2 * x)
    mq = a / cos2 * np.exp((a * a - q0 * q0) / (hb * w))
    mp = b / cos2 * np.exp(w * (b * b - p0 * p0) / hb)
    return mq, mp


def _second(state, lam, t, cfg):
    hb, w, q0, p0 = cfg.hbar, state.w, state.q0, state.p0
    x = hb * lam * np.asarray(t, dtype=float)
    a2, b2 = _ab(q0, p0, w, 2 * x)
    pref = np.cos(4 * x) ** -1.5
    mq2 = pref * (hb * w / 2 + a2 * a2) * np.exp((a2 * a2 - q0 * q0) / (hb * w))
    mp2 = pref * (hb / w / 2 + b2 * b2) * np.exp(w * (b2 * b2 - p0 * p0) / hb)
    return mq2, mp2


def first_moments(state: GaussianState, lam: float, t, cfg: SimConfig) -> FirstMoments:
    """<Q(t)>, <P(t)> in the quartic coherent state.

    The expression in a(t), b(t) flips sign from one window to the next
    (a(t) is antiperiodic under x -> x + pi) whereas Q(t) itself is periodic;
    the factor (-1)^n restores the integral in window n.
    """
    _check_state(state, cfg)
    if lam == 0:
        t = np.asarray(t, dtype=float)
        return FirstMoments(_out(np.full_like(t, state.q0)), _out(np.full_like(t, state.p0)), None)
    iv = _require_window(Quantity.FIRST_MOMENTS, lam, t, cfg)
    mq, mp = _first(state, lam, t, cfg)
    sign = -1.0 if iv.n % 2 else 1.0
    return FirstMoments(_out(sign * mq), _out(sign * mp), iv)


def second_moments(state: GaussianState, lam: float, t, cfg: SimConfig) -> SecondMoments:
    """<Q * Q>, <P * P>; in odd half-windows the star squares change sign (sec^3)."""
    _check_state(state, cfg)
    if lam == 0:
        t = np.asarray(t, dtype=float)
        m = state.moment
        return SecondMoments(_out(np.full_like(t, m(2, 0))), _out(np.full_like(t, m(0, 2))), None)
    iv = _require_window(Quantity.SECOND_MOMENTS, lam, t, cfg)
    mq2, mp2 = _second(state, lam, t, cfg)
    sign = -1.0 if iv.n % 2 else 1.0
    return SecondMoments(_out(sign * mq2), _out(sign * mp2), iv)


def uncertainties(state: GaussianState, lam: float, t, cfg: SimConfig, *, tol: float | None = None
                  ) -> Uncertainties:
    """(Delta Q)^2, (Delta P)^2 and their product: second moments minus squared first moments."""
    _check_state(state, cfg)
    if lam == 0:
        t = np.asarray(t, dtype=float)
        vq = np.full_like(t, state.var_q)
        vp = np.full_like(t, state.var_p)
        return Uncertainties(_out(vq), _out(vp), _out(vq * vp), None)
    iv = _require_window(Quantity.UNCERTAINTIES, lam, t, cfg)
    with np.errstate(over="ignore"):
        mq, mp = _first(state, lam, t, cfg)
        mq2, mp2 = _second(state, lam, t, cfg)
        vq = mq2 - mq * mq
        vp = mp2 - mp * mp
        product = vq * vp
    tol = cfg.default_tolerance if tol is None else tol
    with np.errstate(invalid="ignore"):
        ratios = np.concatenate([np.ravel(vq / np.maximum(1.0, mq2)), np.ravel(vp / np.maximum(1.0, mp2))])
    ratios = ratios[np.isfinite(ratios)]   # overflow next to the window edge
    worst = ratios.min() if ratios.size else 0.0
    if worst < -tol:
        raise FormulaConsistencyError(f"negative variance from the closed form ({worst:.3e})")
    return Uncertainties(_out(vq), _out(vp), _out(product), iv)


def coherence_times(lam: float, cfg: SimConfig, t_min: float, t_max: float) -> np.ndarray:
    """t = n pi / (hbar lam) in [t_min, t_max]: the product returns to hbar^2 / 4."""
    step = math.pi / abs(_scale(lam, cfg))
    n = np.arange(math.ceil(t_min / step), math.floor(t_max / step) + 1)
    return n * step
