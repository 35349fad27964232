"""moyal-lab: figure data, scenario traces, self-checks and normal forms.

Exit codes: 0 ok, 1 verification failure (or other runtime error),
2 bad configuration, 3 time outside every validity window.
"""
from __future__ import annotations

import argparse
import configparser
import logging
import math
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import quartic_flow as qf
from .checks import run_suite, SUITES
from .errors import (ConfigError, MoyalLabError, OutsideValidityError, QuadratureDivergenceError)
from .liouville_oracle import classical_transport, quadrature_expectation
from .phase_core import SimConfig
from .quadratic_flow import (CaseTag, CovarianceMatrix, QuadraticHamiltonian, Regime, case_for,
                             closed_form_uncertainties, flow_matrices, propagate_variances,
                             reduce_normal_form, rotate_frame)
from .states import GaussianState, coherent, quartic_coherent, squeezed

log = logging.getLogger("moyal_lab")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_VALIDITY = 0, 1, 2, 3
HEISENBERG_TOL = 1e-10
FIG1_SAMPLES = 400
FIG2_HALF_SAMPLES = 400     # fig2 has 2 * this + 1 rows, t = 0 included exactly
FIG2_GUARD = 1e-3           # in units of pi / (hbar lam)

TRACE_COLUMNS = ("t", "mean_Q", "mean_P", "var_Q", "var_P", "product", "heisenberg_ok")


# ------------------------------------------------------------------- CSV

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    return f"{float(x):.17g}"


def write_csv(path, comment: str, columns, rows):
    lines = [f"# {comment}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    text = "\n".join(lines) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)


# ---------------------------------------------------------------- figures

FIG1 = {
    # name: (omega, r, theta, case)
    "fig1a": (5.0, 2.0, math.pi / 3, CaseTag.ELLIPTIC_COHERENT),
    "fig1b": (5.0, 2.0, 0.0, CaseTag.BETA0_COHERENT),
    "fig1c": (0.0, 2.0, math.pi / 4, CaseTag.HYPERBOLIC_OMEGA0_COHERENT),
    "fig1d": (0.0, 2.0, 0.0, CaseTag.SCALING_GENERAL),
}
FIGURES = tuple(FIG1) + ("fig2",)


def figure_data(name: str, cfg: SimConfig | None = None):
    """(comment, columns, rows as an (n, 4) array) for one figure."""
    cfg = cfg or SimConfig(hbar=1.0)
    if name in FIG1:
        omega, r, theta, case = FIG1[name]
        H = QuadraticHamiltonian.from_polar(omega, r, theta)
        x = np.linspace(0.0, 2 * math.pi, FIG1_SAMPLES)
        vq, vp, prod = closed_form_uncertainties(case, H, 1.0, x / H.R, cfg)
        comment = (f"moyal-lab {__version__} figure={name} case={case.value} omega={omega:.17g} "
                   f"r={r:.17g} theta={theta:.17g} R={H.R:.17g} hbar={cfg.hbar:.17g} gamma=1 x=Rt")
        return comment, ("x", "var_Q", "var_P", "product"), np.column_stack([x, vq, vp, prod])
    if name == "fig2":
        lam = 1.0
        s = quartic_coherent(0.01, 1.0, 1.0, cfg)
        iv = qf.validity(qf.Quantity.UNCERTAINTIES, lam, cfg, 0)
        half = iv.t_hi - FIG2_GUARD * math.pi / (cfg.hbar * lam)
        t = half * np.arange(-FIG2_HALF_SAMPLES, FIG2_HALF_SAMPLES + 1) / FIG2_HALF_SAMPLES
        u = qf.uncertainties(s, lam, t, cfg)
        comment = (f"moyal-lab {__version__} figure=fig2 lambda=1 w=1 q0=0.01 p0=1 "
                   f"hbar={cfg.hbar:.17g} window={iv} guard={FIG2_GUARD}*pi/(hbar*lambda)")
        return comment, ("t", "var_Q", "var_P", "product"), np.column_stack([t, u.var_q, u.var_p, u.product])
    raise ValueError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")


def cmd_figure(args) -> int:
    comment, cols, rows = figure_data(args.name)
    write_csv(args.output, comment, cols, rows)
    return EXIT_OK


# --------------------------------------------------------------- scenario

CONFIG_KEYS = {
    "system": {"kind", "omega", "alpha", "beta", "lambda"},
    "state": {"kind", "q0", "p0", "gamma", "w"},
    "sim": {"hbar"},
    "time": {"start", "end", "samples"},
    "output": {"columns"},
}


@dataclass
class Scenario:
    system: str
    params: dict
    state_kind: str
    state: GaussianState
    cfg: SimConfig
    t_start: float
    t_end: float
    samples: int
    columns: tuple = TRACE_COLUMNS
    source: dict = field(default_factory=dict)

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.samples)


def _key_lines(text: str) -> dict:
    """(section, key) -> line number, for error messages."""
    out, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"\s*([^=:#;\s][^=:]*?)\s*[=:]", line)
        if m and section is not None:
            out[(section, m.group(1).strip().lower())] = i
    return out


def parse_scenario(text: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if getattr(exc, "errors", None) else None
        raise ConfigError(f"cannot parse config: {exc.message.splitlines()[0]}", lineno) from None
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0], getattr(exc, "lineno", None)) from None
    lines = _key_lines(text)

    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"unknown section [{section}]", _section_line(text, section))
        for key in parser[section]:
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key {section}.{key}", lines.get((section, key)))

    def get(section, key, conv=float, default=None, required=True):
        if parser.has_option(section, key):
            raw = parser.get(section, key).strip()
            try:
                val = conv(raw)
            except ValueError:
                raise ConfigError(f"{section}.{key}: cannot read {raw!r}", lines.get((section, key))) from None
            if conv is float and not math.isfinite(val):
                raise ConfigError(f"{section}.{key} must be finite", lines.get((section, key)))
            return val
        if required and default is None:
            raise ConfigError(f"missing required key {section}.{key}", None)
        return default

    def at(section, key):
        return lines.get((section, key))

    hbar = get("sim", "hbar", default=1.0)
    if hbar <= 0:
        raise ConfigError("sim.hbar must be positive", at("sim", "hbar"))
    cfg = SimConfig(hbar=hbar)

    system = get("system", "kind", str).lower()
    if system == "quadratic":
        params = {k: get("system", k, default=0.0) for k in ("omega", "alpha", "beta")}
    elif system == "quartic":
        params = {"lambda": get("system", "lambda")}
        if params["lambda"] == 0:
            raise ConfigError("system.lambda must be nonzero", at("system", "lambda"))
    else:
        raise ConfigError(f"system.kind must be quadratic or quartic, not {system!r}", at("system", "kind"))

    kind = get("state", "kind", str).lower()
    q0 = get("state", "q0", default=0.0)
    p0 = get("state", "p0", default=0.0)
    if kind == "coherent":
        state = coherent(q0, p0, cfg)
    elif kind == "squeezed":
        gamma = get("state", "gamma")
        if gamma <= 0:
            raise ConfigError("state.gamma must be positive", at("state", "gamma"))
        state = squeezed(q0, p0, gamma, cfg)
    elif kind == "quartic_coherent":
        w = get("state", "w", default=1.0)
        if w <= 0:
            raise ConfigError("state.w must be positive", at("state", "w"))
        state = quartic_coherent(q0, p0, w, cfg)
    else:
        raise ConfigError(f"state.kind must be coherent, squeezed or quartic_coherent, not {kind!r}",
                          at("state", "kind"))

    start = get("time", "start", default=0.0)
    end = get("time", "end")
    samples = get("time", "samples", int)
    if samples < 2:
        raise ConfigError("time.samples must be at least 2 (empty time grid)", at("time", "samples"))
    if not end > start:
        raise ConfigError("time.end must exceed time.start (empty time grid)", at("time", "end"))

    columns = TRACE_COLUMNS
    if parser.has_option("output", "columns"):
        columns = tuple(c.strip() for c in parser.get("output", "columns").split(",") if c.strip())
        bad = [c for c in columns if c not in TRACE_COLUMNS]
        if bad or not columns:
            raise ConfigError(f"output.columns: unknown column(s) {bad}; choose from {', '.join(TRACE_COLUMNS)}",
                              at("output", "columns"))
    return Scenario(system, params, kind, state, cfg, start, end, samples, columns)


def _section_line(text: str, section: str):
    for i, line in enumerate(text.splitlines(), 1):
        if line.strip().lower() == f"[{section}]":
            return i
    return None


def quadratic_trace(sc: Scenario, t: np.ndarray) -> dict:
    H = QuadraticHamiltonian(sc.params["omega"], sc.params["alpha"], sc.params["beta"])
    s = sc.state
    M = flow_matrices(H, t)
    means = M @ s.mean()
    case = case_for(H, s.gamma)
    if case is not None:
        vq, vp, prod = closed_form_uncertainties(case, H, s.gamma, t, sc.cfg)
    else:
        vq, vp = propagate_variances(H, CovarianceMatrix(s.covariance()), t)
        prod = vq * vp
    return {"t": t, "mean_Q": means[:, 0], "mean_P": means[:, 1], "var_Q": vq, "var_P": vp,
            "product": prod, "case": case.value if case else "covariance-propagation"}


def quartic_trace(sc: Scenario, t: np.ndarray) -> dict:
    lam, cfg, s = sc.params["lambda"], sc.cfg, sc.state
    n = qf.window_index(qf.Quantity.UNCERTAINTIES, lam, t, cfg)
    keep = np.zeros(t.shape, dtype=bool)
    for k in np.unique(n):
        iv = qf.validity(qf.Quantity.UNCERTAINTIES, lam, cfg, int(k))
        guard = qf.SINGULAR_RTOL * math.pi / abs(cfg.hbar * lam)
        keep |= (t > iv.t_lo + guard) & (t < iv.t_hi - guard)
    if not keep.any():
        windows = ", ".join(str(qf.validity(qf.Quantity.UNCERTAINTIES, lam, cfg, int(k))) for k in np.unique(n))
        raise OutsideValidityError(f"no sample lies inside a validity window; nearest windows: {windows}")
    if not keep.all():
        log.warning("clipped %d of %d samples lying outside the uncertainty validity windows",
                    int((~keep).sum()), t.size)
    t = t[keep]
    out = {k: np.empty(t.size) for k in ("mean_Q", "mean_P", "var_Q", "var_P", "product")}
    nk = n[keep]
    for k in np.unique(nk):
        sel = nk == k
        fm = qf.first_moments(s, lam, t[sel], cfg)
        u = qf.uncertainties(s, lam, t[sel], cfg)
        out["mean_Q"][sel], out["mean_P"][sel] = fm.mean_q, fm.mean_p
        out["var_Q"][sel], out["var_P"][sel], out["product"][sel] = u.var_q, u.var_p, u.product
    out["t"] = t
    out["case"] = "quartic"
    return out


def quadratic_oracle(sc: Scenario, trace: dict):
    H = QuadraticHamiltonian(sc.params["omega"], sc.params["alpha"], sc.params["beta"])
    cols = {"oracle_var_Q": [], "oracle_var_P": []}
    for t in trace["t"]:
        m = classical_transport(H, sc.state, float(t))
        cols["oracle_var_Q"].append(m.covariance.var_q)
        cols["oracle_var_P"].append(m.covariance.var_p)
    return {k: np.array(v) for k, v in cols.items()}, "covariance propagation"


def quartic_oracle(sc: Scenario, trace: dict):
    lam, cfg, s = sc.params["lambda"], sc.cfg, sc.state
    vq, vp = [], []
    for t in trace["t"]:
        t = float(t)
        try:
            flow = qf.flow_quantum(lam, t, cfg)
            mq = quadrature_expectation(flow.Q, s, cfg)
            mp = quadrature_expectation(flow.P, s, cfg)
            vq.append(quadrature_expectation(qf.star_square(lam, t, "Q", cfg), s, cfg) - mq * mq)
            vp.append(quadrature_expectation(qf.star_square(lam, t, "P", cfg), s, cfg) - mp * mp)
        except QuadratureDivergenceError:
            vq.append(math.nan)
            vp.append(math.nan)
    return {"oracle_var_Q": np.array(vq), "oracle_var_P": np.array(vp)}, "Gauss-Hermite quadrature"


def cmd_simulate(args) -> int:
    path = Path(args.config)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    sc = parse_scenario(text)
    t = sc.times()
    trace = quadratic_trace(sc, t) if sc.system == "quadratic" else quartic_trace(sc, t)
    hb2 = sc.cfg.hbar**2 / 4
    trace["heisenberg_ok"] = trace["product"] >= hb2 - HEISENBERG_TOL
    columns = list(sc.columns)
    report = None
    if args.oracle:
        extra, method = (quadratic_oracle if sc.system == "quadratic" else quartic_oracle)(sc, trace)
        trace.update(extra)
        columns += list(extra)
        rel = []
        for a, b in (("var_Q", "oracle_var_Q"), ("var_P", "oracle_var_P")):
            ok = np.isfinite(trace[b])
            rel.append(np.max(np.abs(trace[a][ok] - trace[b][ok]) / np.abs(trace[b][ok])) if ok.any() else math.nan)
        report = f"oracle={method} max_rel_discrepancy={max(rel):.3e}"
        if not all(np.isfinite(trace[b]).all() for b in extra):
            report += " (some samples: quadrature diverged)"
    p = sc.params
    comment = (f"moyal-lab {__version__} simulate system={sc.system} "
               + " ".join(f"{k}={v:.17g}" for k, v in p.items())
               + f" state={sc.state_kind} q0={sc.state.q0:.17g} p0={sc.state.p0:.17g}"
               + f" var_q={sc.state.var_q:.17g} var_p={sc.state.var_p:.17g} hbar={sc.cfg.hbar:.17g}"
               + f" source={trace['case']}")
    rows = zip(*(trace[c] for c in columns))
    write_csv(args.output, comment, columns, rows)
    if report:
        print(f"# {report}", file=sys.stderr if args.output in (None, "-") else sys.stdout)
    return EXIT_OK


# ----------------------------------------------------------------- verify

def cmd_verify(args) -> int:
    cfg = SimConfig()
    failed = 0
    for check in run_suite(args.suite, cfg):
        print(check.line())
        failed += not check.passed
    print(f"# {failed} check(s) failed" if failed else "# all checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


# ----------------------------------------------------------------- reduce

def _mat(m) -> str:
    return "[[{:.12g}, {:.12g}], [{:.12g}, {:.12g}]]".format(*(np.asarray(m, dtype=float).ravel() + 0.0))


def _ham(H: QuadraticHamiltonian) -> str:
    def clean(x):
        return 0.0 if abs(x) < 1e-12 else x
    return (f"{clean((H.omega + H.beta) / 2):.12g} p'^2 + {clean((H.omega - H.beta) / 2):.12g} q'^2"
            f" + {clean(H.alpha):.12g} q'p'")


def cmd_reduce(args) -> int:
    H = QuadraticHamiltonian(args.omega, args.alpha, args.beta)
    print(f"regime: {H.regime.value}")
    print(f"r = {H.r:.12g}  theta = {H.theta:.12g}  R = {H.R:.12g}")
    rot, Hr = rotate_frame(H)
    print(f"rotation by theta/2: {_mat(rot.matrix)}")
    print(f"  rotated H = {_ham(Hr)}")
    if H.regime is Regime.PARABOLIC:
        print("normal-form reduction: unsupported in the parabolic regime")
        return EXIT_OK
    if abs(H.omega) < 1e-12 and abs(H.beta) < 1e-12 and H.alpha > 0:
        print(f"already in normal form: H = {H.R:.12g} q'p' (identity reduction)")
        return EXIT_OK
    if abs(H.alpha) < 1e-12 and abs(H.beta) < 1e-12 and H.omega > 0:
        print(f"already a harmonic oscillator: H = {H.R / 2:.12g} (p'^2 + q'^2) (identity reduction)")
        return EXIT_OK
    base, pre = H, None
    if H.omega + H.beta == 0:
        # the families are singular here; reduce the rotated Hamiltonian instead
        base, pre = Hr, rot
    if base.regime is Regime.ELLIPTIC:
        bound = abs(base.omega + base.beta) / base.R
        a = 1.0 if bound >= 1.0 else math.sqrt(bound)
    else:
        a = 1.0
    nf = reduce_normal_form(base, a)
    T = nf.transform if pre is None else nf.transform @ pre
    target = "R/2 (p'^2 + q'^2)" if nf.kind == "oscillator" else "R q'p'"
    sign = "" if nf.sign > 0 else "-"
    print(f"normal-form map (a = {a:.12g}{', after rotation' if pre else ''}): {_mat(T.matrix)}")
    print(f"  det = {T.det:.15g}")
    print(f"  transformed H = {_ham(nf.hamiltonian)}")
    coef = H.R / 2 if nf.kind == "oscillator" else H.R
    print(f"  normal form: {sign}{target} = {sign}{coef:.12g} "
          + ("(p'^2 + q'^2)" if nf.kind == "oscillator" else "q'p'"))
    return EXIT_OK


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="moyal-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("figure", help="write the data behind one figure as CSV")
    p.add_argument("name", choices=FIGURES)
    p.add_argument("-o", "--output", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_figure)

    p = sub.add_parser("simulate", help="evaluate a scenario file into an uncertainty trace")
    p.add_argument("-c", "--config", required=True)
    p.add_argument("-o", "--output", default=None)
    p.add_argument("--oracle", action="store_true", help="append independent oracle columns")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run self-checks, one line per check")
    p.add_argument("suite", nargs="?", default="all", choices=("all",) + tuple(SUITES))
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("reduce", help="classify a quadratic Hamiltonian and reduce it to normal form")
    p.add_argument("omega", type=float)
    p.add_argument("alpha", type=float)
    p.add_argument("beta", type=float)
    p.set_defaults(func=cmd_reduce)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="moyal-lab: %(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"moyal-lab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutsideValidityError as exc:
        print(f"moyal-lab: validity error: {exc}", file=sys.stderr)
        return EXIT_VALIDITY
    except (MoyalLabError, OSError) as exc:
        print(f"moyal-lab: error: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
