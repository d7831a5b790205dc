"""Experiment harness: configuration, sweeps, rate fits, CSV emission.

Studies
-------
table     MINRES iteration counts over an (alpha, eps) grid at fixed delta
rates     noise sweep with alpha/eps schedules, error norms and log-log fits
spectrum  dense preconditioned spectrum on a coarse mesh, band detection
solve     a single (delta, alpha, eps) triple

Configuration is a flat INI file with sections [geometry], [mesh],
[solver], [truth], [study], [output]; every value can be overridden from
the command line.  The file is echoed verbatim into the output directory
and every result row carries its full parameter tuple, so runs are
reproducible byte-for-byte from (config, seed).

The named presets "fig7" and "fig8" pin the reference schedule constants
(alpha = delta/2 with eps = 0.25 delta^nu, and alpha = 2 delta^(2/3) with
eps in {35 delta^(2/3), 10 delta^(1/2), 2.8 delta^(1/3), 0}).  The fig8
eps-rules exceed the admissible band width for moderate delta, so that
preset uses a smaller delta range than fig7.
"""

from __future__ import annotations

import configparser
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .assembly import OperatorSet, assemble_sharp
from .geometry import AnnulusGeometry, ConductivityTensor, PhaseField
from .harmonics import AngularSeries, GroundTruth, synthesize_truth
from .inversion import (SharpSolver, add_noise, diffuse_tikhonov,
                        error_norms, extend_data, sharp_error)
from .mesh import build_background, mesh_annulus, quadrature, refine_band
from .saddle import RieszPreconditioner, build_system, detect_bands, spectrum


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

DEFAULTS = {
    "geometry": {
        "r_inner": "0.3",
        "r_outer": "1.0",
        "split_radius": "0.65",
        "sigma_t": "1.0",
        "sigma_r": "0.3",
    },
    "mesh": {
        "h0": "0.1",
        "max_levels": "6",
        "quad_degree": "2",
        "subdivision": "4",
        "sharp_n_angular": "192",
        "sharp_n_radial": "48",
    },
    "solver": {
        "rho": "1e-10",
        "max_iter": "2000",
        "mode": "exact",
        "dense_cap": "4000",
    },
    "truth": {
        # source density on the outer boundary, kind:k:coef terms
        "series": "cos:2:1.0, sin:3:0.5",
        "amplitude": "1.0",
    },
    "study": {
        "kind": "rates",
        # table study
        "alphas": "1.0, 0.1, 0.01, 0.001, 0.0001",
        "epsilons": "0.25, 0.125, 0.0625, 0.03125, 0.015625",
        "table_delta": "0.001",
        # rate study: alpha = alpha_coef * delta^alpha_exp, same for eps;
        # eps_coef = 0 selects the sharp mesh
        "deltas": "0.0625, 0.03125, 0.015625, 0.0078125, 0.00390625, "
                  "0.001953125, 0.0009765625",
        "alpha_coef": "0.5",
        "alpha_exp": "1.0",
        "eps_coef": "0.25",
        "eps_exp": "0.5",
        # spectrum study
        "alpha": "1e-4",
        "epsilon": "0.125",
        "spectrum_h0": "0.08",
    },
    "output": {
        "directory": "out",
        "seed": "1234",
    },
}


@dataclass
class ExperimentConfig:
    """Typed view of the INI configuration."""

    geometry: AnnulusGeometry
    tensor: ConductivityTensor
    h0: float
    max_levels: int
    quad_degree: int
    subdivision: int
    sharp_n_angular: int
    sharp_n_radial: int
    rho: float
    max_iter: int
    mode: str
    dense_cap: int
    truth_series: AngularSeries
    study_kind: str
    alphas: list
    epsilons: list
    table_delta: float
    deltas: list
    alpha_coef: float
    alpha_exp: float
    eps_coef: float
    eps_exp: float
    spec_alpha: float
    spec_epsilon: float
    spectrum_h0: float
    out_dir: str
    seed: int
    raw_text: str = ""


def _parse_series(text: str, amplitude: float) -> AngularSeries:
    terms = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        kind, k, coef = piece.split(":")
        terms.append((kind.strip(), int(k), float(coef) * amplitude))
    return AngularSeries.of(*terms)


def _floats(text: str) -> list:
    return [float(p) for p in text.split(",") if p.strip()]


def load_config(path: str = None, overrides: dict = None) -> ExperimentConfig:
    """Read an INI file (optional), apply key=value overrides, and type it.

    Overrides use dotted keys, e.g. {"study.kind": "table"}.  Flag values
    take precedence over the file, which takes precedence over defaults.
    """
    parser = configparser.ConfigParser()
    parser.read_dict(DEFAULTS)
    if path is not None:
        with open(path) as fh:
            parser.read_file(fh)
    for key, value in (overrides or {}).items():
        section, option = key.split(".", 1)
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option, str(value))
    echo = io.StringIO()
    parser.write(echo)

    geo = AnnulusGeometry(
        r_inner=parser.getfloat("geometry", "r_inner"),
        r_outer=parser.getfloat("geometry", "r_outer"),
        split_radius=parser.getfloat("geometry", "split_radius"),
    )
    tensor = ConductivityTensor(
        sigma_t=parser.getfloat("geometry", "sigma_t"),
        sigma_r=parser.getfloat("geometry", "sigma_r"),
    )
    series = _parse_series(parser.get("truth", "series"),
                           parser.getfloat("truth", "amplitude"))
    return ExperimentConfig(
        geometry=geo,
        tensor=tensor,
        h0=parser.getfloat("mesh", "h0"),
        max_levels=parser.getint("mesh", "max_levels"),
        quad_degree=parser.getint("mesh", "quad_degree"),
        subdivision=parser.getint("mesh", "subdivision"),
        sharp_n_angular=parser.getint("mesh", "sharp_n_angular"),
        sharp_n_radial=parser.getint("mesh", "sharp_n_radial"),
        rho=parser.getfloat("solver", "rho"),
        max_iter=parser.getint("solver", "max_iter"),
        mode=parser.get("solver", "mode"),
        dense_cap=parser.getint("solver", "dense_cap"),
        truth_series=series,
        study_kind=parser.get("study", "kind"),
        alphas=_floats(parser.get("study", "alphas")),
        epsilons=_floats(parser.get("study", "epsilons")),
        table_delta=parser.getfloat("study", "table_delta"),
        deltas=_floats(parser.get("study", "deltas")),
        alpha_coef=parser.getfloat("study", "alpha_coef"),
        alpha_exp=parser.getfloat("study", "alpha_exp"),
        eps_coef=parser.getfloat("study", "eps_coef"),
        eps_exp=parser.getfloat("study", "eps_exp"),
        spec_alpha=parser.getfloat("study", "alpha"),
        spec_epsilon=parser.getfloat("study", "epsilon"),
        spectrum_h0=parser.getfloat("study", "spectrum_h0"),
        out_dir=parser.get("output", "directory"),
        seed=parser.getint("output", "seed"),
        raw_text=echo.getvalue(),
    )


# Reference schedule constants for the two named rate studies.  The fig8
# rules need smaller noise levels to keep eps admissible (35 delta^(2/3)
# < 0.25 requires delta < 2^-10.7), hence the shifted delta range.
PRESETS = {
    "fig7": {
        "study.kind": "rates",
        "study.alpha_coef": "0.5", "study.alpha_exp": "1.0",
        "study.eps_coef": "0.25", "study.eps_exp": "0.5",
        "study.deltas": ("0.0625, 0.03125, 0.015625, 0.0078125, "
                         "0.00390625, 0.001953125, 0.0009765625"),
        "truth.series": "cos:1:1.0, cos:2:0.6, sin:3:0.4",
        "truth.amplitude": "7.0",
    },
    "fig8": {
        "study.kind": "rates",
        "study.alpha_coef": "2.0", "study.alpha_exp": "0.6666666666666666",
        "study.eps_coef": "35.0", "study.eps_exp": "0.6666666666666666",
        "study.deltas": ("0.00048828125, 0.000244140625, 0.0001220703125, "
                         "6.103515625e-05, 3.0517578125e-05, "
                         "1.52587890625e-05"),
        "truth.series": "cos:1:1.0, cos:2:0.1, sin:3:0.3",
        "truth.amplitude": "7.0",
    },
}


def apply_preset(name: str, overrides: dict = None) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from "
                         f"{sorted(PRESETS)}")
    merged = dict(PRESETS[name])
    merged.update(overrides or {})
    return merged


# ---------------------------------------------------------------------------
# Shared machinery
# ---------------------------------------------------------------------------


def levels_for(eps: float, h0: float, max_levels: int) -> int:
    """Band refinement depth so band triangles resolve eps (h_band <= eps)."""
    if eps >= h0:
        return 0
    return min(max_levels, int(math.ceil(math.log2(h0 / eps))))


@dataclass
class Workspace:
    """Caches meshes/operators shared across sweep cells."""

    cfg: ExperimentConfig
    background: object = None
    sharp_solver: SharpSolver = None
    truth: GroundTruth = None
    _ops_cache: dict = field(default_factory=dict)

    def __post_init__(self):
        cfg = self.cfg
        self.background = build_background(cfg.h0)
        ann = mesh_annulus(cfg.geometry, cfg.sharp_n_angular,
                           cfg.sharp_n_radial)
        self.sharp_solver = SharpSolver(assemble_sharp(ann, cfg.tensor))
        self.truth = synthesize_truth(cfg.geometry, cfg.tensor,
                                      cfg.truth_series)

    def diffuse_ops(self, eps: float) -> OperatorSet:
        key = float(eps)
        if key not in self._ops_cache:
            cfg = self.cfg
            pf = PhaseField(cfg.geometry, eps)
            levels = levels_for(eps, cfg.h0, cfg.max_levels)
            mesh = refine_band(self.background, pf, levels)
            rule = quadrature(cfg.quad_degree, cfg.subdivision)
            self._ops_cache[key] = OperatorSet.build(mesh, pf, cfg.tensor,
                                                     rule)
        return self._ops_cache[key]

    def noisy_data(self, delta: float):
        """f_delta on the sharp outer boundary for the configured seed."""
        solver = self.sharp_solver
        f_dag = self.truth.f_series(solver.outer_angles)
        return add_noise(f_dag, delta, self.cfg.seed, solver.t_oo)


# ---------------------------------------------------------------------------
# Rate fitting
# ---------------------------------------------------------------------------


@dataclass
class RateFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    defined: bool = True


def fit_loglog_slope(points, window=None) -> RateFit:
    """Ordinary least squares on (log delta, log error).

    ``points`` is a sequence of (delta, error) pairs; ``window`` optionally
    restricts to deltas within [lo, hi].  Nonpositive values are rejected.
    """
    pts = [(float(d), float(e)) for d, e in points]
    if window is not None:
        lo, hi = window
        pts = [(d, e) for d, e in pts if lo <= d <= hi]
    if any(d <= 0.0 or e <= 0.0 for d, e in pts):
        raise ValueError("log-log fit requires positive deltas and errors")
    if len(pts) < 2:
        return RateFit(float("nan"), float("nan"), float("nan"), len(pts),
                       defined=False)
    x = np.log([d for d, _ in pts])
    y = np.log([e for _, e in pts])
    a = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - a @ coef
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(float(coef[0]), float(coef[1]), r2, len(pts))


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------


@dataclass
class TableResult:
    alphas: list
    epsilons: list
    iterations: np.ndarray       # (n_eps, n_alpha)
    converged: np.ndarray        # bool, same shape
    residual_histories: dict     # (eps, alpha) -> list
    params: dict


def run_iteration_table(cfg: ExperimentConfig,
                        ws: Workspace = None) -> TableResult:
    """One diffuse solve per (alpha, eps) cell; counts laid out with eps
    rows and alpha columns, like the reference iteration table."""
    ws = ws or Workspace(cfg)
    iters = np.zeros((len(cfg.epsilons), len(cfg.alphas)), dtype=int)
    conv = np.zeros_like(iters, dtype=bool)
    hist = {}
    f_del = ws.noisy_data(cfg.table_delta)
    for i, eps in enumerate(cfg.epsilons):
        ops = ws.diffuse_ops(eps)
        f_tilde = extend_data(f_del, ws.sharp_solver.outer_angles, ops)
        for j, alpha in enumerate(cfg.alphas):
            sol = diffuse_tikhonov(ops, alpha, f_tilde, rho=cfg.rho,
                                   max_iter=cfg.max_iter, mode=cfg.mode)
            iters[i, j] = sol.report.iterations
            conv[i, j] = sol.report.converged
            hist[(eps, alpha)] = sol.report.residual_history
    params = {"delta": cfg.table_delta, "rho": cfg.rho, "mode": cfg.mode,
              "h0": cfg.h0, "seed": cfg.seed}
    return TableResult(list(cfg.alphas), list(cfg.epsilons), iters, conv,
                       hist, params)


@dataclass
class RateRow:
    delta: float
    alpha: float
    epsilon: float       # 0 encodes the sharp mesh
    iterations: int
    converged: bool
    u_err_band: float
    v_err_band: float
    grad_err: float
    u_err_dual: float
    u_err_sharp: float


@dataclass
class RateResult:
    rows: list
    u_fit: RateFit
    v_fit: RateFit
    params: dict


def _schedule(cfg: ExperimentConfig, delta: float):
    alpha = cfg.alpha_coef * delta ** cfg.alpha_exp
    eps = cfg.eps_coef * delta ** cfg.eps_exp
    return alpha, eps


def run_rate_study(cfg: ExperimentConfig, ws: Workspace = None) -> RateResult:
    """Noise sweep under the configured (alpha, eps) schedules.

    eps_coef = 0 runs the sharp reference instead of the diffuse solver;
    the u-fit then uses the sharp L2 control error.
    """
    ws = ws or Workspace(cfg)
    rows = []
    sharp_mode = cfg.eps_coef == 0.0
    for delta in cfg.deltas:
        alpha, eps = _schedule(cfg, delta)
        f_del = ws.noisy_data(delta)
        if sharp_mode:
            u, v, p = ws.sharp_solver.tikhonov(alpha, f_del)
            err_sharp = sharp_error(u, ws.sharp_solver, ws.truth)
            rows.append(RateRow(delta, alpha, 0.0, 0, True,
                                float("nan"), float("nan"), float("nan"),
                                float("nan"), err_sharp))
            continue
        if eps > ws.cfg.geometry.eps_admissible:
            raise ValueError(
                f"eps rule gives {eps:.4f} at delta={delta:g}, beyond the "
                f"admissible {ws.cfg.geometry.eps_admissible}; shrink the "
                f"delta range or the eps rule")
        ops = ws.diffuse_ops(eps)
        f_tilde = extend_data(f_del, ws.sharp_solver.outer_angles, ops)
        sol = diffuse_tikhonov(ops, alpha, f_tilde, rho=cfg.rho,
                               max_iter=cfg.max_iter, mode=cfg.mode)
        norms = error_norms(sol, ws.truth, ops, ops.field)
        rows.append(RateRow(delta, alpha, eps, sol.report.iterations,
                            sol.report.converged, norms.u_err_band,
                            norms.v_err_band, norms.grad_err,
                            norms.u_err_dual, float("nan")))
    if sharp_mode:
        u_fit = fit_loglog_slope([(r.delta, r.u_err_sharp) for r in rows])
        v_fit = RateFit(float("nan"), float("nan"), float("nan"), 0, False)
    else:
        u_fit = fit_loglog_slope([(r.delta, r.u_err_band) for r in rows])
        v_fit = fit_loglog_slope([(r.delta, r.v_err_band) for r in rows])
    params = {"alpha_coef": cfg.alpha_coef, "alpha_exp": cfg.alpha_exp,
              "eps_coef": cfg.eps_coef, "eps_exp": cfg.eps_exp,
              "rho": cfg.rho, "mode": cfg.mode, "h0": cfg.h0,
              "seed": cfg.seed}
    return RateResult(rows, u_fit, v_fit, params)


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    bands: dict
    alpha: float
    epsilon: float
    params: dict


def run_spectrum_study(cfg: ExperimentConfig) -> SpectrumResult:
    """Dense preconditioned spectrum on a dedicated coarse mesh."""
    pf = PhaseField(cfg.geometry, cfg.spec_epsilon)
    mesh = build_background(cfg.spectrum_h0)
    rule = quadrature(cfg.quad_degree, cfg.subdivision)
    ops = OperatorSet.build(mesh, pf, cfg.tensor, rule)
    f0 = np.zeros(mesh.num_vertices)
    system = build_system(ops, cfg.spec_alpha, f0,
                          allow_zero_alpha=cfg.spec_alpha == 0.0)
    prec = RieszPreconditioner(system, mode="exact")
    eigs = spectrum(system, prec, dense_cap=cfg.dense_cap)
    bands = (detect_bands(eigs, cfg.spec_alpha) if cfg.spec_alpha > 0.0
             else {})
    params = {"h0": cfg.spectrum_h0, "size": system.size, "seed": cfg.seed}
    return SpectrumResult(eigs, bands, cfg.spec_alpha, cfg.spec_epsilon,
                          params)


# ---------------------------------------------------------------------------
# Output emission
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    """Shortest round-trip decimal; deterministic across runs."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
    except OSError as err:
        raise OSError(f"cannot write {path}: {err}") from err


def emit_outputs(out_dir: str, cfg: ExperimentConfig, table: TableResult = None,
                 rates: dict = None, spect: SpectrumResult = None,
                 truth_csv: str = None) -> list:
    """Write CSVs, the verbatim config echo and the plot script.

    ``rates`` maps a schedule label to a RateResult so several schedules
    can share one rates.csv.  Returns the list of paths written.
    """
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def emit(name, text):
        path = os.path.join(out_dir, name)
        _write(path, text)
        written.append(path)

    emit("config.echo", cfg.raw_text)
    if truth_csv is not None:
        emit("truth.csv", truth_csv)

    lines = ["schedule,delta,alpha,epsilon,h0,levels,rho,mode,seed,iters,"
             "converged,u_err_band,v_err_band,grad_err,u_err_dual,"
             "u_err_sharp"]
    if rates:
        for label in sorted(rates):
            res = rates[label]
            for r in sorted(res.rows, key=lambda r: (-r.delta, r.epsilon)):
                lev = (levels_for(r.epsilon, cfg.h0, cfg.max_levels)
                       if r.epsilon > 0 else 0)
                lines.append(",".join([
                    label, _fmt(r.delta), _fmt(r.alpha), _fmt(r.epsilon),
                    _fmt(cfg.h0), _fmt(lev), _fmt(cfg.rho), cfg.mode,
                    _fmt(cfg.seed), _fmt(r.iterations), _fmt(r.converged),
                    _fmt(r.u_err_band), _fmt(r.v_err_band), _fmt(r.grad_err),
                    _fmt(r.u_err_dual), _fmt(r.u_err_sharp)]))
    emit("rates.csv", "\n".join(lines) + "\n")

    lines = ["eps\\alpha"]
    if table:
        header = ["eps\\alpha"] + [_fmt(a) for a in table.alphas]
        lines = [",".join(header)]
        for i, eps in enumerate(table.epsilons):
            row = [_fmt(eps)] + [str(int(n)) for n in table.iterations[i]]
            lines.append(",".join(row))
        flagged = np.argwhere(~table.converged)
        for i, j in flagged:
            lines.append(f"# not converged: eps={_fmt(table.epsilons[i])} "
                         f"alpha={_fmt(table.alphas[j])}")
    emit("table.csv", "\n".join(lines) + "\n")

    lines = ["index,eigenvalue"]
    if spect is not None:
        for key in sorted(spect.bands):
            val = spect.bands[key]
            if isinstance(val, (list, tuple)):
                text = " ".join(_fmt(x) for x in val)
            else:
                text = "none" if val is None else _fmt(val)
            lines.append(f"# band {key}: {text}")
        lines.append(f"# alpha {_fmt(spect.alpha)} epsilon "
                     f"{_fmt(spect.epsilon)} size {spect.params['size']}")
        for i, v in enumerate(spect.eigenvalues):
            lines.append(f"{i},{_fmt(v)}")
    emit("spectrum.csv", "\n".join(lines) + "\n")

    lines = ["context,iteration,residual"]
    if table:
        for (eps, alpha) in sorted(table.residual_histories):
            hist = table.residual_histories[(eps, alpha)]
            ctx = f"eps={_fmt(eps)};alpha={_fmt(alpha)}"
            for it, r in enumerate(hist, start=1):
                lines.append(f"{ctx},{it},{_fmt(r)}")
    emit("residuals.csv", "\n".join(lines) + "\n")

    emit("plot_results.py", _plot_script())
    return written


def _plot_script() -> str:
    """Self-contained matplotlib script for the emitted CSVs."""
    return '''#!/usr/bin/env python3
"""Plot rate curves (with reference slopes 1/2 and 2/3) and the spectrum.

Reads rates.csv and spectrum.csv from this directory; writes rates.png
and spectrum.png next to them.  Only needs numpy + matplotlib.
"""
import csv
import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

here = os.path.dirname(os.path.abspath(__file__))

rows = []
with open(os.path.join(here, "rates.csv")) as fh:
    for rec in csv.DictReader(fh):
        rows.append(rec)
if rows:
    fig, ax = plt.subplots(figsize=(6, 5))
    labels = sorted({r["schedule"] for r in rows})
    for label in labels:
        sel = [r for r in rows if r["schedule"] == label]
        d = np.array([float(r["delta"]) for r in sel])
        key = "u_err_sharp" if float(sel[0]["epsilon"]) == 0 else "u_err_band"
        e = np.array([float(r[key]) for r in sel])
        ax.loglog(d, e, "o-", label=label)
    d = np.array(sorted({float(r["delta"]) for r in rows}))
    tops = [float(r["u_err_band"]) for r in rows
            if r["u_err_band"] not in ("", "nan")]
    tops += [float(r["u_err_sharp"]) for r in rows
             if r["u_err_sharp"] not in ("", "nan")]
    top = max(tops)
    ax.loglog(d, top * (d / d.max()) ** 0.5, "k--", lw=0.8,
              label="slope 1/2")
    ax.loglog(d, top * (d / d.max()) ** (2.0 / 3.0), "k:", lw=0.8,
              label="slope 2/3")
    ax.set_xlabel("noise level")
    ax.set_ylabel("control error")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.savefig(os.path.join(here, "rates.png"), bbox_inches="tight")

eigs = []
with open(os.path.join(here, "spectrum.csv")) as fh:
    body = (ln for ln in fh if not ln.startswith("#"))
    for rec in csv.DictReader(body):
        eigs.append(float(rec["eigenvalue"]))
if eigs:
    eigs = np.array(eigs)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(len(eigs)), np.abs(eigs), ".", ms=3)
    ax.set_xlabel("index")
    ax.set_ylabel("|eigenvalue|")
    ax.grid(True, alpha=0.3)
    fig.savefig(os.path.join(here, "spectrum.png"), bbox_inches="tight")
'''
