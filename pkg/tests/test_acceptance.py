"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the per-criterion
lines as they complete (the full suite takes a few minutes; the heavy
studies are shared between criteria through module-scoped fixtures).
"""

import numpy as np
import pytest

from ddcauchy import experiments as xp
from ddcauchy.assembly import OperatorSet, assemble_sharp
from ddcauchy.geometry import (AnnulusGeometry, ConductivityTensor,
                               PhaseField, annulus_integral, band_integral,
                               ring_diffuse_integral)
from ddcauchy.harmonics import AngularSeries, synthesize_truth
from ddcauchy.inversion import SharpSolver, diffuse_forward, extend_control
from ddcauchy.mesh import build_background, mesh_annulus, quadrature, refine_band
from ddcauchy.saddle import RieszPreconditioner, build_system, spectrum

GEO = AnnulusGeometry()
TEN = ConductivityTensor()

# reference iteration counts (rows eps = 2^-2 .. 2^-6, cols alpha = 1 .. 1e-4)
REFERENCE_ITERATIONS = {
    2: [57, 100, 143, 186, 238],
    3: [57, 91, 126, 157, 195],
    4: [64, 102, 126, 144, 183],
    5: [57, 83, 115, 143, 159],
    6: [55, 79, 105, 123, 155],
}

# frozen spectrum-band constants, calibrated once on the reference mesh
SPECTRUM_C_FROZEN = 0.99     # alpha-cluster lower edge factor (c in [c a, 2a])
SPECTRUM_A_FROZEN = 0.02     # lower edge of the O(1) band
SPECTRUM_B_FROZEN = 5.0      # upper edge of the O(1) band
NEG_SEPARATION = 0.05        # negative band stays below -this


def report(num, name, passed, detail):
    print(f"\n[criterion {num:2d}] {'PASS' if passed else 'FAIL'} "
          f"{name}: {detail}")
    assert passed, f"criterion {num} ({name}): {detail}"


# ---------------------------------------------------------------------------
# shared heavy computations
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def fig7_runs(tmp_path_factory):
    """fig7 rate study (nu = 1/2 twice for determinism, and nu = 1/3)."""
    out = {}
    base = tmp_path_factory.mktemp("fig7")
    for label, exp in (("half", "0.5"), ("third", "0.3333333333333333")):
        cfg = xp.load_config(overrides=xp.apply_preset(
            "fig7", {"study.eps_exp": exp,
                     "output.directory": str(base / label)}))
        ws = xp.Workspace(cfg)
        out[label] = (cfg, xp.run_rate_study(cfg, ws))
    cfg_b = xp.load_config(overrides=xp.apply_preset(
        "fig7", {"output.directory": str(base / "repeat")}))
    out["repeat"] = (cfg_b, xp.run_rate_study(cfg_b, xp.Workspace(cfg_b)))
    return out


@pytest.fixture(scope="module")
def fig8_runs():
    cfg_d = xp.load_config(overrides=xp.apply_preset("fig8"))
    ws = xp.Workspace(cfg_d)
    diffuse = xp.run_rate_study(cfg_d, ws)
    cfg_s = xp.load_config(overrides=xp.apply_preset(
        "fig8", {"study.eps_coef": "0.0", "study.eps_exp": "0.0"}))
    sharp = xp.run_rate_study(cfg_s, ws)
    return {"diffuse": diffuse, "sharp": sharp}


@pytest.fixture(scope="module")
def table_run():
    cfg = xp.load_config(overrides={
        "study.kind": "table",
        "study.alphas": "1.0, 0.1, 0.01, 0.001, 0.0001",
        "study.epsilons": "0.25, 0.125, 0.0625, 0.03125, 0.015625",
        "study.table_delta": "0.001"})
    return xp.run_iteration_table(cfg, xp.Workspace(cfg))


@pytest.fixture(scope="module")
def spectrum_setup():
    field = PhaseField(GEO, 0.125)
    mesh = build_background(0.08)
    ops = OperatorSet.build(mesh, field, TEN, quadrature(2, 4))
    f0 = np.zeros(mesh.num_vertices)
    return ops, f0


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_band_measure():
    worst = 0.0
    one = lambda p: np.ones(len(p))
    for k in range(2, 7):
        field = PhaseField(GEO, 2.0 ** -k)
        for which, radius in (("H", GEO.r_inner), ("B", GEO.r_outer)):
            got = band_integral(field, one, which)
            worst = max(worst, abs(got / (2 * np.pi * radius) - 1.0))
    report(1, "band-measure identity", worst <= 1e-5,
           f"max relative deviation {worst:.2e} over eps in 2^-2..2^-6 "
           f"(tol 1e-5)")


def test_criterion_02_diffuse_integral_order():
    eps_list = [2.0 ** -k for k in range(3, 8)]
    one = lambda p: np.ones(len(p))
    sq = lambda p: (np.asarray(p) ** 2).sum(axis=1)
    orders = {}
    # g = 1: the two-sided defect cancels exactly on this geometry, so the
    # order is measured on the outer half-ring where it equals pi eps^2/3
    for label, g, r_lo in (("g=1", one, GEO.split_radius),
                           ("g=|x|^2", sq, GEO.split_radius)):
        errs = []
        for eps in eps_list:
            field = PhaseField(GEO, eps)
            diffuse = ring_diffuse_integral(field, g, r_lo,
                                            GEO.r_outer + eps)
            sharp = annulus_integral(GEO, g, r_lo=r_lo)
            errs.append(abs(diffuse - sharp))
        coef = np.polyfit(np.log(eps_list), np.log(errs), 1)
        orders[label] = coef[0]
    ok = all(o >= 1.9 for o in orders.values())
    report(2, "diffuse-integral order", ok,
           ", ".join(f"{k}: {v:.3f}" for k, v in orders.items())
           + " (need >= 1.9; one-sided band defect, see ledger)")


def test_criterion_03_adjoint_consistency():
    mesh = mesh_annulus(GEO, 128, 32)
    solver = SharpSolver(assemble_sharp(mesh, TEN))
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10):
        u = rng.standard_normal(len(solver.inner_angles))
        w = rng.standard_normal(len(solver.outer_angles))
        _, fu = solver.forward(u)
        _, fsw = solver.adjoint(w)
        lhs = float(fu @ (solver.t_oo @ w))
        rhs = float(u @ (solver.t_ii @ fsw))
        worst = max(worst, abs(lhs - rhs)
                    / (solver.inner_norm(u) * solver.outer_norm(w)))
    report(3, "adjoint consistency", worst <= 1e-10,
           f"max |<Fu,w> - <u,F*w>| / (||u|| ||w||) = {worst:.2e} "
           f"(tol 1e-10)")


def test_criterion_04_iteration_robustness(table_run):
    iters = table_run.iterations.astype(float)
    ok = table_run.converged.all()
    detail = []
    # (a) per-alpha spread across eps
    spread = (iters.max(axis=0) / iters.min(axis=0)).max()
    ok_a = spread <= 1.6
    detail.append(f"eps-spread {spread:.2f} (<= 1.6)")
    # (b) affine growth in log10(1/alpha), per eps row
    x = np.log10(1.0 / np.array(table_run.alphas))
    r2_min = 1.0
    for row in iters:
        coef = np.polyfit(x, row, 1)
        resid = row - np.polyval(coef, x)
        r2 = 1.0 - (resid ** 2).sum() / ((row - row.mean()) ** 2).sum()
        r2_min = min(r2_min, r2)
    ok_b = r2_min >= 0.95
    detail.append(f"min R^2 {r2_min:.3f} (>= 0.95)")
    # (c) each count within [1/3, 3] of the reference entry
    ratios = []
    for i, eps in enumerate(table_run.epsilons):
        ref = REFERENCE_ITERATIONS[round(-np.log2(eps))]
        ratios.extend(iters[i] / np.array(ref, dtype=float))
    ratios = np.array(ratios)
    ok_c = bool(np.all(ratios >= 1 / 3) and np.all(ratios <= 3))
    detail.append(f"reference-count ratios in "
                  f"[{ratios.min():.2f}, {ratios.max():.2f}] (within [1/3, 3])")
    report(4, "iteration robustness", ok and ok_a and ok_b and ok_c,
           "; ".join(detail))


def test_criterion_05_spectrum_banding(spectrum_setup):
    ops, f0 = spectrum_setup
    alpha = 1e-4
    system = build_system(ops, alpha, f0)
    assert system.size <= 2000
    prec = RieszPreconditioner(system)
    eigs = spectrum(system, prec)
    neg = eigs[eigs < 0.0]
    pos = eigs[eigs > 0.0]
    ok_a = neg.max() <= -NEG_SEPARATION
    cluster = pos[pos <= 3.0 * alpha]
    ok_b = (cluster.min() >= 0.5 * SPECTRUM_C_FROZEN * alpha
            and len(cluster) > 0)
    unit = pos[pos >= SPECTRUM_A_FROZEN]
    ok_c = len(unit) > 0 and unit.max() <= SPECTRUM_B_FROZEN
    isolated = pos[(pos > 3.0 * alpha) & (pos < SPECTRUM_A_FROZEN)]
    iso_neg = neg[neg > -NEG_SEPARATION]
    n_iso = len(isolated) + len(iso_neg)
    ok_d = n_iso <= 12
    # alpha = 0: ill-posedness cluster at the origin
    system0 = build_system(ops, 0.0, f0, allow_zero_alpha=True)
    eigs0 = spectrum(system0, prec)
    smallest = np.abs(eigs0).min()
    ok_e = smallest < 1e-8
    report(5, "spectrum banding", ok_a and ok_b and ok_c and ok_d and ok_e,
           f"neg band up to {neg.max():.3f}; alpha-cluster "
           f"[{cluster.min() / alpha:.2f}, {cluster.max() / alpha:.2f}] x alpha; "
           f"O(1) band [{unit.min():.3f}, {unit.max():.3f}]; "
           f"{n_iso} isolated (<= 12); alpha=0 smallest {smallest:.1e}")


def test_criterion_06_fig7_rates(fig7_runs):
    _, res_half = fig7_runs["half"]
    _, res_third = fig7_runs["third"]
    s_half = res_half.u_fit.slope
    s_third = res_third.u_fit.slope
    ok = (0.35 <= s_half <= 0.75) and (s_third <= s_half + 0.1)
    ok = ok and all(r.converged for r in res_half.rows + res_third.rows)
    report(6, "fig7 control rate", ok,
           f"u-slope {s_half:.3f} (in [0.35, 0.75]); "
           f"eps~delta^(1/3) slope {s_third:.3f} "
           f"(<= {s_half:.3f} + 0.1)")


def test_criterion_07_fig8_rates(fig8_runs):
    sharp = fig8_runs["sharp"]
    diffuse = fig8_runs["diffuse"]
    s_sharp = sharp.u_fit.slope
    three = sorted((r.delta, r.u_err_band) for r in diffuse.rows)[:3]
    s3 = xp.fit_loglog_slope(three).slope
    ok = (0.5 <= s_sharp <= 0.85) and (s3 >= 0.55)
    ok = ok and all(r.converged for r in diffuse.rows)
    report(7, "fig8 rates", ok,
           f"sharp slope {s_sharp:.3f} (in [0.5, 0.85]); "
           f"diffuse eps=35 delta^(2/3) slope over 3 smallest {s3:.3f} "
           f"(>= 0.55)")


def test_criterion_08_data_fidelity_rate(fig7_runs):
    _, res_half = fig7_runs["half"]
    slope = res_half.v_fit.slope
    ok = 0.8 <= slope <= 1.2
    report(8, "data-fidelity rate", ok,
           f"v-slope {slope:.3f} under fig7 schedule (in [0.8, 1.2])")


def test_criterion_09_perturbation_decay():
    h0 = 0.05
    truth = synthesize_truth(GEO, TEN, AngularSeries.of(
        ("cos", 1, 7.0), ("cos", 2, 4.2), ("sin", 3, 2.8)))
    base = build_background(h0)
    rule = quadrature(2, 4)
    errs, eps_list = [], []
    for k in (3, 4, 5, 6):
        eps = 2.0 ** -k
        field = PhaseField(GEO, eps)
        mesh = refine_band(base, field, xp.levels_for(eps, h0, 6) + 1)
        ops = OperatorSet.build(mesh, field, TEN, rule)
        v = diffuse_forward(ops, extend_control(truth.u_dagger, ops))
        a_v = ops.active_v
        vt = np.zeros(mesh.num_vertices)
        vt[a_v] = truth.v_field(mesh.vertices[a_v],
                                r_min=GEO.r_inner - eps)
        e = (v - vt)[a_v]
        mv = ops.mean_vec[a_v]
        e = e - (mv @ e) / mv.sum()
        r_h = ops.riesz_h()
        errs.append(float(np.sqrt(e @ (r_h @ e))))
        eps_list.append(eps)
    order = float(np.polyfit(np.log(eps_list), np.log(errs), 1)[0])
    decreasing = all(a > b for a, b in zip(errs, errs[1:]))
    report(9, "operator-perturbation decay", order >= 1.2 and decreasing,
           f"H-norm errors {[f'{e:.3e}' for e in errs]}, fitted order "
           f"{order:.3f} (>= 1.2; theory 1.5, tail is mesh-limited)")


def test_criterion_10_determinism(fig7_runs):
    cfg_a, res_a = fig7_runs["half"]
    cfg_b, res_b = fig7_runs["repeat"]
    files_a = xp.emit_outputs(cfg_a.out_dir, cfg_a, rates={"fig7": res_a})
    files_b = xp.emit_outputs(cfg_b.out_dir, cfg_b, rates={"fig7": res_b})
    same = True
    import os
    for fa, fb in zip(sorted(files_a), sorted(files_b)):
        if os.path.basename(fa) == "config.echo":
            continue  # directories differ by design; all data files compared
        with open(fa, "rb") as ha, open(fb, "rb") as hb:
            if ha.read() != hb.read():
                same = False
                break
    report(10, "determinism", same,
           "repeated fig7 run yields byte-identical CSVs")
