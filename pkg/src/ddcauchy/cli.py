"""Command-line interface.

Subcommands
-----------
solve     one (delta, alpha, eps) triple, errors printed and appended to CSV
table     iteration-count grid over (alpha, eps)
rates     noise sweep under the configured or preset schedules
spectrum  dense preconditioned spectrum on a coarse mesh
verify    analytic property suite (band measure, integral orders, adjoint,
          trace/Poincare uniformity); exit code 0 iff all checks pass

Every subcommand accepts --config FILE (INI) and repeated --set
section.key=value overrides; command-line values win over the file.  The
rates/table subcommands also accept --preset fig7|fig8.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import experiments as xp
from .inversion import diffuse_tikhonov, error_norms, extend_data
from .verify import run_verify


def _common(parser):
    parser.add_argument("--config", default=None, help="INI config file")
    parser.add_argument("--set", dest="overrides", action="append",
                        default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")
    parser.add_argument("--out", default=None,
                        help="output directory (overrides output.directory)")


def _overrides(args, preset=None):
    ov = {}
    if preset:
        ov.update(xp.apply_preset(preset))
    for item in args.overrides:
        key, _, value = item.partition("=")
        if not _ or "." not in key:
            raise SystemExit(f"bad --set {item!r}; expected section.key=value")
        ov[key.strip()] = value.strip()
    if args.out:
        ov["output.directory"] = args.out
    return ov


def cmd_solve(args):
    ov = _overrides(args)
    ov.setdefault("study.kind", "solve")
    cfg = xp.load_config(args.config, ov)
    ws = xp.Workspace(cfg)
    delta, alpha, eps = args.delta, args.alpha, args.epsilon
    f_del = ws.noisy_data(delta)
    if eps == 0.0:
        u, v, p = ws.sharp_solver.tikhonov(alpha, f_del)
        from .inversion import sharp_error
        err = sharp_error(u, ws.sharp_solver, ws.truth)
        print(f"sharp solve: delta={delta:g} alpha={alpha:g} "
              f"u_err_sharp={err:.6e}")
        return 0
    ops = ws.diffuse_ops(eps)
    f_tilde = extend_data(f_del, ws.sharp_solver.outer_angles, ops)
    sol = diffuse_tikhonov(ops, alpha, f_tilde, rho=cfg.rho,
                           max_iter=cfg.max_iter, mode=cfg.mode)
    norms = error_norms(sol, ws.truth, ops, ops.field)
    print(f"diffuse solve: delta={delta:g} alpha={alpha:g} eps={eps:g} "
          f"iters={sol.report.iterations} converged={sol.report.converged}")
    print(f"  u_err_band={norms.u_err_band:.6e} "
          f"v_err_band={norms.v_err_band:.6e} "
          f"grad_err={norms.grad_err:.6e} u_err_dual={norms.u_err_dual:.6e}")
    return 0 if sol.report.converged else 1


def cmd_table(args):
    cfg = xp.load_config(args.config, _overrides(args, args.preset))
    ws = xp.Workspace(cfg)
    res = xp.run_iteration_table(cfg, ws)
    header = "eps\\alpha " + " ".join(f"{a:>8g}" for a in res.alphas)
    print(header)
    for i, eps in enumerate(res.epsilons):
        row = " ".join(f"{n:>8d}" for n in res.iterations[i])
        print(f"{eps:<9g} {row}")
    xp.emit_outputs(cfg.out_dir, cfg, table=res)
    print(f"outputs in {cfg.out_dir}/")
    return 0 if res.converged.all() else 1


def cmd_rates(args):
    cfg = xp.load_config(args.config, _overrides(args, args.preset))
    ws = xp.Workspace(cfg)
    res = xp.run_rate_study(cfg, ws)
    for r in res.rows:
        err = r.u_err_sharp if r.epsilon == 0.0 else r.u_err_band
        print(f"delta={r.delta:<12g} alpha={r.alpha:<10g} eps={r.epsilon:<8g}"
              f" iters={r.iterations:<4d} u_err={err:.6e}")
    label = args.preset or "rates"
    print(f"u-slope {res.u_fit.slope:.3f} (r2={res.u_fit.r_squared:.3f})"
          + (f", v-slope {res.v_fit.slope:.3f}" if res.v_fit.defined else ""))
    from .inversion import truth_fixture_csv
    fixture = truth_fixture_csv(ws.truth, ws.sharp_solver)
    xp.emit_outputs(cfg.out_dir, cfg, rates={label: res}, truth_csv=fixture)
    print(f"outputs in {cfg.out_dir}/")
    return 0 if all(r.converged for r in res.rows) else 1


def cmd_spectrum(args):
    cfg = xp.load_config(args.config, _overrides(args))
    res = xp.run_spectrum_study(cfg)
    eigs = res.eigenvalues
    print(f"{len(eigs)} eigenvalues, range [{eigs.min():.4g}, "
          f"{eigs.max():.4g}], smallest |lambda| = {np.abs(eigs).min():.3e}")
    if res.bands:
        for key, val in res.bands.items():
            if key == "isolated":
                print(f"  isolated ({len(val)}): "
                      + " ".join(f"{v:.3e}" for v in val[:8]))
            else:
                print(f"  {key}: {val}")
    xp.emit_outputs(cfg.out_dir, cfg, spect=res)
    print(f"outputs in {cfg.out_dir}/")
    return 0


def cmd_verify(args):
    checks = run_verify()
    failed = 0
    for c in checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"[{mark}] {c.name}: {c.detail}")
        failed += 0 if c.passed else 1
    return 0 if failed == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ddcauchy",
        description="Diffuse-domain Tikhonov solver for the annular "
                    "elliptic Cauchy problem")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one (delta, alpha, eps) triple")
    _common(p)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--epsilon", type=float, required=True,
                   help="0 selects the sharp reference mesh")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("table", help="iteration-count table")
    _common(p)
    p.add_argument("--preset", choices=sorted(xp.PRESETS), default=None)
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("rates", help="convergence-rate study")
    _common(p)
    p.add_argument("--preset", choices=sorted(xp.PRESETS), default=None)
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("spectrum", help="preconditioned spectrum study")
    _common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("verify", help="analytic property suite")
    _common(p)
    p.set_defaults(func=cmd_verify)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
