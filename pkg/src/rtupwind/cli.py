"""Command-line front end.

Subcommands: ``check`` (stability report only), ``run`` (transient march
with snapshots), ``steady`` (fixed-point iteration), ``convergence``
(refinement studies).  Exit code 0 means success, 2 means the a-priori
stability checks refused the run, 1 means anything else went wrong.  A
manifest is written even for refused or aborted runs so the output
directory is always self-describing.

Heavy imports happen inside main() so that --threads can pin the BLAS
thread pools through the environment before numpy loads.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rtupwind",
        description="Upwind transport solver on rectangles and boxes")
    parser.add_argument("--threads", type=int, default=None,
                        help="pin numeric thread pools to N threads")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, need_out):
        p.add_argument("--config", required=True,
                       help="JSON config path, or preset:NAME")
        p.add_argument("--out", required=need_out,
                       help="output directory")
        p.add_argument("--force", action="store_true",
                       help="write into a non-empty output directory")

    common(sub.add_parser("check", help="evaluate stability conditions"),
           need_out=False)
    common(sub.add_parser("run", help="march the transient problem"),
           need_out=True)
    common(sub.add_parser("steady", help="iterate to the stationary solution"),
           need_out=True)

    p_conv = sub.add_parser("convergence", help="run refinement studies")
    p_conv.add_argument("--out", required=True, help="output directory")
    p_conv.add_argument("--force", action="store_true")
    p_conv.add_argument("--levels", type=int, default=3,
                        help="space-time halvings (default 3)")
    p_conv.add_argument("--skip-angular", action="store_true",
                        help="only run the space-time study")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be at least 1", file=sys.stderr)
            return 1
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)

    from .errors import ConfigError, NumericsError, StabilityError

    handlers = {"check": _cmd_check, "run": _cmd_run, "steady": _cmd_steady,
                "convergence": _cmd_convergence}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except NumericsError as exc:
        print(f"numerics error: {exc}", file=sys.stderr)
        return 1
    except StabilityError as exc:
        print(f"stability refusal: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 1


def _load(args):
    from .config import load_config, parse_config
    path = args.config
    if path.startswith("preset:"):
        from importlib import resources
        name = path.split(":", 1)[1]
        res = resources.files("rtupwind").joinpath("presets", f"{name}.json")
        try:
            text = res.read_text()
        except (FileNotFoundError, OSError):
            from .errors import ConfigError
            raise ConfigError(f"no preset named {name!r}")
        return parse_config(json.loads(text))
    return load_config(path)


def _prepare_out(args) -> str:
    out = args.out
    if out is None:
        return None
    os.makedirs(out, exist_ok=True)
    if os.listdir(out) and not args.force:
        from .errors import ConfigError
        raise ConfigError(
            f"output directory {out} is not empty; use --force to reuse it")
    return out


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _inventory(out: str, names) -> dict:
    inv = {}
    for name in sorted(names):
        path = os.path.join(out, name)
        inv[name] = {"sha256": _sha256(path),
                     "bytes": os.path.getsize(path)}
    return inv


def _grid_summary(grid) -> dict:
    import numpy as np
    if grid.dimension == 2:
        return {"dimension": 2, "L1": grid.L1, "L2": grid.L2,
                "M1": grid.M1, "M2": grid.M2, "M": grid.M,
                "dx1": grid.dx1, "dx2": grid.dx2, "dtheta": grid.dtheta,
                "dt": grid.dt, "T": grid.T,
                "shape": list(grid.shape)}
    return {"dimension": 3, "L1": grid.L1, "L2": grid.L2, "L3": grid.L3,
            "M1": grid.M1, "M2": grid.M2, "M3": grid.M3,
            "Mtheta": grid.Mtheta, "Mphi": grid.Mphi,
            "n_dir": grid.n_dir, "dx1": grid.dx1, "dx2": grid.dx2,
            "dx3": grid.dx3, "dtheta": grid.dtheta, "dphi": grid.dphi,
            "dt": grid.dt, "T": grid.T, "shape": list(grid.shape)}


def _manifest_skeleton(command: str, cfg, grid, report) -> dict:
    from . import __version__
    return {
        "package": "rtupwind",
        "version": __version__,
        "created_utc": _utc_now(),
        "command": command,
        "config": cfg.raw,
        "grid": _grid_summary(grid),
        "stability": report.to_dict(),
        "determinism": {
            "scattering_sum": "ascending direction index",
            "threads_env": {v: os.environ.get(v) for v in _THREAD_VARS},
        },
        "refused": False,
        "aborted": None,
    }


def _write_manifest(out: str, manifest: dict) -> None:
    with open(os.path.join(out, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _emit_snapshot(out: str, fld, problem, names: list,
                   tag: str, write_intensity: bool) -> None:
    import numpy as np
    from .phasespace import outflow_padded, Field
    from .transient import integrated_intensity
    from .scheme3d import integrated_intensity_3d

    grid = fld.grid
    padded = outflow_padded(fld, problem.inflow)
    snap_name = f"snapshot_{tag}.csv"
    path = os.path.join(out, snap_name)
    if grid.dimension == 2:
        i = np.arange(grid.M1 + 1)
        j = np.arange(grid.M2 + 1)
        n = np.arange(grid.M)
        I, J, N = np.meshgrid(i, j, n, indexing="ij")
        cols = np.column_stack([
            I.ravel(), J.ravel(), N.ravel(),
            grid.x1[I.ravel()], grid.x2[J.ravel()], grid.theta[N.ravel()],
            padded.ravel()])
        header = "i,j,n,x1,x2,theta,I"
        fmt = ["%d", "%d", "%d", "%.17g", "%.17g", "%.17g", "%.17g"]
    else:
        i = np.arange(grid.M1 + 1)
        j = np.arange(grid.M2 + 1)
        ll = np.arange(grid.M3 + 1)
        d = np.arange(grid.n_dir)
        I, J, L3, D = np.meshgrid(i, j, ll, d, indexing="ij")
        cols = np.column_stack([
            I.ravel(), J.ravel(), L3.ravel(), D.ravel(),
            grid.x1[I.ravel()], grid.x2[J.ravel()], grid.x3[L3.ravel()],
            grid.dir_theta[D.ravel()], grid.dir_phi[D.ravel()],
            padded.ravel()])
        header = "i,j,l,d,x1,x2,x3,theta,phi,I"
        fmt = ["%d"] * 4 + ["%.17g"] * 6
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, cols, fmt=fmt, delimiter=",")
    names.append(snap_name)

    if not write_intensity:
        return
    pf = Field(grid, padded, fld.k, fld.norm_mask)
    int_name = f"intensity_{tag}.csv"
    path = os.path.join(out, int_name)
    if grid.dimension == 2:
        phi = integrated_intensity(pf)
        I, J = np.meshgrid(np.arange(grid.M1 + 1), np.arange(grid.M2 + 1),
                           indexing="ij")
        cols = np.column_stack([I.ravel(), J.ravel(),
                                grid.x1[I.ravel()], grid.x2[J.ravel()],
                                phi.ravel()])
        header = "i,j,x1,x2,phi_total"
        fmt = ["%d", "%d", "%.17g", "%.17g", "%.17g"]
    else:
        phi = integrated_intensity_3d(pf)
        I, J, L3 = np.meshgrid(np.arange(grid.M1 + 1),
                               np.arange(grid.M2 + 1),
                               np.arange(grid.M3 + 1), indexing="ij")
        cols = np.column_stack([I.ravel(), J.ravel(), L3.ravel(),
                                grid.x1[I.ravel()], grid.x2[J.ravel()],
                                grid.x3[L3.ravel()], phi.ravel()])
        header = "i,j,l,x1,x2,x3,phi_total"
        fmt = ["%d", "%d", "%d", "%.17g", "%.17g", "%.17g", "%.17g"]
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, cols, fmt=fmt, delimiter=",")
    names.append(int_name)


def _print_report(report) -> None:
    d = report.to_dict()
    print(f"time-step condition: lhs={d['cfl']['lhs']:.6g} bound=1 "
          f"-> {'pass' if report.cfl_pass else 'FAIL'}")
    for key, cond in (("smoothness route", report.c2),
                      ("decay route", report.analytic)):
        if cond.applicable:
            print(f"angular {key}: lhs={cond.lhs:.6g} bound={cond.bound:.6g} "
                  f"-> {'pass' if cond.passes else 'FAIL'}"
                  + (f" ({cond.note})" if cond.note else ""))
        else:
            print(f"angular {key}: not applicable ({cond.note})")
        if cond.minimal_M is not None:
            print(f"  smallest direction count passing the decay route: "
                  f"{cond.minimal_M}")
    print(f"kernel sup condition: lhs={report.sup_lhs:.6g} bound=1 "
          f"-> {'pass' if report.sup_pass else 'FAIL'}")
    print(f"transient gate: {'pass' if report.overall_pass else 'FAIL'}; "
          f"stationary gate: {'pass' if report.stationary_ok else 'FAIL'}")


def _cmd_check(args) -> int:
    cfg = _load(args)
    problem, grid, medium, phase = cfg.build()
    report = problem.stability_report()
    _print_report(report)
    if args.out:
        out = _prepare_out(args)
        with open(os.path.join(out, "stability.json"), "w") as fh:
            json.dump(report.to_dict(), fh, indent=2)
            fh.write("\n")
    gate = report.stationary_ok if cfg.mode == "stationary" \
        else report.overall_pass
    return 0 if gate else 2


def _cmd_run(args) -> int:
    from .config import snapshot_steps
    from .errors import NumericsError

    cfg = _load(args)
    out = _prepare_out(args)
    problem, grid, medium, phase = cfg.build()
    report = problem.stability_report()
    manifest = _manifest_skeleton("run", cfg, grid, report)

    if not report.overall_pass:
        manifest["refused"] = True
        _write_manifest(out, manifest)
        _print_report(report)
        print("refused: stability conditions fail", file=sys.stderr)
        return 2

    steps = snapshot_steps(cfg, grid)
    names: list = []

    def on_snap(fld):
        _emit_snapshot(out, fld, problem, names, f"k{fld.k}",
                       cfg.write_intensity)

    try:
        result = run_transient_with_snapshots(problem, steps, on_snap)
    except NumericsError as exc:
        manifest["aborted"] = {"step": exc.step, "reason": str(exc)}
        manifest["outputs"] = _inventory(out, names)
        _write_manifest(out, manifest)
        print(f"aborted: {exc}", file=sys.stderr)
        return 1

    hist_name = "history.csv"
    _write_history(os.path.join(out, hist_name), grid.dt,
                   result.sup_history, result.bound_history)
    names.append(hist_name)

    manifest["run"] = {
        "steps": result.steps,
        "wall_time_s": result.wall_time,
        "sup_final": result.sup_history[-1],
        "sup_max": float(max(result.sup_history)),
        "min_value": result.min_value,
        "positive": result.positive,
        "bound_satisfied": result.bound_satisfied,
        "norms": result.norms,
    }
    manifest["histories"] = {
        "sup": [float(v) for v in result.sup_history],
        "bound": [float(v) for v in result.bound_history],
    }
    manifest["outputs"] = _inventory(out, names)
    _write_manifest(out, manifest)
    print(f"completed {result.steps} steps; final sup norm "
          f"{result.sup_history[-1]:.17g}; outputs in {out}")
    return 0


def run_transient_with_snapshots(problem, steps, on_snap):
    from .transient import run_transient
    return run_transient(problem, snapshot_steps=steps, on_snapshot=on_snap)


def _write_history(path: str, dt: float, sup_hist, bound_hist) -> None:
    import numpy as np
    k = np.arange(len(sup_hist))
    cols = np.column_stack([k, k * dt, sup_hist, bound_hist])
    with open(path, "w", newline="") as fh:
        fh.write("k,t,sup,bound\n")
        np.savetxt(fh, cols, fmt=["%d", "%.17g", "%.17g", "%.17g"],
                   delimiter=",")


def _cmd_steady(args) -> int:
    import numpy as np
    from .errors import StabilityError
    from .stationary import solve_stationary, steady_residual

    cfg = _load(args)
    out = _prepare_out(args)
    problem, grid, medium, phase = cfg.build()
    report = problem.stability_report()
    manifest = _manifest_skeleton("steady", cfg, grid, report)

    try:
        result = solve_stationary(problem, tol=cfg.tol,
                                  max_iters=cfg.max_iters)
    except StabilityError:
        manifest["refused"] = True
        _write_manifest(out, manifest)
        _print_report(report)
        print("refused: contraction hypotheses fail", file=sys.stderr)
        return 2

    names: list = []
    _emit_snapshot(out, result.field, problem, names, "steady",
                   cfg.write_intensity)
    res_name = "residuals.csv"
    with open(os.path.join(out, res_name), "w", newline="") as fh:
        fh.write("iteration,residual\n")
        cols = np.column_stack([np.arange(1, result.iterations + 1),
                                result.residuals])
        np.savetxt(fh, cols, fmt=["%d", "%.17g"], delimiter=",")
    names.append(res_name)

    manifest["steady"] = {
        "iterations": result.iterations,
        "converged": result.converged,
        "tol": result.tol,
        "rho": result.rho,
        "lambda": result.lam,
        "residual_final": float(result.residuals[-1])
        if result.iterations else 0.0,
        "error_bound": result.error_bound,
        "equation_residual": steady_residual(problem, result.field)
        if grid.dimension == 2 else None,
    }
    manifest["outputs"] = _inventory(out, names)
    _write_manifest(out, manifest)
    print(f"converged={result.converged} in {result.iterations} iterations; "
          f"rho={result.rho:.17g}; outputs in {out}")
    return 0 if result.converged else 1


def _cmd_convergence(args) -> int:
    from .phasefunc import hg2d
    from .verification import (algebraic_decay_kernel, angular_study,
                               polynomial_bump_mms, spacetime_study)

    out = _prepare_out(args)
    names = []
    summary = {}

    mms = polynomial_bump_mms(hg2d(0.5), L=1.0)
    st = spacetime_study(mms, L1=1.0, L2=1.0, M1=10, M2=10, M=20,
                         dt=0.05, T=0.5, n_levels=max(2, args.levels))
    st.write_csv(os.path.join(out, "convergence_spacetime.csv"))
    names.append("convergence_spacetime.csv")
    summary["spacetime"] = st.to_dict()
    print(f"space-time fitted order: {st.fitted_order:.3f} "
          f"(pairwise {['%.3f' % o for o in st.orders]})")

    if not args.skip_angular:
        kern = algebraic_decay_kernel()
        ang = angular_study(kern, Ms=[8, 12, 16, 24, 32])
        ang.write_csv(os.path.join(out, "convergence_angular.csv"))
        names.append("convergence_angular.csv")
        summary["angular"] = ang.to_dict()
        print(f"angular fitted order: {ang.fitted_order:.3f} "
              f"(pairwise {['%.3f' % o for o in ang.orders]})")

    summary_doc = {
        "package": "rtupwind",
        "created_utc": _utc_now(),
        "command": "convergence",
        "studies": summary,
    }
    with open(os.path.join(out, "convergence.json"), "w") as fh:
        json.dump(summary_doc, fh, indent=2)
        fh.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
