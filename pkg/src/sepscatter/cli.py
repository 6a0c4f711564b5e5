"""
Command-line front end.

    sepscatter forward   --profile yukawa --mu 1 --lambda 0.1 --out run/
    sepscatter invert    run/F.csv --out inv/
    sepscatter check     run/F.csv --out chk/
    sepscatter roundtrip --profile gaussian --alpha 0.5 --lambda 0.1
    sepscatter wave      --profile gaussian --q 1 --points pts.csv

Exit codes: 0 success, 2 solvability conditions violated, 3 solver did not
converge or round-trip tolerance missed, 4 bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import (
    ConditionsViolated,
    NoPotential,
    NonConvergence,
    NotContractive,
    ScatteringError,
    SignInconsistent,
    ZeroDenominator,
)
from .forward import (
    ForwardData,
    check_condition7,
    forward_pipeline,
    lippmann_schwinger_residual,
    wavefunction,
)
from .grid import (
    GaussianProfile,
    PotentialSpec,
    TabulatedProfile,
    UniformGrid,
    YukawaProfile,
    extend_hermitian,
    radial_fourier,
)
from .inverse import (
    build_sie,
    contraction_certificate,
    reconstruct_radial,
    solvability_report,
    solve_fixed_point,
    solve_sie,
)
from .io import read_table, write_complex_table, write_report, write_table
from .singular import FFTSingular

EXIT_OK, EXIT_CONDITIONS, EXIT_SOLVER, EXIT_INPUT = 0, 2, 3, 4


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, profile: bool = True, grid: bool = True):
    if profile:
        p.add_argument("--profile", choices=["gaussian", "yukawa", "table"],
                       default="yukawa")
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--mu", type=float, default=1.0)
        p.add_argument("--lambda", dest="lam", type=float, default=0.1)
        p.add_argument("--table", type=Path, help="CSV with header r,v")
    if grid:
        p.add_argument("--grid-L", dest="grid_L", type=float, default=100.0)
        p.add_argument("--grid-N", dest="grid_N", type=int, default=16384)
    p.add_argument("--pad", type=int, default=8,
                   help="zero-padding factor of the FFT singular operator")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--timestamp", action="store_true",
                   help="record the wall-clock time in the report")
    p.add_argument("--dump-config", action="store_true",
                   help="print the resolved configuration as JSON and exit")


def _solver(p: argparse.ArgumentParser, tol_default: float):
    p.add_argument("--method", choices=["collocation", "fixed-point"],
                   default="collocation")
    p.add_argument("--A", dest="A", type=float, default=None)
    p.add_argument("--tol", type=float, default=tol_default)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=500)
    p.add_argument("--reg", type=float, default=None)
    p.add_argument("--force", action="store_true",
                   help="solve even when uniqueness hypotheses fail")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sepscatter", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("forward", help="xi, D and F from a profile")
    _common(p)
    p.add_argument("--eps", type=float, default=1e-8,
                   help="flag shells with |D| below this")

    p = sub.add_parser("invert", help="reconstruct from F.csv")
    p.add_argument("input", type=Path)
    _common(p, profile=False, grid=False)
    _solver(p, 1e-6)

    p = sub.add_parser("check", help="solvability diagnostics for F.csv")
    p.add_argument("input", type=Path)
    _common(p, profile=False, grid=False)

    p = sub.add_parser("roundtrip", help="forward + invert with error metrics")
    _common(p)
    _solver(p, 1e-2)
    p.add_argument("--solver-tol", dest="solver_tol", type=float, default=1e-4)

    p = sub.add_parser("wave", help="Lippmann-Schwinger wavefunction samples")
    _common(p, grid=False)
    p.add_argument("--q", type=float, default=None)
    p.add_argument("--direction", default="0,0,1")
    p.add_argument("--points", type=Path, default=None,
                   help="CSV with header x1,x2,x3")
    p.add_argument("--check-residual", dest="check_residual", action="store_true")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _config(args) -> dict:
    out = {}
    for key, val in sorted(vars(args).items()):
        if key == "dump_config":
            continue
        out[key] = str(val) if isinstance(val, Path) else val
    return out


def _spec(args, allow_zero: bool = False):
    if not math.isfinite(args.lam):
        raise InputError("--lambda must be finite")
    if args.lam == 0 and not allow_zero:
        raise InputError("--lambda must be nonzero (V != 0)")
    if args.profile == "gaussian":
        prof = GaussianProfile(args.alpha)
    elif args.profile == "yukawa":
        prof = YukawaProfile(args.mu)
    else:
        if args.table is None:
            raise InputError("--profile table needs --table PATH")
        data = read_table(args.table, ["r", "v"])
        prof = TabulatedProfile(data[:, 0], data[:, 1])
    if args.lam == 0:
        return None, prof
    return PotentialSpec(args.lam, prof), prof


def _grid(L: float, N: int) -> UniformGrid:
    if N < 8 or N & (N - 1):
        raise InputError(f"--grid-N must be a power of two >= 8, got {N}")
    return UniformGrid(L, N)


def _check_solver_args(args):
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    if args.max_iter < 1:
        raise InputError("--max-iter must be >= 1")


def _provenance(args, grid) -> dict:
    return {
        "grid": None if grid is None else {"L": grid.L, "N": grid.N},
        "pad": args.pad,
        "versions": {"sepscatter": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__},
        "timestamp": (datetime.now(timezone.utc).isoformat(timespec="seconds")
                      if args.timestamp else None),
    }


def _report(command, args, grid, **sections) -> dict:
    report = {"schema": 1, "command": command, "status": "ok", "exit_code": 0,
              "conditions": None, "solver": None, "reconstruction": None}
    report.update(sections)
    report["provenance"] = _provenance(args, grid)
    return report


def _finish(report, args, code, status=None):
    report["exit_code"] = code
    if status is not None:
        report["status"] = status
    write_report(args.out / "report.json", report)
    return code


def read_forward_data(path) -> ForwardData:
    """F.csv -> ForwardData; q >= 0 rows are extended Hermitian-wise."""
    data = read_table(path, ["q", "re", "im"])
    q, F = data[:, 0], data[:, 1] + 1j * data[:, 2]
    if np.any(np.diff(q) <= 0):
        raise ValueError(f"{path}: q must be strictly ascending")
    if q[0] == 0.0:
        N = 2 * (q.size - 1)
        L = float(q[-1])
    else:
        N = q.size
        L = float(-q[0])
    if N < 8 or N % 2:
        raise ValueError(f"{path}: need an even number (>= 8) of grid points")
    grid = UniformGrid(L, N)
    expect = grid.half_points if q[0] == 0.0 else grid.points
    if not np.allclose(q, expect, rtol=0, atol=1e-9 * L):
        raise ValueError(f"{path}: q is not a symmetric uniform grid")
    if q[0] == 0.0:
        return ForwardData(grid, extend_hermitian(F, grid).values)
    return ForwardData(grid, F)


def _write_profile(args, rec):
    name = "profile.csv"
    write_table(args.out / name, ["q", "m"], [rec.q, rec.modulus])
    return {"lambda_sign": rec.lambda_sign, "profile_file": name}


def _solve(args, F, report_obj, op):
    """Run the selected solver; returns (xi, solver section)."""
    if args.method == "collocation":
        sol = solve_sie(build_sie(F), op=op, regularization=args.reg,
                        max_iter=args.max_iter, tol=getattr(args, "solver_tol", args.tol),
                        force=args.force, report=report_obj)
        return sol.xi, {"method": "collocation", "iterations": sol.iterations,
                        "residual": sol.residual}
    A = args.A
    if A is None:
        if report_obj.contraction is None:
            raise NotContractive("no shell A with contraction factor below 0.95")
        A = report_obj.contraction.A
    fp = solve_fixed_point(F, A, op=op, max_iter=args.max_iter)
    return fp.xi, {"method": "fixed-point", "iterations": fp.iterations,
                   "residual": fp.residual, "A": fp.A, "factor": fp.factor}


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_forward(args) -> int:
    spec, _ = _spec(args)
    grid = _grid(args.grid_L, args.grid_N)
    op = FFTSingular(grid.N, args.pad)
    report = _report("forward", args, grid)
    try:
        res = forward_pipeline(spec, grid, op)
    except ZeroDenominator as exc:
        report["message"] = str(exc)
        return _finish(report, args, EXIT_CONDITIONS, "zero-denominator")
    c7 = check_condition7(res.denominator, args.eps)
    q = grid.half_points
    write_complex_table(args.out / "F.csv", q, res.F.half())
    write_table(args.out / "xi.csv", ["q", "xi"], [q, res.xi.half()])
    write_complex_table(args.out / "D.csv", q, res.denominator.values)
    report["condition7"] = {"min_abs_D": c7.min_abs, "q_at_min": c7.q_at_min,
                            "failing_shells": c7.failing, "eps": c7.eps}
    report["conditions"] = solvability_report(res.F).to_dict()
    if not c7.ok:
        return _finish(report, args, EXIT_CONDITIONS, "condition7-violated")
    return _finish(report, args, EXIT_OK)


def cmd_check(args) -> int:
    F = read_forward_data(args.input)
    rep = solvability_report(F)
    report = _report("check", args, F.grid, conditions=rep.to_dict())
    if not rep.ok:
        return _finish(report, args, EXIT_CONDITIONS, "conditions-violated")
    return _finish(report, args, EXIT_OK)


def _invert_into(report, args, F, op):
    """Shared tail of invert/roundtrip; returns (exit code or None, xi, rec)."""
    rep = solvability_report(F)
    report["conditions"] = rep.to_dict()
    if not rep.ok and not args.force:
        return _finish(report, args, EXIT_CONDITIONS, "conditions-violated"), None, None
    try:
        xi, solver = _solve(args, F, rep, op)
    except NotContractive as exc:
        report["message"] = str(exc)
        return _finish(report, args, EXIT_CONDITIONS, "not-contractive"), None, None
    except ConditionsViolated as exc:
        report["message"] = str(exc)
        return _finish(report, args, EXIT_CONDITIONS, "conditions-violated"), None, None
    except NonConvergence as exc:
        report["message"] = str(exc)
        if exc.result is not None:
            report["solver"] = {"method": args.method,
                                "iterations": int(exc.result.iterations),
                                "residual": exc.result.residual}
        return _finish(report, args, EXIT_SOLVER, "non-convergence"), None, None
    report["solver"] = solver
    if not rep.ok:
        report["status"] = "forced"
        report["message"] = "uniqueness hypotheses fail; solution may not be unique"
    try:
        rec = reconstruct_radial(xi, residual=solver["residual"])
    except (NoPotential, SignInconsistent) as exc:
        report["message"] = str(exc)
        return _finish(report, args, EXIT_CONDITIONS, "no-reconstruction"), None, None
    write_table(args.out / "xi.csv", ["q", "xi"], [F.grid.half_points, xi.half()])
    report["reconstruction"] = _write_profile(args, rec)
    return None, xi, rec


def cmd_invert(args) -> int:
    _check_solver_args(args)
    F = read_forward_data(args.input)
    op = FFTSingular(F.grid.N, args.pad)
    report = _report("invert", args, F.grid)
    code, _, _ = _invert_into(report, args, F, op)
    if code is not None:
        return code
    return _finish(report, args, EXIT_OK)


def cmd_roundtrip(args) -> int:
    _check_solver_args(args)
    if args.profile == "table":
        raise InputError("roundtrip needs an analytic profile (gaussian or yukawa)")
    spec, prof = _spec(args)
    grid = _grid(args.grid_L, args.grid_N)
    op = FFTSingular(grid.N, args.pad)
    # closed-form denominators keep the synthetic data independent of the
    # discrete operator used by the inversion
    fwd = forward_pipeline(spec, grid, route="closed-form")
    report = _report("roundtrip", args, grid)
    code, xi, rec = _invert_into(report, args, fwd.F, op)
    if code is not None:
        return code
    exact = fwd.xi.values
    xi_err = float(np.linalg.norm(xi.values - exact) / np.linalg.norm(exact))
    window = (rec.q >= 0.2) & (rec.q <= 10.0)
    m_exact = math.sqrt(abs(spec.lam)) * np.abs(radial_fourier(prof, rec.q[window]))
    m_err = float(np.max(np.abs(rec.modulus[window] - m_exact)))
    sign_ok = rec.lambda_sign == spec.sign
    report["metrics"] = {"xi_rel_l2": xi_err, "m_sup_err": m_err,
                         "lambda_sign_ok": sign_ok, "tol": args.tol}
    if xi_err <= args.tol and m_err <= args.tol and sign_ok:
        return _finish(report, args, EXIT_OK)
    return _finish(report, args, EXIT_SOLVER, "tolerance-missed")


def cmd_wave(args) -> int:
    if args.q is None:
        raise InputError("wave needs --q")
    if not args.q >= 0:
        raise InputError("--q must be nonnegative")
    if args.points is None:
        raise InputError("wave needs --points PATH (CSV with header x1,x2,x3)")
    pts = read_table(args.points, ["x1", "x2", "x3"])
    try:
        direction = np.array([float(c) for c in args.direction.split(",")])
    except ValueError:
        raise InputError("--direction must be three comma-separated numbers") from None
    if direction.shape != (3,) or not np.linalg.norm(direction) > 0:
        raise InputError("--direction must be a nonzero 3-vector")
    k = args.q * direction / np.linalg.norm(direction)
    spec, _ = _spec(args, allow_zero=True)
    if spec is None:
        psi = np.exp(1j * (pts @ k))
    else:
        psi = wavefunction(spec, k, pts)
    cols = [pts[:, 0], pts[:, 1], pts[:, 2], psi.real, psi.imag]
    header = ["x1", "x2", "x3", "re", "im"]
    if args.check_residual:
        if spec is None:
            res = np.zeros(len(pts))
        else:
            res = np.atleast_1d(lippmann_schwinger_residual(spec, k, pts, psi_x=psi))
        cols.append(res)
        header.append("residual")
    write_table(args.out / "psi.csv", header, cols)
    return EXIT_OK


COMMANDS = {"forward": cmd_forward, "invert": cmd_invert, "check": cmd_check,
            "roundtrip": cmd_roundtrip, "wave": cmd_wave}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.dump_config:
        print(json.dumps(_config(args), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        if args.pad < 1:
            raise InputError("--pad must be >= 1")
        return COMMANDS[args.command](args)
    except (InputError, ValueError, OSError) as exc:
        print(f"sepscatter {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ScatteringError as exc:
        print(f"sepscatter {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONDITIONS


if __name__ == "__main__":
    sys.exit(main())
