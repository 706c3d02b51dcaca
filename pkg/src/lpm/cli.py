"""Command-line driver ``lpm``.

Exit codes: 0 success, 2 mathematical failure (gap condition, splitting,
contraction, failing checks), 1 usage or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, verify
from .errors import LPMError, MathematicalFailure, ProblemFileError, ExprError, ValidationError
from .gap import gap_certificate
from .io import RunReport, load_problem, write_chart_csv, write_matrix_csv
from .linear import certify_splitting, integrate_fundamental
from .problem import GridConfig
from .solver import LPSolver, ManifoldChart

EXIT_OK, EXIT_USAGE, EXIT_MATH = 0, 1, 2
_VALUE_FLAGS = ("--q", "--p", "--eta", "--tau", "--gamma", "--rho")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _join_negative_values(argv):
    """Glue flags to values that start with ``-`` (``--q -2:2:0.5``)."""
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-") and not argv[i + 1].startswith("--"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def parse_range(text):
    """``start:end:step`` (inclusive end) or a single number."""
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise UsageError(f"bad range {text!r}; expected start:end:step") from None
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3 or vals[2] <= 0 or vals[1] < vals[0]:
        raise UsageError(f"bad range {text!r}; need start <= end and step > 0")
    count = int(np.floor((vals[1] - vals[0]) / vals[2] + 1e-9)) + 1
    return vals[0] + vals[2] * np.arange(count)


def parse_vector(text, size=None):
    try:
        v = np.array([float(x) for x in text.split(",")])
    except ValueError:
        raise UsageError(f"bad vector {text!r}; expected comma separated numbers") from None
    if size is not None and v.size != size:
        raise UsageError(f"vector {text!r} must have {size} components")
    return v


def _grid_points(ranges, dim):
    if not ranges:
        raise UsageError("base points required (--q / --p)")
    axes = [parse_range(r) for r in ranges]
    if len(axes) == 1:
        axes = axes * dim
    if len(axes) != dim:
        raise UsageError(f"give one range per coordinate ({dim}) or a single range")
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def build_parser():
    p = _Parser(prog="lpm", description="Invariant manifolds of non-autonomous semilinear systems.")
    p.add_argument("--version", action="version", version=f"lpm {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, help_, problem=True):
        sp = sub.add_parser(name, help=help_)
        if problem:
            sp.add_argument("problem", help="problem file")
        sp.add_argument("--out", default="lpm_out", help="output directory (default: lpm_out)")
        sp.add_argument("--tol", type=float, help="fixed-point tolerance (overrides the problem file)")
        sp.add_argument("--tau", type=float, default=0.0, help="base time (grid node)")
        return sp

    add("check-gap", "gap condition constants")
    sp = add("certify-splitting", "estimate the splitting bound M")
    sp.add_argument("--gamma", type=float, help="override the S exponent")
    sp.add_argument("--rho", type=float, help="override the N exponent")
    sp = add("compute-manifold", "sample Sigma(tau, q) on a grid of base points")
    sp.add_argument("--q", action="append", help="start:end:step (repeat per coordinate)")
    sp = add("compute-stable", "sample Theta(tau, p) on a grid of base points")
    sp.add_argument("--p", action="append", help="start:end:step (repeat per coordinate)")
    sp = add("compute-derivative", "derivative of Sigma at eta")
    sp.add_argument("--eta", required=True, help="v1,...,vn")
    sp = add("verify", "run the theorem checks on a problem")
    sp.add_argument("--q", action="append", help="base points for graph checks (default -1:1:1)")
    sp.add_argument("--eta", help="off-graph point for attraction/stable checks (default e_n)")
    sp.add_argument("--horizon", type=float, default=5.0, help="forward horizon (default 5)")
    sp = add("bench", "reference battery", problem=False)
    sp.add_argument("--quick", action="store_true", help="graph oracles and derivative checks only")
    return p


def _load(args):
    spec, grid = load_problem(args.problem)
    if args.tol is not None:
        grid = dataclasses.replace(grid, tol_fixed_point=args.tol)
    return spec, grid


def _solver(spec, grid, tau, report):
    t0 = time.perf_counter()
    s = LPSolver(spec, grid, tau0=tau)
    report.timings["setup"] = time.perf_counter() - t0
    report["splitting"] = s.cert.as_dict()
    report["gap"] = s.gap.as_dict()
    return s


def _chart_result(chart: ManifoldChart, value_key):
    return {
        "tau": chart.tau,
        "points": [
            {"base": q.tolist(), value_key: img.tolist(), "diagnostics": d.as_dict() if d else None}
            for q, img, d in zip(chart.base_points, chart.images, chart.diagnostics)
        ],
        "errors": {str(i): m for i, m in chart.errors.items()},
        "invariant_violations": list(chart.invariant_violations),
    }


def cmd_check_gap(args, report):
    spec, grid = _load(args)
    report.canonical.update(RunReport(args.command, spec, grid).canonical)
    gamma, rho = spec.rates(args.tau)
    report["rates"] = {"gamma": gamma, "rho": rho}
    report["gap"] = gap_certificate(gamma, rho, spec.L1, spec.L2, spec.gamma_norm).as_dict()
    return EXIT_OK


def cmd_certify_splitting(args, report):
    spec, grid = _load(args)
    report.canonical.update(RunReport(args.command, spec, grid).canonical)
    gamma, rho = spec.rates(args.tau)
    gamma = args.gamma if args.gamma is not None else gamma
    rho = args.rho if args.rho is not None else rho
    report["rates"] = {"gamma": gamma, "rho": rho}
    fb = integrate_fundamental(spec, args.tau, grid)
    report["splitting"] = certify_splitting(fb, gamma, rho).as_dict()
    return EXIT_OK


def cmd_compute_manifold(args, report):
    spec, grid = _load(args)
    report.canonical.update(RunReport(args.command, spec, grid).canonical)
    s = _solver(spec, grid, args.tau, report)
    pts = _grid_points(args.q, spec.k)
    t0 = time.perf_counter()
    chart = s.sample_chart(args.tau, pts)
    report.timings["solve"] = time.perf_counter() - t0
    report["chart"] = _chart_result(chart, "sigma")
    write_chart_csv(chart, Path(args.out) / "manifold.csv")
    return EXIT_MATH if chart.errors else EXIT_OK


def cmd_compute_stable(args, report):
    spec, grid = _load(args)
    report.canonical.update(RunReport(args.command, spec, grid).canonical)
    s = _solver(spec, grid, args.tau, report)
    pts = _grid_points(args.p, spec.m)
    t0 = time.perf_counter()
    images, diags, errors = [], [], {}
    for i, p in enumerate(pts):
        try:
            seg, th = s.solve_stable(args.tau, p)
            images.append(th)
            diags.append(seg.diagnostics)
        except LPMError as e:
            images.append(np.full(spec.k, np.nan))
            diags.append(None)
            errors[i] = f"{type(e).__name__}: {e}"
    report.timings["solve"] = time.perf_counter() - t0
    chart = ManifoldChart(float(args.tau), pts, np.array(images).reshape(-1, spec.k), tuple(diags), errors)
    report["chart"] = _chart_result(chart, "theta")
    write_chart_csv(chart, Path(args.out) / "stable.csv", prefix=("p", "theta"))
    return EXIT_MATH if errors else EXIT_OK


def cmd_compute_derivative(args, report):
    spec, grid = _load(args)
    report.canonical.update(RunReport(args.command, spec, grid).canonical)
    s = _solver(spec, grid, args.tau, report)
    eta = parse_vector(args.eta, spec.n)
    t0 = time.perf_counter()
    base, sig = s.solve_unstable(args.tau, eta)
    seg, D = s.solve_derivative(args.tau, eta, base_segment=base)
    report.timings["solve"] = time.perf_counter() - t0
    report["derivative"] = {
        "eta": eta.tolist(), "sigma": sig.tolist(), "dsigma": D.tolist(),
        "diagnostics": seg.diagnostics.as_dict(),
    }
    write_matrix_csv(D, Path(args.out) / "derivative.csv")
    return EXIT_OK


def cmd_verify(args, report):
    spec, grid = _load(args)
    report.canonical.update(RunReport(args.command, spec, grid).canonical)
    s = _solver(spec, grid, args.tau, report)
    tau = args.tau
    pts = _grid_points(args.q or ["-1:1:1"], spec.k)
    eta = parse_vector(args.eta, spec.n) if args.eta else np.eye(spec.n)[-1]
    q0 = pts[np.argmax(np.abs(pts).sum(axis=1))]
    checks = [
        verify.check_invariance(spec, tau, args.horizon, pts, solver=s),
        verify.check_attraction(spec, tau, eta, args.horizon, solver=s),
        verify.check_lipschitz_and_cone(spec, tau, pts, solver=s),
        verify.check_backward_growth(spec, tau, pts, solver=s),
        verify.check_stable_decay(spec, tau, eta, args.horizon, solver=s),
        verify.check_derivative_fd(spec, tau, q0, solver=s),
        verify.check_c1(spec, tau, q0, verify.C1_STEPS, solver=s),
    ]
    return _record_checks(report, checks)


def _record_checks(report, checks):
    report["checks"] = [c.as_dict(include_runtime=False) for c in checks]
    report.timings["checks"] = {f"{c.name}[{c.system}]#{i}": c.runtime for i, c in enumerate(checks)}
    failed = [c for c in checks if not c.passed]
    report["summary"] = {"total": len(checks), "failed": len(failed)}
    for c in checks:
        print(c.line())
    return EXIT_MATH if failed else EXIT_OK


def cmd_bench(args, report):
    grid = GridConfig() if args.tol is None else GridConfig(tol_fixed_point=args.tol)
    report["grid"] = dataclasses.asdict(grid)
    checks = verify.run_benchmarks(grid, full=not args.quick)
    return _record_checks(report, checks)


COMMANDS = {
    "check-gap": cmd_check_gap,
    "certify-splitting": cmd_certify_splitting,
    "compute-manifold": cmd_compute_manifold,
    "compute-stable": cmd_compute_stable,
    "compute-derivative": cmd_compute_derivative,
    "verify": cmd_verify,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(_join_negative_values(argv))
    except UsageError as e:
        print(f"lpm: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if not args.command:
        parser.print_help(sys.stderr)
        return EXIT_USAGE
    report = RunReport(args.command)
    t0 = time.perf_counter()
    try:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        code = COMMANDS[args.command](args, report)
    except UsageError as e:
        print(f"lpm: error: {e}", file=sys.stderr)
        report.fail(e)
        code = EXIT_USAGE
    except (ProblemFileError, ExprError, ValidationError, OSError) as e:
        print(f"lpm: error: {type(e).__name__}: {e}", file=sys.stderr)
        report.fail(e)
        code = EXIT_USAGE
    except (MathematicalFailure, LPMError) as e:
        print(f"lpm: {type(e).__name__}: {e}", file=sys.stderr)
        report.fail(e)
        code = EXIT_MATH
    report.timings["total"] = time.perf_counter() - t0
    try:
        report.write(args.out)
    except OSError as e:
        print(f"lpm: cannot write report: {e}", file=sys.stderr)
        return EXIT_USAGE
    return code


if __name__ == "__main__":
    raise SystemExit(main())
