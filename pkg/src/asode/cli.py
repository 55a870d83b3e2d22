"""Command line front end: ``verify``, ``solve``, ``bench`` and ``convergence``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import math
import sys

import numpy as np

from .bench import (
    METHODS,
    make_problem,
    reference_solution,
    run_benchmark,
    smooth_exact,
    smooth_problem,
)
from .coeffs import (
    A_ROOTS,
    EMBEDDED_COEFFICIENTS,
    GAMMA_ROOTS,
    METHOD_COEFFICIENTS,
    derive_coefficients,
    embedded_residuals,
    order3_residuals,
    structural_residuals,
)
from .controller import ControllerConfig, integrate, integrate_fixed
from .exceptions import AsodeError
from .problem import JacobianStrategy, ToleranceSpec
from .rk_explicit import TABLEAUX, erk_fixed, erk_integrate
from .stepper import stability_function

CHECK_TOL = 1e-11
STIFF_LIMIT = 1e-5
DECAY_POINTS = (-1e2, -1e4, -1e6, -1e8)
# allowed deviation of the fitted convergence slope from the nominal order
SLOPE_BAND = {"asode3": 0.1, "rkm4": 0.2, "rkf5": 0.2}
NOMINAL_ORDER = {"asode3": 3, "rkm4": 4, "rkf5": 5}


def fmt(x) -> str:
    return f"{x:.14e}"


def _emit(rows, fmt_name, out, header=None):
    """Write rows (lists of strings) as csv or a markdown table."""
    if fmt_name == "csv":
        writer = csv.writer(out, lineterminator="\n")
        if header:
            writer.writerow(header)
        writer.writerows(rows)
        return
    if header:
        out.write("| " + " | ".join(header) + " |\n")
        out.write("|" + "---|" * len(header) + "\n")
    for row in rows:
        out.write("| " + " | ".join(row) + " |\n")


# --- verify ---------------------------------------------------------------------


def run_verify(out=sys.stdout, fmt_name="md", coeffs=METHOD_COEFFICIENTS, embedded=EMBEDDED_COEFFICIENTS) -> int:
    """Check the given coefficient set; returns 0 iff every check passes.

    The stored set is compared with a fresh derivation and published roots,
    the order and embedded conditions are evaluated, and the stiff decay of
    the stability function is tabulated.
    """
    derived, derived_emb, trace = derive_coefficients()
    checks = []

    root_rows = [["a", str(i + 1), fmt(x)] for i, x in enumerate(trace.cubic_a_roots)]
    root_rows += [["gamma", str(i + 1), fmt(x)] for i, x in enumerate(trace.cubic_gamma_roots)]
    root_dev = max(max(abs(x - y) for x, y in zip(trace.cubic_a_roots, A_ROOTS)),
                   max(abs(x - y) for x, y in zip(trace.cubic_gamma_roots, GAMMA_ROOTS)))
    checks.append(("published roots", root_dev, CHECK_TOL))

    stored = {**coeffs.as_dict(), **{f"r{i + 1}": v for i, v in enumerate(embedded.r)}}
    fresh = {**derived.as_dict(), **{f"r{i + 1}": v for i, v in enumerate(derived_emb.r)}}
    coef_rows = [[k, fmt(v), fmt(fresh[k]), fmt(abs(v - fresh[k]))] for k, v in stored.items()]
    checks.append(("stored vs derived", max(abs(v - fresh[k]) for k, v in stored.items()), CHECK_TOL))

    checks.append(("order conditions", float(np.max(np.abs(order3_residuals(coeffs)))), CHECK_TOL))
    checks.append(("fixed entries", float(np.max(np.abs(structural_residuals(coeffs)))), CHECK_TOL))
    checks.append(("embedded conditions", float(np.max(np.abs(embedded_residuals(coeffs, embedded)))), CHECK_TOL))

    decay = [abs(stability_function(0.0, z, coeffs, embedded)) for z in DECAY_POINTS]
    decay_rows = [[fmt(z), fmt(r)] for z, r in zip(DECAY_POINTS, decay)]
    monotone = all(b < a for a, b in zip(decay, decay[1:]))

    _emit(root_rows, fmt_name, out, ["cubic", "root", "value"])
    out.write("\n")
    _emit(coef_rows, fmt_name, out, ["coefficient", "stored", "derived", "abs_diff"])
    out.write("\n")
    _emit(decay_rows, fmt_name, out, ["z", "abs_R(0,z)"])
    out.write("\n")
    status_rows = []
    ok = True
    for name, value, limit in checks:
        passed = value < limit
        ok &= passed
        status_rows.append([name, fmt(value), fmt(limit), "pass" if passed else "FAIL"])
    stiff_ok = decay[-1] < STIFF_LIMIT and monotone
    ok &= stiff_ok
    status_rows.append(["stiff decay", fmt(decay[-1]), fmt(STIFF_LIMIT), "pass" if stiff_ok else "FAIL"])
    _emit(status_rows, fmt_name, out, ["check", "max_residual", "limit", "status"])
    return 0 if ok else 1


# --- solve ------------------------------------------------------------------------


def run_solve(args, out) -> int:
    problem = make_problem(args.problem)
    config = ControllerConfig(stability_control=args.stability_control == "on")
    if args.method == "asode3":
        split = problem.split_problem(JacobianStrategy.from_cli(args.jacobian, args.freeze_age))
        if args.h0 is not None:
            split = split.with_options(h0=args.h0)
        rep = integrate(split, ToleranceSpec.scalar(args.tol, problem.N), config=config)
    else:
        split = problem.split_problem()
        if args.h0 is not None:
            split = split.with_options(h0=args.h0)
        rep = erk_integrate(split, args.tol, TABLEAUX[args.method], config)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t"] + [f"y{i + 1}" for i in range(problem.N)])
    for t, y in zip(rep.ts, rep.ys):
        writer.writerow([fmt(t)] + [fmt(v) for v in y])
    for key, value in rep.stats().items():
        out.write(f"# {key},{value}\n")
    return 0


# --- bench -----------------------------------------------------------------------


def _cell(row):
    return str(row.evals) if row.ok else f"failed ({row.failure.split(':')[0]})"


def run_bench(args, out) -> int:
    rows = run_benchmark(args.methods, args.tols, args.problems)
    extra = []
    if args.freeze_age:
        extra = run_benchmark(["asode3"], args.tols, args.problems, freeze_age=args.freeze_age)
    by_key = {(r.problem, r.tol, r.method): r for r in rows}
    by_key.update({(r.problem, r.tol, f"asode3_age{args.freeze_age}"): r for r in extra})
    columns = list(args.methods) + ([f"asode3_age{args.freeze_age}"] if extra else [])

    header = ["problem", "tol"]
    for m in columns:
        header.append(m)
        if args.against_paper:
            header += [f"{m}_published", f"{m}_ratio"]
        header.append(f"{m}_scaled_err")
    table = []
    for pid in args.problems:
        for tol in args.tols:
            line = [str(pid), f"{tol:.0e}"]
            for m in columns:
                r = by_key[(pid, tol, m)]
                line.append(_cell(r))
                if args.against_paper:
                    pub = r.published
                    line.append(str(pub) if pub else "")
                    line.append("" if math.isnan(r.ratio) else f"{r.ratio:.3f}")
                line.append("" if math.isnan(r.scaled_error) else f"{r.scaled_error:.3e}")
            table.append(line)
    _emit(table, args.format, out, header)
    return 0 if all(r.ok for r in rows + extra) else 1


# --- convergence ----------------------------------------------------------------------


def convergence_errors(problem_name, method, grid):
    """Endpoint max-norm errors of fixed-step runs with the step sizes in ``grid``."""
    if problem_name == "smooth":
        problem = smooth_problem()
        exact = smooth_exact(problem.tk)
    else:
        problem = make_problem(problem_name).split_problem(JacobianStrategy("analytic_dense"))
        exact = reference_solution(problem_name)
    span = problem.tk - problem.t0
    errors = []
    for h in grid:
        n = max(1, round(span / h))
        if method == "asode3":
            y, _ = integrate_fixed(problem, n)
        else:
            y = erk_fixed(problem.combined(), problem.y0, problem.t0, problem.tk, n, TABLEAUX[method])
        errors.append(float(np.max(np.abs(y - exact))))
    return errors


def fitted_slope(grid, errors) -> float:
    return float(np.polyfit(np.log(grid), np.log(errors), 1)[0])


def run_convergence(args, out) -> int:
    grid = sorted(args.grid, reverse=True)
    errors = convergence_errors(args.problem, args.method, grid)
    _emit([[fmt(h), fmt(e)] for h, e in zip(grid, errors)], "csv", out, ["h", "error"])
    slope = fitted_slope(grid, errors)
    nominal = NOMINAL_ORDER[args.method]
    band = SLOPE_BAND[args.method]
    passed = abs(slope - nominal) <= band
    out.write(f"# slope,{slope:.4f}\n# expected,{nominal}+-{band}\n# status,{'pass' if passed else 'FAIL'}\n")
    return 0 if passed else 1


# --- argument parsing ------------------------------------------------------------------


def _positive(text):
    value = float(text)
    if not value > 0 or not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return value


def _float_list(text):
    return [_positive(x) for x in text.split(",") if x]


def _int_list(text):
    return [int(x) for x in text.split(",") if x]


def _method_list(text):
    methods = [x for x in text.split(",") if x]
    for m in methods:
        if m not in METHODS:
            raise argparse.ArgumentTypeError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    return methods


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asode", description="Additive third-order stiff ODE integrator.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check coefficients, order conditions and stiff decay")
    p.add_argument("--format", choices=("csv", "md"), default="md")

    p = sub.add_parser("solve", help="integrate one benchmark problem and print the trajectory as csv")
    p.add_argument("--problem", required=True)
    p.add_argument("--method", choices=METHODS, default="asode3")
    p.add_argument("--tol", type=_positive, required=True)
    p.add_argument("--stability-control", choices=("on", "off"), default="on")
    p.add_argument("--jacobian", choices=("analytic-diag", "analytic-dense", "fd-diag", "fd-dense"),
                   default="analytic-diag")
    p.add_argument("--freeze-age", type=int, default=None)
    p.add_argument("--h0", type=_positive, default=None)
    p.add_argument("--output", default="-", help="file path, or - for standard output")

    p = sub.add_parser("bench", help="evaluation counts for problems x tolerances x methods")
    p.add_argument("--problems", type=_int_list, default=[1, 2, 3, 4])
    p.add_argument("--tols", type=_float_list, default=[1e-2, 1e-4])
    p.add_argument("--methods", type=_method_list, default=list(METHODS))
    p.add_argument("--against-paper", action="store_true", help="add published counts and achieved ratios")
    p.add_argument("--freeze-age", type=int, default=None, help="add an asode3 column reusing B for K steps")
    p.add_argument("--format", choices=("csv", "md"), default="md")
    p.add_argument("--output", default="-")

    p = sub.add_parser("convergence", help="fixed-step error slope over a step size grid")
    p.add_argument("--problem", default="smooth")
    p.add_argument("--method", choices=METHODS, default="asode3")
    p.add_argument("--grid", type=_float_list, required=True)
    return parser


@contextlib.contextmanager
def _open_output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "convergence" and len(args.grid) < 3:
        parser.error("convergence needs at least 3 grid points")
    if getattr(args, "freeze_age", None) is not None and args.freeze_age < 1:
        parser.error("--freeze-age must be at least 1")
    try:
        if args.command == "verify":
            return run_verify(sys.stdout, args.format)
        if args.command == "solve":
            with _open_output(args.output) as out:
                return run_solve(args, out)
        if args.command == "bench":
            with _open_output(args.output) as out:
                return run_bench(args, out)
        return run_convergence(args, sys.stdout)
    except AsodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
