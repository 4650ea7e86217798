"""Command line interface: ``rrex solve``, ``rrex verify`` and ``rrex error-check``.

Exit codes
----------
0  converged / all checks passed
1  usage error, unreadable or missing input file
2  the iteration did not converge (the partial trace is still written)
3  a verification property or an error bound failed, or the oracle failed
"""

import argparse
import logging
import os
import sys

import numpy as np

from .errors import NotConverged, OracleFailed, ParseError, RRexError, UnstableProblem
from .extrapolation import (METHODS, MODES, RESTART_POLICIES, STOP_RULES, DriverConfig,
                            run_driver)
from .trace import write_csv

EXIT_OK, EXIT_USAGE, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

PROBLEMS = ("toeplitz", "triple_chain", "sor", "mm_files")
ERROR_BOUNDS = {"toeplitz": 1e-10, "triple_chain": 1e-6}
ERROR_CHECK_MAX_D = 600
ERROR_CHECK_TOL = 1e-12
DEFAULT_D = {"toeplitz": 500, "triple_chain": 302, "sor": 20}

logger = logging.getLogger("rrex")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (v > 0 and np.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _shift_list(text):
    try:
        vals = [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shift list {text!r}") from None
    if not vals or any(not v < 0 for v in vals):
        raise argparse.ArgumentTypeError("shifts must be a comma separated list of negative numbers")
    return vals


def _add_problem_args(p, problems):
    g = p.add_argument_group("problem")
    g.add_argument("--problem", required=True, choices=problems)
    g.add_argument("--d", type=_positive_int, help="dimension (default depends on the problem)")
    g.add_argument("--p", type=_positive_int, default=5, help="inputs of the Toeplitz problem")
    g.add_argument("--q", type=_positive_int, default=5, help="outputs of the Toeplitz problem")
    g.add_argument("--lam", type=_positive_float, default=None,
                   help="H = lam I (default 1e-4 for Toeplitz, 1 otherwise)")
    g.add_argument("--variant", default=None,
                   help="are|lyapunov (Riccati problems) or stationary|nonstationary (sor)")
    g.add_argument("--gramian", choices=("controllability", "observability"),
                   help="solve the Gramian Lyapunov equation instead")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--no-auto-negate", action="store_true",
                   help="fail instead of negating an unstable Toeplitz matrix")
    for key in ("A", "E", "B", "C"):
        g.add_argument(f"--{key}", dest=f"file_{key}", metavar="FILE",
                       help=f"Matrix Market file for {key} (mm_files)")


def _add_shift_args(p):
    g = p.add_argument_group("shifts")
    g.add_argument("--shifts", choices=("projection", "fixed_list", "single_heuristic"),
                   default="projection")
    g.add_argument("--shift-list", type=_shift_list, default=None,
                   help="comma separated negative shifts for fixed_list")
    g.add_argument("--shift-lo", type=float, default=-1e10)
    g.add_argument("--shift-hi", type=float, default=-1e-10)
    g.add_argument("--ritz-width", type=_positive_int, default=1,
                   help="number of recent increment blocks spanning the Ritz subspace")
    g.add_argument("--open-loop-ritz", action="store_true",
                   help="project A instead of the closed-loop matrix A - B K^T")
    g.add_argument("--ritz-complex", choices=("modulus", "real_part"), default="modulus",
                   help="map complex Ritz values to -|lam| or Re(lam)")


def build_parser():
    parser = _Parser(prog="rrex", description="Reduced rank extrapolation for fixed-point "
                     "iterations and low-rank Riccati/Lyapunov solvers.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("solve", help="run a solver and write its residual trace as CSV")
    _add_problem_args(s, PROBLEMS)
    g = s.add_argument_group("iteration")
    g.add_argument("--mode", choices=MODES, default="plain")
    g.add_argument("--n", type=_positive_int, default=3, help="extrapolation window")
    g.add_argument("--tol", type=_positive_float, default=1e-10)
    g.add_argument("--max-iters", type=_positive_int, default=1000)
    g.add_argument("--method", choices=METHODS, default="residual",
                   help="vector RRE flavour for sor: differences or equation residuals")
    g.add_argument("--restart-policy", choices=RESTART_POLICIES, default="threshold")
    g.add_argument("--theta", type=_positive_float, default=0.1)
    g.add_argument("--stop-on", choices=STOP_RULES, default="base",
                   help="stop on a base iterate only, or on any iterate or extrapolant")
    g.add_argument("--rre-enable-threshold", type=_positive_float, default=None,
                   help="only extrapolate once the base residual is below this value")
    g.add_argument("--clip-bounds", action="store_true",
                   help="clip weights to the [0, 1] tail-sum bounds")
    _add_shift_args(s)
    s.add_argument("--output", "-o", default="trace.csv", help="CSV trace path")

    v = sub.add_parser("verify", help="run a desk-scale property suite")
    from .verify import SUITES
    v.add_argument("suite", choices=sorted(SUITES) + ["all"])
    v.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("error-check", help="compare against the dense oracle")
    _add_problem_args(e, ("toeplitz", "triple_chain", "mm_files"))
    e.add_argument("--n", type=_positive_int, default=3)
    e.add_argument("--tol", type=_positive_float, default=ERROR_CHECK_TOL,
                   help="residual tolerance; the error is roughly this size, so it "
                        "defaults to two orders below the bounds")
    e.add_argument("--max-iters", type=_positive_int, default=1000)
    e.add_argument("--bound", type=_positive_float, default=None,
                   help="relative error bound (default per problem)")
    _add_shift_args(e)
    return parser


def _variant(args, allowed, default):
    v = args.variant or default
    if v not in allowed:
        raise UsageError(f"--variant for {args.problem} must be one of {allowed}, got {v!r}")
    return v


def _validate(args):
    """Check the problem arguments before any computation."""
    prob = args.problem
    d = args.d if args.d is not None else DEFAULT_D.get(prob)
    files = {k: getattr(args, f"file_{k}") for k in ("A", "E", "B", "C")}
    if prob == "mm_files":
        if files["A"] is None:
            raise UsageError("mm_files needs --A")
        for key, path in files.items():
            if path is not None and not os.path.isfile(path):
                raise FileNotFoundError(f"{key} matrix file not found: {path}")
        _variant(args, ("are", "lyapunov"), "are")
    elif any(files.values()):
        raise UsageError("--A/--E/--B/--C are only valid with --problem mm_files")
    if prob == "toeplitz":
        _variant(args, ("are", "lyapunov"), "are")
        if d < 10:
            raise UsageError("toeplitz needs --d >= 10")
    elif prob == "triple_chain":
        _variant(args, ("are", "lyapunov"), "are")
        if d % 2 or (d // 2 - 1) % 3 or d < 8:
            m = max(1, round((d / 2 - 1) / 3))
            raise UsageError(f"triple_chain needs d = 2 (3 m + 1); nearest is {2 * (3 * m + 1)}")
    elif prob == "sor":
        _variant(args, ("stationary", "nonstationary"), "stationary")
        if d < 2:
            raise UsageError("sor needs --d >= 2")
        if args.gramian:
            raise UsageError("--gramian does not apply to sor")
    if getattr(args, "shifts", None) == "fixed_list" and not args.shift_list:
        raise UsageError("--shifts fixed_list needs --shift-list")
    if not args.shift_lo <= args.shift_hi < 0:
        raise UsageError("need --shift-lo <= --shift-hi < 0")
    return d


def _build_are(args, d):
    from .problems import gramian_problem, make_toeplitz, make_triple_chain
    from .mmio import load_problem
    variant = args.variant or "are"
    if args.problem == "toeplitz":
        prob = make_toeplitz(d, args.q, variant, args.seed, args.p,
                             1e-4 if args.lam is None else args.lam,
                             auto_negate=not args.no_auto_negate)
    elif args.problem == "triple_chain":
        prob = make_triple_chain((d // 2 - 1) // 3, 1.0 if args.lam is None else args.lam)
        if variant == "lyapunov":
            prob = type(prob)(prob.A, np.zeros_like(prob.B), prob.C, prob.E, prob.H,
                              name=prob.name + "-lyapunov")
    else:
        paths = {k: getattr(args, f"file_{k}") for k in ("A", "E", "B", "C")}
        return load_problem(paths, 1.0 if args.lam is None else args.lam, args.gramian,
                            variant == "lyapunov")
    if args.gramian:
        prob = gramian_problem(prob.E, prob.A, prob.B, prob.C, args.gramian)
    return prob


def _strategy(args):
    from .radi import ShiftStrategy
    return ShiftStrategy(args.shifts, args.shift_list or (), args.shift_lo, args.shift_hi,
                         args.ritz_width, not args.open_loop_ritz, args.ritz_complex)


def _fmt(x):
    return "-" if x is None else f"{x:.3e}"


def _status(converged, iterations, trace, extra=""):
    last = trace[-1]
    rre = next((r.res_rre for r in reversed(trace) if r.res_rre is not None), None)
    word = "converged" if converged else "not converged"
    print(f"{word}: iterations={iterations} res_base={_fmt(last.res_base)} "
          f"res_rre={_fmt(rre)}{extra}")


def cmd_solve(args):
    d = _validate(args)
    cfg = DriverConfig(n=args.n, mode=args.mode, tol=args.tol, max_iters=args.max_iters,
                       method=args.method, restart_policy=args.restart_policy,
                       theta=args.theta, enable_threshold=args.rre_enable_threshold,
                       stop_on=args.stop_on)
    if args.problem == "sor":
        from .problems import make_sor_study
        fmap, _ = make_sor_study(args.variant or "stationary", d)
        run = lambda: run_driver(fmap, np.zeros(d), cfg)  # noqa: E731
    else:
        from .radi import radi_solve
        strat = _strategy(args)
        prob = _build_are(args, d)
        run = lambda: radi_solve(prob, cfg, strat, clip_bounds=args.clip_bounds)  # noqa: E731
    try:
        result = run()
    except NotConverged as exc:
        write_csv(args.output, exc.trace)
        _status(False, exc.result.iterations, exc.trace)
        print(f"rrex: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    write_csv(args.output, result.trace)
    hit = result.first_extrapolant_hit
    _status(True, result.iterations, result.trace,
            "" if hit is None else f" first_extrapolant_hit={hit}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import SUITES, run_suite
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    failed = False
    for name in names:
        for check in run_suite(name, seed=args.seed):
            print(f"[{name}] {check.line()}")
            failed |= not check.passed
    if failed:
        print(f"rrex: property failure; reproduce with: rrex verify {args.suite} "
              f"--seed {args.seed}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def cmd_error_check(args):
    from .oracle import dense_are_solve, relative_error
    from .radi import radi_solve
    d = _validate(args)
    prob = _build_are(args, d)
    if prob.d > ERROR_CHECK_MAX_D:
        raise UsageError(f"error-check is limited to d <= {ERROR_CHECK_MAX_D}, got {prob.d}")
    bound = args.bound if args.bound is not None else ERROR_BOUNDS.get(args.problem)
    if bound is None:
        raise UsageError(f"no default error bound for {args.problem}; pass --bound")
    cfg = DriverConfig(n=args.n, mode="noncycling", tol=args.tol, max_iters=args.max_iters)
    ref = dense_are_solve(prob)
    try:
        result = radi_solve(prob, cfg, _strategy(args))
    except NotConverged as exc:
        _status(False, exc.result.iterations, exc.trace)
        print(f"rrex: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    Xhat = result.extrapolant if result.extrapolant is not None else result.solution
    err_base = relative_error(ref.X, result.solution)
    err = relative_error(ref.X, Xhat)
    ok = err <= bound
    _status(True, result.iterations, result.trace)
    print(f"relative error: base={err_base:.3e} extrapolant={err:.3e} "
          f"bound={bound:.0e} oracle_residual={ref.residual:.1e} {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "error-check": cmd_error_check}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)],
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ValueError, FileNotFoundError, ParseError, UnstableProblem) as exc:
        print(f"rrex {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OracleFailed as exc:
        print(f"rrex {args.command}: oracle failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except RRexError as exc:
        print(f"rrex {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except OSError as exc:
        print(f"rrex {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
