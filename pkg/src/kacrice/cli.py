"""Command line interface.

Subcommands print ``key=value`` lines on stdout.  Exit status is 0 on
success, 2 for invalid input and 3 for a numerical failure.

Examples
--------
::

    kacrice pivot --penalty lasso --design X.csv --response y.csv --sigma I
    kacrice interval --alpha 0.1 --penalty group --design X.csv \\
        --response y.csv --groups labels.txt
    kacrice vbounds --penalty nuclear --op mask --mask-file M.csv --response Y.csv
    kacrice simulate --scenario lasso-small --reps 100 --seed 7 --out p.csv
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

import numpy as np

from . import io
from .errors import InputError, KacRiceError, NumericalError
from .fractional import FractionalProgram, solve_v
from .group import GroupState, group_fit
from .lasso import LassoState, lasso_fit
from .model import GroupLasso, IdentityOp, Lasso, MaskOp, MatMulOp, Nuclear, Problem
from .nuclear import NuclearState, nuclear_fit

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 2, 3

CSV_COLUMNS = ("replicate", "p_value", "lambda1", "v_minus", "v_plus", "sigma2")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    return str(v)


def emit(out, **kv):
    for k, v in kv.items():
        print(f"{k}={_fmt(v)}", file=out)


# ---------------------------------------------------------------------------
# problem assembly


def _sigma(arg, n):
    """``I``, a positive scalar, or a path to an ``n x n`` matrix."""
    if arg is None or arg.upper() == "I":
        return 1.0
    try:
        return float(arg)
    except ValueError:
        return io.read_matrix(arg)


def build_problem(args) -> Problem:
    if args.config:
        pen, op = io.read_penalty_config(args.config)
    else:
        pen, op = None, None
    kind = args.penalty or (pen.kind if pen is not None else None)
    if kind is None:
        raise InputError("penalty: give --penalty or --config")
    if args.response is None:
        raise InputError("response: --response is required")

    if kind == "nuclear":
        y = io.read_matrix(args.response)
        if op is None:
            op_kind = args.op or "identity"
            if op_kind == "identity":
                op, shape = IdentityOp(), y.shape
            elif op_kind == "mask":
                if not args.mask_file:
                    raise InputError("mask-file: required for --op mask")
                op = MaskOp(io.read_matrix(args.mask_file) != 0)
                shape = op.mask.shape
            elif op_kind == "matmul":
                path = args.design_file or args.design
                if not path:
                    raise InputError("design-file: required for --op matmul")
                op = MatMulOp(io.read_matrix(path))
                shape = (op.X.shape[1], y.shape[1])
            else:
                raise InputError(f"op: unknown operator {op_kind!r}")
            pen = Nuclear(shape)
        sigma = _sigma(args.sigma, None)
        if np.ndim(sigma) != 0:
            raise InputError("sigma: nuclear-norm problems take I or a scalar")
        return Problem(op, y, sigma, pen)

    if args.design is None:
        raise InputError("design: --design is required")
    X = io.read_matrix(args.design)
    y = io.read_vector(args.response)
    if pen is None or pen.kind != kind:
        if kind == "lasso":
            pen = Lasso()
        elif kind == "group":
            if not args.groups:
                raise InputError("groups: --groups is required for the group penalty")
            labels = io.read_vector(args.groups).astype(int)
            w = io.read_vector(args.weights) if args.weights else None
            pen = GroupLasso.from_labels(labels, w)
        else:
            raise InputError(f"penalty: unknown penalty {kind!r}")
    cperp = io.read_matrix(args.cperp) if args.cperp else None
    return Problem(X, y, _sigma(args.sigma, len(y)), pen, cperp)


def fit(problem: Problem, method="dual"):
    if isinstance(problem.penalty, Lasso):
        return lasso_fit(problem)
    if isinstance(problem.penalty, GroupLasso):
        return group_fit(problem)
    return nuclear_fit(problem, method=method)


def fractional_data(state):
    """``(a, c)`` of the truncation programs for a frontend state."""
    if isinstance(state, LassoState):
        c = state.s_star * state.theta_col / state.theta_jj
        return state.score - state.lambda1 * c, c
    if isinstance(state, GroupState):
        return state.score - state.lambda1 * state.c_vec, state.c_vec
    if isinstance(state, NuclearState):
        return state.M - state.lambda1 * state.C_mat, state.C_mat
    raise InputError(f"state: unsupported type {type(state).__name__}")


# ---------------------------------------------------------------------------
# subcommands


def cmd_pivot(args, out):
    f = fit(build_problem(args))
    res = f.pvalue()
    emit(out, lambda1=f.lambda1, v_minus=f.v_minus, v_plus=f.v_plus, sigma2=f.sigma2, p_value=res.p_value)


def cmd_interval(args, out):
    f = fit(build_problem(args))
    lo, hi = f.interval(args.alpha)
    emit(out, lambda1=f.lambda1, alpha=args.alpha, lo=lo, hi=hi)


def cmd_vbounds(args, out):
    p = build_problem(args)
    f = fit(p)
    a, c = fractional_data(f.state)
    lo_p, hi_p = FractionalProgram.pair(a, c, p.penalty)
    lo = solve_v(lo_p, tol=args.tol, method=args.method, full_output=True)
    hi = solve_v(hi_p, tol=args.tol, method=args.method, full_output=True)
    emit(out, v_minus=lo.value, v_plus=hi.value, iterations=lo.iterations + hi.iterations,
         residual=max(lo.residual, hi.residual))


def _scenario(args):
    from .harness import get_scenario

    kw = {}
    if args.noise:
        kw["noise"] = args.noise
    return get_scenario(args.scenario, **kw)


def cmd_simulate(args, out):
    from .harness import sample_pvalues

    s = _scenario(args)
    res = sample_pvalues(s, reps=args.reps, seed=args.seed, threads=args.threads)
    stat, pks = res.ks
    emit(out, scenario=s.id, reps=len(res.p_values), ties=res.ties, ks_statistic=stat, ks_pvalue=pks,
         baseline_reject_05=float(np.mean(res.baseline <= 0.05)))
    if args.out:
        io.write_csv(args.out, CSV_COLUMNS, res.rows())


def cmd_coverage(args, out):
    from .harness import binomial_se, coverage_experiment

    s = _scenario(args)
    res = coverage_experiment(s, alpha=args.alpha, reps=args.reps, seed=args.seed, threads=args.threads)
    n = len(res.p_values)
    emit(out, scenario=s.id, reps=n, alpha=args.alpha, coverage=res.coverage,
         se=binomial_se(1 - args.alpha, n))
    if args.out:
        rows = ((*r, lo, hi, mu) for r, lo, hi, mu in zip(res.rows(), res.lo, res.hi, res.mu))
        io.write_csv(args.out, CSV_COLUMNS + ("lo", "hi", "mu"), rows)


# ---------------------------------------------------------------------------
# parser


def _problem_args(sp):
    g = sp.add_argument_group("problem")
    g.add_argument("--penalty", choices=("lasso", "group", "nuclear"))
    g.add_argument("--config", help="JSON penalty configuration")
    g.add_argument("--design", help="design matrix file")
    g.add_argument("--response", help="response vector or matrix file")
    g.add_argument("--sigma", default="I", help="'I', a scalar variance, or a covariance file")
    g.add_argument("--groups", help="file with one group label per column")
    g.add_argument("--weights", help="file with one weight per group (default sqrt of size)")
    g.add_argument("--cperp", help="orthonormal basis of C-perp, one column per direction")
    g.add_argument("--op", choices=("identity", "mask", "matmul"), help="nuclear-norm operator")
    g.add_argument("--mask-file", help="0/1 matrix of observed entries")
    g.add_argument("--design-file", help="design of the matmul operator")


def _study_args(sp):
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--reps", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help="worker threads (default KACRICE_THREADS or 1)")
    sp.add_argument("--noise", choices=("gaussian", "heavy"))
    sp.add_argument("--out", help="write per-replicate CSV here")


def make_parser():
    ap = argparse.ArgumentParser(prog="kacrice", description="Kac-Rice tests for the global null.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("pivot", help="p-value for one problem")
    _problem_args(sp)
    sp.set_defaults(func=cmd_pivot)

    sp = sub.add_parser("interval", help="selection interval for the mean at the maximizer")
    _problem_args(sp)
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.set_defaults(func=cmd_interval)

    sp = sub.add_parser("vbounds", help="truncation limits from the fractional programs")
    _problem_args(sp)
    sp.add_argument("--method", choices=("admm", "dual"), default="admm")
    sp.add_argument("--tol", type=float, default=1e-6)
    sp.set_defaults(func=cmd_vbounds)

    sp = sub.add_parser("simulate", help="null p-values for a catalog scenario")
    _study_args(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("coverage", help="selection interval coverage for a scenario")
    _study_args(sp)
    sp.add_argument("--alpha", type=float, default=0.1)
    sp.set_defaults(func=cmd_coverage)
    return ap


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, out)
    except InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except KacRiceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


run_cli = main

if __name__ == "__main__":
    sys.exit(main())
