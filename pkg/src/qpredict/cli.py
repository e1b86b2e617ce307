"""Command-line entry point: ``qpredict <command> [options]``.

Exit codes are 0 on success, 2 for configuration errors, 3 for data errors
and 4 for numerical failures. Errors are written to standard error as one
line of JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .exceptions import ConfigurationError, DataError, NumericalError, QpredictError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigurationError(message)


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated numbers, got {text!r}") from None


def _names(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _seed(args):
    env = os.environ.get("QPR_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"QPR_SEED must be an integer, got {env!r}") from None
    return args.seed


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_simulate(args):
    from .dgp import DgpConfig, InnovationSpec, PersistenceSpec, simulate_system

    if args.config:
        with open(args.config) as fh:
            cfg = DgpConfig.from_dict(json.load(fh))
    else:
        cfg = DgpConfig(n=args.n, alpha=args.alpha, beta=args.beta, gamma_lag=args.gamma_lag,
                        persistence=PersistenceSpec(c=args.c, gamma_exp=args.gamma_exp, mu=args.mu),
                        innovations=InnovationSpec(family=args.family, rho_uv=args.rho_uv))
    _emit(simulate_system(cfg, _seed(args)).to_csv(), args.out)


def _result_table(rows, fmt):
    from .montecarlo import aligned_table

    header = ["method", "hypothesis", "tau", "calibration", "statistic", "dof", "p_value", "converged"]
    if fmt == "csv":
        import csv
        import io

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows([[repr(v) if isinstance(v, float) else str(v).lower() if isinstance(v, bool) else v
                      for v in r] for r in rows])
        return buf.getvalue()
    return aligned_table(header, [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in r] for r in rows])


def _cmd_test(args):
    from .bootstrap import BootstrapConfig, bootstrap_pvalue
    from .dgp import TimeSeriesSample
    from .el import el_test
    from .ivx import ivx_qr_test

    try:
        sample = TimeSeriesSample.from_csv(args.data)
    except OSError as exc:
        raise DataError(f"cannot read {args.data}: {exc.strerror}") from None
    rows = []
    for tau in args.tau:
        if args.bootstrap:
            if args.hypothesis != "joint":
                raise ConfigurationError("--bootstrap supports the joint hypothesis only")
            cfg = BootstrapConfig(replications=args.bootstrap, seed=_seed(args) or 0)
            res = bootstrap_pvalue(sample, tau, args.method, {"dynamic": args.dynamic}, cfg).as_test_result(
                "joint" if args.dynamic else "beta_only")
        elif args.method == "el":
            res = el_test(sample, tau, args.hypothesis, dynamic=args.dynamic)
        else:
            if args.hypothesis != "joint":
                raise ConfigurationError("the IVX test covers the joint hypothesis only")
            res = ivx_qr_test(sample, tau, dynamic=args.dynamic)
        rows.append([res.method, res.hypothesis, float(tau), res.calibration, float(res.statistic),
                     res.dof, float(res.p_value), res.converged])
    _emit(_result_table(rows, args.format), args.out)


def _cmd_mc(args):
    from .montecarlo import McGrid, format_results, run_grid

    grid = McGrid.from_json(args.config)
    seed = _seed(args)
    if seed is not None:
        grid.master_seed = int(seed)
    results = run_grid(grid, jobs=args.jobs)
    _emit(format_results(results, grid.levels, args.format), args.out)


def _cmd_empirical(args):
    from .bootstrap import BootstrapConfig
    from .data import parse_dataset, run_empirical

    preds = _names(args.predictors)
    ds = parse_dataset(args.data, {"date": args.date_column, "return": args.return_column, "predictors": preds},
                       start=args.date_from, end=args.date_to)
    cal = ["asymptotic"] + (["bootstrap"] if args.bootstrap else [])
    boot = BootstrapConfig(replications=args.bootstrap or 399, seed=_seed(args) or 0)
    report = run_empirical(ds, preds, args.tau, _names(args.methods), cal, dynamic=args.dynamic, bootstrap=boot)
    if ds.dropped_rows:
        print(json.dumps({"warning": "dropped rows with missing values", "count": ds.dropped_rows}), file=sys.stderr)
    _emit(report.to_csv() if args.format == "csv" else report.to_table(), args.out)


def _cmd_diagnose(args):
    from . import asymptotics as A
    from .dgp import DgpConfig, PersistenceSpec

    seed = _seed(args) or 0
    rows = []
    if args.check == "stationary":
        cfg = DgpConfig(n=args.n, alpha=0.1, persistence=PersistenceSpec(c=args.c, gamma_exp=0))
        for r in range(args.reps):
            from .dgp import simulate_system

            rows.append({"rep": r, "z": A.standardized_slope(simulate_system(cfg, [seed, r]), args.tau[0], 0.0)})
    elif args.check == "linearization":
        cfg = DgpConfig(n=args.n, alpha=0.1, persistence=PersistenceSpec(c=args.c, gamma_exp=0))
        for r in range(args.reps):
            rows.append({"rep": r, "m": args.n // 2,
                         "residual": A.linearization_residual(cfg, args.tau[0], [1.0, 1.0], args.n // 2, [seed, r])})
    elif args.check == "jc":
        for r in range(args.reps):
            rows.append({"rep": r, "c": args.c, "j1": float(A.simulate_jc(args.c, 1000, [seed, r]).values[-1])})
    else:
        cfg = DgpConfig(n=args.n, persistence=PersistenceSpec(c=args.c))
        for r in range(args.reps):
            end, avg = A.scaled_path_functional(cfg, [seed, r])
            rows.append({"rep": r, "endpoint": end, "time_average": avg})
    if args.format == "csv":
        _emit(A.diagnostics_to_csv(rows), args.out)
    else:
        key = [k for k in rows[0] if k not in ("rep", "m", "c")]
        summary = [[k, f"{np.mean([r[k] for r in rows]):.4f}", f"{np.var([r[k] for r in rows]):.4f}"] for k in key]
        from .montecarlo import aligned_table

        _emit(aligned_table(["quantity", "mean", "variance"], summary), args.out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qpredict", description="Quantile predictability inference with EL and IVX tests.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, tau=True):
        sp.add_argument("--seed", type=int, default=None, help="random seed (QPR_SEED overrides)")
        sp.add_argument("--out", default=None, help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "table"), default="csv")
        if tau:
            sp.add_argument("--tau", type=_floats, default=[0.5], help="quantile level(s), comma separated")

    s = sub.add_parser("simulate", help="write one synthetic sample as CSV")
    common(s, tau=False)
    s.add_argument("--config", help="JSON DGP configuration (overrides the flags below)")
    s.add_argument("--n", type=int, default=500)
    s.add_argument("--c", type=float, default=0.0)
    s.add_argument("--gamma-exp", type=float, default=1.0)
    s.add_argument("--mu", type=float, default=0.0)
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--beta", type=float, default=0.0)
    s.add_argument("--gamma-lag", type=float, default=0.0)
    s.add_argument("--rho-uv", type=float, default=0.0)
    s.add_argument("--family", default="gaussian", choices=("gaussian", "student_t", "cc_arch"))
    s.set_defaults(func=_cmd_simulate)

    t = sub.add_parser("test", help="run one test on a sample CSV (columns t,y,x)")
    common(t)
    t.add_argument("data")
    t.add_argument("--method", choices=("el", "ivx"), default="el")
    t.add_argument("--dynamic", action="store_true", help="include the lagged predictand")
    t.add_argument("--hypothesis", choices=("joint", "beta_only", "gamma_only"), default="joint")
    t.add_argument("--bootstrap", type=int, default=0, metavar="B", help="multiplier bootstrap replications")
    t.set_defaults(func=_cmd_test)

    m = sub.add_parser("mc", help="Monte Carlo grid from a JSON configuration")
    common(m, tau=False)
    m.add_argument("config")
    m.add_argument("--jobs", type=int, default=1)
    m.set_defaults(func=_cmd_mc)

    e = sub.add_parser("empirical", help="predictability report for a monthly dataset")
    common(e)
    e.add_argument("data")
    e.add_argument("--predictors", required=True, help="comma-separated predictor columns")
    e.add_argument("--date-column", default="yyyymm")
    e.add_argument("--return-column", default="ret")
    e.add_argument("--methods", default="el,ivx")
    e.add_argument("--method", dest="methods", help="alias of --methods")
    e.add_argument("--dynamic", action="store_true")
    e.add_argument("--bootstrap", type=int, default=0, metavar="B")
    e.add_argument("--from", dest="date_from", default=None, help="first month, YYYYMM or YYYY-MM")
    e.add_argument("--to", dest="date_to", default=None, help="last month, YYYYMM or YYYY-MM")
    e.set_defaults(func=_cmd_empirical)

    d = sub.add_parser("diagnose", help="asymptotic diagnostics")
    common(d)
    d.add_argument("--check", choices=("stationary", "linearization", "jc", "paths"), default="jc")
    d.add_argument("--n", type=int, default=2000)
    d.add_argument("--c", type=float, default=-0.5)
    d.add_argument("--reps", type=int, default=200)
    d.set_defaults(func=_cmd_diagnose)
    return p


def _exit_code(exc):
    if isinstance(exc, ConfigurationError):
        return EXIT_CONFIG
    if isinstance(exc, NumericalError):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except QpredictError as exc:
        code = _exit_code(exc)
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code}), file=sys.stderr)
        return code
    except OSError as exc:
        print(json.dumps({"error": "DataError", "message": str(exc), "exit_code": EXIT_DATA}), file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
