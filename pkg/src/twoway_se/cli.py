"""Command line front end: ``fit``, ``bandwidth`` and ``simulate``."""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path
from typing import Sequence

import numpy as np

from . import montecarlo as mc
from .bandwidth import ar1_coefficients, andrews_m, stock_watson_m
from .errors import DesignError, TwoWayError
from .estimators import ALL_KINDS, parse_estimator
from .panel import PanelSchema, load_long_csv, to_balanced
from .regression import (
    format_table,
    fe_fit,
    inference_table,
    ols_fit,
    rows_to_csv,
)
from .variance import cluster_sums

EXIT_OK = 0
EXIT_SCHEMA = 2
EXIT_IMBALANCE = 3
EXIT_COLLINEAR = 4
EXIT_IO = 5


def _split(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def _parse_grid(text: str) -> list[float]:
    """``"0.5:1.5:21"`` (start:stop:count) or a comma list."""
    if ":" in text:
        start, stop, count = text.split(":")
        return [float(v) for v in np.linspace(float(start), float(stop), int(count))]
    return [float(v) for v in _split(text)]


def _add_schema_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", required=True, help="long-format CSV file")
    p.add_argument("--unit-col", required=True)
    p.add_argument("--time-col", required=True)
    p.add_argument("--y-col", required=True)
    p.add_argument("--x-cols", required=True, help="comma-separated regressor columns")
    p.add_argument("--fixed-effects", action="store_true",
                   help="two-way within estimator instead of pooled OLS")
    p.add_argument("--no-intercept", action="store_true",
                   help="omit the intercept in pooled OLS")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twoway-se",
        description="Two-way cluster-robust standard errors with serially correlated time effects.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="estimate a regression on a CSV panel")
    _add_schema_args(fit)
    fit.add_argument("--estimator", default="CHS", help=f"one of {', '.join(ALL_KINDS)}")
    fit.add_argument("--m", type=float, default=None,
                     help="fixed lag truncation (THOMPSON default 2; CHS overrides --bandwidth)")
    fit.add_argument("--weights", choices=["triangular", "uniform"], default="triangular")
    fit.add_argument("--no-evc", action="store_true", help="skip the eigenvalue correction")
    fit.add_argument("--bandwidth", choices=["andrews", "stock-watson"], default="andrews")
    fit.add_argument("--level", type=float, default=0.95)
    fit.add_argument("--dof-adjust", action="store_true",
                     help="multiply the covariance by NT/(NT-k)")
    fit.add_argument("--format", choices=["json", "table", "csv"], default="json")

    bw = sub.add_parser("bandwidth", help="lag truncation diagnostics for a CSV panel")
    _add_schema_args(bw)

    sim = sub.add_parser("simulate", help="Monte Carlo coverage or power experiment")
    sim.add_argument("--design", choices=["baseline", "fixed-effect"], default="baseline")
    sim.add_argument("--n", type=int, default=50)
    sim.add_argument("--t", type=int, default=100)
    sim.add_argument("--rho", type=float, default=0.0)
    sim.add_argument("--weights", default=None, help="comma-separated design weights")
    sim.add_argument("--beta", default="1,1")
    sim.add_argument("--seed", type=int, default=1)
    sim.add_argument("--table1-row", default=None,
                     help="OLS design of a published table row (I..XII, or 'all')")
    sim.add_argument("--table3-row", default=None,
                     help="fixed-effect design of a published table row (I..XII, or 'all')")
    sim.add_argument("--reps", type=int, required=True)
    sim.add_argument("--estimators", default=",".join(ALL_KINDS))
    sim.add_argument("--level", type=float, default=0.95)
    sim.add_argument("--mode", choices=["coverage", "power"], default="coverage")
    sim.add_argument("--b-grid", default="0.5:1.5:21", help="start:stop:count or comma list")
    sim.add_argument("--workers", type=int, default=None,
                     help=f"worker processes (default ${mc.WORKERS_ENV} or 1)")
    sim.add_argument("--output", default=None, help="report file (.json or .csv)")
    sim.add_argument("--format", choices=["json", "csv"], default=None)
    return parser


def _error(exc: Exception, code: int, stderr) -> int:
    name = getattr(exc, "code", type(exc).__name__)
    print(json.dumps({"error": name, "exit_code": code, "message": str(exc)}), file=stderr)
    return code


def _load(args):
    schema = PanelSchema(args.unit_col, args.time_col, args.y_col, tuple(_split(args.x_cols)))
    with open(args.input, "rb") as fh:
        return to_balanced(load_long_csv(fh, schema))


def _fit_panel(args, panel):
    if args.fixed_effects:
        return fe_fit(panel)
    return ols_fit(panel, add_intercept=not args.no_intercept)


def _warn_stream(caught, stderr) -> None:
    for w in caught:
        print(f"warning: {w.message}", file=stderr)


def cmd_fit(args, stdout=sys.stdout, stderr=sys.stderr) -> int:
    panel = _load(args)
    fit = _fit_panel(args, panel)
    if not 0 < args.level < 1:
        raise DesignError(f"level must lie in (0, 1), got {args.level}")
    est = parse_estimator(args.estimator, m=args.m, weights=args.weights,
                          evc=not args.no_evc, bandwidth=args.bandwidth)
    nt = fit.n_units * fit.n_periods
    dof = nt / (nt - fit.k) if args.dof_adjust else 1.0
    cov = est.covariance(fit, dof_adjustment=dof)
    rows = inference_table(fit, cov, args.level)

    bw = cov.bandwidth
    if bw is not None:
        if bw.clamped:
            print(f"warning: lag truncation clamped to T-1={fit.n_periods - 1}", file=stderr)
        for j, flag in enumerate(bw.rho_clamped):
            if flag:
                print(f"warning: AR(1) coefficient for {fit.columns[j]} clamped to +/-0.97",
                      file=stderr)
    for row in rows:
        if row.negative_variance:
            print(f"warning: negative variance estimate for {row.name}; standard error set to 0",
                  file=stderr)

    if args.format == "json":
        doc = {
            "estimator": est.label,
            "fixed_effects": fit.used_fixed_effects,
            "n_units": fit.n_units,
            "n_periods": fit.n_periods,
            "level": args.level,
            "coefficients": list(fit.columns),
            "beta": fit.beta_hat.tolist(),
            "std_errors": cov.std_errors.tolist(),
            "m_hat": None if bw is None else bw.m_value,
            "evc": {
                "applied": cov.omega.evc_applied,
                "clipped_eigenvalues": cov.omega.clipped_eigenvalues,
                "pre_evc_min_eigenvalue": cov.omega.pre_evc_min_eigenvalue,
            },
            "inference": [r.to_dict() for r in rows],
            "covariance": cov.to_dict(),
        }
        stdout.write(json.dumps(doc, indent=2) + "\n")
    elif args.format == "csv":
        stdout.write(rows_to_csv(rows))
    else:
        head = f"{est.label}  N={fit.n_units}  T={fit.n_periods}"
        if bw is not None:
            head += f"  M={bw.m_value:.4g}"
        stdout.write(head + "\n" + format_table(rows) + "\n")
    return EXIT_OK


def cmd_bandwidth(args, stdout=sys.stdout, stderr=sys.stderr) -> int:
    panel = _load(args)
    fit = _fit_panel(args, panel)
    sums = cluster_sums(fit.scores())
    ar = ar1_coefficients(sums)
    andrews = andrews_m(ar, fit.n_periods)
    sw = stock_watson_m(fit.n_periods)
    doc = {
        "n_periods": fit.n_periods,
        "coefficients": list(fit.columns),
        "rho_hats": ar.rho.tolist(),
        "rho_raw": ar.raw.tolist(),
        "rho_clamped": [bool(v) for v in ar.clamped],
        "rho_degenerate": [bool(v) for v in ar.degenerate],
        "andrews": andrews.to_dict(),
        "stock_watson": sw.to_dict(),
    }
    stdout.write(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def _sim_configs(args) -> list[tuple[str | None, mc.DgpConfig]]:
    if args.table1_row and args.table3_row:
        raise DesignError("choose at most one of --table1-row and --table3-row")
    for table, row in ((1, args.table1_row), (3, args.table3_row)):
        if row:
            rows = mc.TABLE_ROWS if row.lower() == "all" else [row.upper()]
            return [(f"table{table}:{r}", mc.preset(table, r, args.seed)) for r in rows]
    design = mc.Design.BASELINE if args.design == "baseline" else mc.Design.FIXED_EFFECT
    if args.weights is None:
        weights = mc.IID_WEIGHTS if design is mc.Design.BASELINE else mc.FE_IID_WEIGHTS
    else:
        weights = tuple(float(w) for w in _split(args.weights))
    beta = tuple(float(b) for b in _split(args.beta))
    return [(None, mc.DgpConfig(design, args.n, args.t, args.rho, weights, beta, args.seed))]


def cmd_simulate(args, stdout=sys.stdout, stderr=sys.stderr) -> int:
    configs = _sim_configs(args)
    estimators = [parse_estimator(e) for e in _split(args.estimators)]
    fmt = args.format or ("csv" if args.output and args.output.endswith(".csv") else "json")
    reports = []
    for label, cfg in configs:
        if args.mode == "coverage":
            rep = mc.run_coverage(cfg, args.reps, estimators, args.level, args.workers)
        else:
            rep = mc.run_power(cfg, args.reps, estimators, args.level,
                               _parse_grid(args.b_grid), args.workers)
        reports.append((label, rep))
        if label:
            stdout.write(f"[{label}]\n")
        stdout.write(rep.summary() + "\n")
        if label and args.mode == "coverage":
            table, row = label.split(":")
            ref = (mc.TABLE1_PUBLISHED if table == "table1" else mc.TABLE3_PUBLISHED)[row]
            published = "  ".join(f"{k}={v:.3f}" for k, v in ref.items())
            stdout.write(f"  published: {published}\n")
        print(f"elapsed {rep.elapsed:.1f}s", file=stderr)

    if args.output:
        if fmt == "csv":
            parts = []
            for label, rep in reports:
                text = rep.to_csv()
                parts.append(text if label is None else f"# {label}\n{text}")
            body = "".join(parts)
        elif len(reports) == 1 and reports[0][0] is None:
            body = reports[0][1].to_json()
        else:
            body = json.dumps({label: rep.to_dict() for label, rep in reports}, indent=2) + "\n"
        try:
            Path(args.output).write_text(body, encoding="utf-8")
        except OSError as exc:
            return _error(exc, EXIT_IO, stderr)
    return EXIT_OK


_COMMANDS = {"fit": cmd_fit, "bandwidth": cmd_bandwidth, "simulate": cmd_simulate}


def main(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            code = _COMMANDS[args.command](args, stdout, stderr)
        _warn_stream(caught, stderr)
        return code
    except TwoWayError as exc:
        return _error(exc, exc.exit_code, stderr)
    except OSError as exc:
        return _error(exc, EXIT_IO, stderr)


if __name__ == "__main__":
    sys.exit(main())
