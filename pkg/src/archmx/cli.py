"""Command-line entry point: ``archmx <command> ...``.

Exit codes: 0 on success, 1 for data or model errors, 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .anovatest import test_covariate
from .core import Shock, validate_inputs
from .dgp import SCENARIOS, SimModel, simulate_model
from .errors import ArchMxError
from .estimate.kernel import KernelConfig, fit_partially_linear
from .estimate.spline import SplineConfig, fit_bspline_qmle
from .fixture import make_fixture
from .ingest import file_digest, ingest_csv, load_series_and_covariates, write_frame
from .montecarlo import StudyConfig, run_rejection_study, run_selection_study
from .select import by_cutoffs, select_variables


def _covariate_key(text: str):
    return int(text) if text.lstrip("-").isdigit() else text


def _write_json(path, payload: dict) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=True)
    if path in (None, "-"):
        print(text)
    else:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _estimator(args):
    if args.method == "spline":
        return SplineConfig(internal_knots=args.knots)
    return KernelConfig(tuple(args.bandwidth) if args.bandwidth else None, args.kernel)


def _load(args):
    if args.data:
        ds = ingest_csv(
            args.data,
            value_column=args.value_column,
            price_columns_to_log_return=args.log_return or (),
        )
        return ds.returns, ds.covariates, file_digest(args.data)
    if not (args.series and args.covariates):
        raise _Usage("give --series and --covariates, or --data")
    series, panel = load_series_and_covariates(args.series, args.covariates, args.value_column)
    return series, panel, file_digest(args.series, args.covariates)


class _Usage(Exception):
    pass


def _input_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--series", help="CSV with a date column and the return series")
    p.add_argument("--covariates", help="CSV with a date column and one column per covariate")
    p.add_argument("--data", help="single CSV holding the series and covariates")
    p.add_argument("--value-column", help="series column (default: first non-date column)")
    p.add_argument("--log-return", nargs="*", metavar="COL", help="price columns to turn into log returns (--data only)")
    p.add_argument("--p", type=int, default=1, help="ARCH order")
    p.add_argument("--seed", type=int, help="seed recorded in the report (data provenance only)")


def _estimator_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=("kernel", "spline"), default="kernel")
    p.add_argument("--kernel", choices=("gaussian", "epanechnikov"), default="gaussian")
    p.add_argument("--bandwidth", type=float, nargs="+", help="one bandwidth, or one per covariate")
    p.add_argument("--knots", type=int, help="interior knots per covariate (spline method)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="archmx", description="ARCH(p)-m(X) estimation, covariate tests and selection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one tabulated design")
    p.add_argument("--scenario", choices=SCENARIOS, required=True)
    p.add_argument("--model", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--shock", default="normal", help="normal, laplace[:b], t[:df] or scaled_t[:df:scale]")
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--burnin", type=int, default=500)
    p.add_argument("--standardize-shocks", action="store_true", help="rescale shocks to unit variance")
    p.add_argument("--out", nargs=2, metavar=("SERIES_CSV", "COVARIATES_CSV"), required=True)

    p = sub.add_parser("fit", help="estimate alpha and m")
    _input_args(p)
    _estimator_args(p)
    p.add_argument("--exclude", help="covariate left out of m (name or 0-based index)")
    p.add_argument("--out", default="-")

    p = sub.add_parser("test", help="test whether one covariate enters m")
    _input_args(p)
    _estimator_args(p)
    p.add_argument("--covariate", required=True, help="name or 0-based index")
    p.add_argument("--kn", type=int, help="window size (odd)")
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--out", default="-")

    p = sub.add_parser("select", help="test every covariate and select with the BY rule")
    _input_args(p)
    _estimator_args(p)
    p.add_argument("--q", type=float, default=0.05)
    p.add_argument("--kn", type=int)
    p.add_argument("--rule", choices=("by", "bonferroni"), default="by")
    p.add_argument("--out", default="-")

    for name, target in (("mc-test", "rates.csv"), ("mc-select", "metrics.csv")):
        p = sub.add_parser(name, help=f"replication study written to {target}")
        p.add_argument("--config", required=True, help="study JSON (keys mirror StudyConfig)")
        p.add_argument("--out", required=True)
        p.add_argument("--workers", type=int)

    p = sub.add_parser("make-fixture", help="write a synthetic 11-covariate price dataset")
    p.add_argument("--n", type=int, default=2500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _cmd_simulate(args) -> dict:
    model = SimModel(args.scenario, args.model, args.c)
    series, panel = simulate_model(
        model, args.n, args.seed, rho=args.rho, shock=Shock.parse(args.shock),
        burnin=args.burnin, standardize_shocks=args.standardize_shocks,
    )
    dates = np.arange(args.n)
    write_frame(args.out[0], pd.DataFrame({"date": dates, "value": series.values}))
    cov = pd.DataFrame(panel.matrix, columns=panel.names)
    cov.insert(0, "date", dates)
    write_frame(args.out[1], cov)
    return {}


def _cmd_fit(args):
    series, panel, digest = _load(args)
    series, panel = validate_inputs(series, panel, args.p)
    exclude = None if args.exclude is None else _covariate_key(args.exclude)
    if args.method == "spline":
        fit = fit_bspline_qmle(series, panel, args.p, _estimator(args), exclude)
    else:
        fit = fit_partially_linear(series, panel, args.p, _estimator(args), exclude)
    v = np.asarray(fit.residuals)
    return {
        "command": "fit",
        "input_sha256": digest,
        "seed": args.seed,
        "method": fit.method,
        "p": fit.p,
        "n_eff": fit.n_eff,
        "alpha_hat": fit.alpha_hat.tolist(),
        "columns": list(fit.columns),
        "excluded": fit.excluded,
        "bandwidth": None if fit.bandwidth is None else [float(h) for h in fit.bandwidth],
        "kernel": fit.kernel,
        "knots": None if fit.knots is None else [k.tolist() for k in fit.knots],
        "order": None if fit.order is None else list(fit.order),
        "objective": fit.objective,
        "residual_mean": float(v.mean()),
        "residual_var": float(v.var()),
    }


def _cmd_test(args):
    series, panel, digest = _load(args)
    res = test_covariate(series, panel, _covariate_key(args.covariate), args.p, _estimator(args), args.kn)
    out = res.to_dict()
    out.update(
        command="test",
        input_sha256=digest,
        seed=args.seed,
        level=args.level,
        reject=bool(res.p_value <= args.level),
        # a single hypothesis: the multiplicity adjustment is the identity
        adjusted_p_values=[res.p_value],
        cutoffs=[args.level],
        bandwidth=None if res.bandwidth is None else list(res.bandwidth),
    )
    out["alpha_hat"] = list(res.alpha_hat)
    return out


def _cmd_select(args):
    series, panel, digest = _load(args)
    sel = select_variables(series, panel, args.p, args.q, _estimator(args), args.kn, method=args.rule)
    names = panel.names
    covs = []
    for t, adj in zip(sel.tests, sel.adjusted):
        row = t.to_dict()
        row["adjusted_p_value"] = float(adj)
        row["selected"] = t.covariate in sel.selected
        row["bandwidth"] = None if t.bandwidth is None else list(t.bandwidth)
        row["alpha_hat"] = list(t.alpha_hat)
        covs.append(row)
    out = sel.to_dict()
    out.update(
        command="select",
        input_sha256=digest,
        seed=args.seed,
        names=list(names),
        selected_names=[names[i] for i in sel.selected],
        covariates=covs,
        k_n=sorted({t.k_n for t in sel.tests}),
        tau_hat=[t.tau_hat for t in sel.tests],
        bandwidth=[None if t.bandwidth is None else list(t.bandwidth) for t in sel.tests],
        by_cutoffs=by_cutoffs(panel.d, args.q).tolist(),
    )
    return out


def _study(args) -> StudyConfig:
    cfg = StudyConfig.from_json(args.config)
    if args.workers is not None:
        cfg = StudyConfig.from_dict({**cfg.to_dict(), "workers": args.workers})
    if cfg.long_running:
        print(f"note: {cfg.replications} replications at n={cfg.n} is a long-running study", file=sys.stderr)
    return cfg


def _cmd_mc_test(args):
    cfg = _study(args)
    rows = run_rejection_study(cfg)
    frame = pd.DataFrame(
        {
            "scenario": cfg.scenario,
            "model": cfg.model_id,
            "shock": cfg.shock,
            "n": cfg.n,
            "c": [r.c for r in rows],
            "rejection_rate": [r.rejection_rate for r in rows],
            "mc_stderr": [r.mc_stderr for r in rows],
            "replications": [r.replications for r in rows],
            "failures": [r.failures for r in rows],
            "master_seed": cfg.master_seed,
        }
    )
    write_frame(args.out, frame)
    return {}


def _cmd_mc_select(args):
    cfg = _study(args)
    met = run_selection_study(cfg)
    row = {
        "scenario": cfg.scenario,
        "model": cfg.model_id,
        "shock": cfg.shock,
        "n": cfg.n,
        "rho": cfg.rho,
        "cs": met.mean_cs,
        "is": met.mean_is,
        "ce": met.mean_ce,
        "ie": met.mean_ie,
    }
    for j, f in enumerate(met.per_covariate_freq):
        row[f"freq_X{j + 1}"] = float(f)
    row.update(replications=met.replications, failures=met.failures, master_seed=cfg.master_seed)
    write_frame(args.out, pd.DataFrame([row]))
    return {}


def _cmd_make_fixture(args):
    write_frame(args.out, make_fixture(args.n, args.seed))
    return {}


COMMANDS = {
    "simulate": _cmd_simulate,
    "fit": _cmd_fit,
    "test": _cmd_test,
    "select": _cmd_select,
    "mc-test": _cmd_mc_test,
    "mc-select": _cmd_mc_select,
    "make-fixture": _cmd_make_fixture,
}


def run_command(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        report = COMMANDS[args.command](args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"archmx: error: {exc}", file=sys.stderr)
        return 2
    except (ArchMxError, ValueError, KeyError, OSError) as exc:
        print(f"archmx: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if report:
        _write_json(getattr(args, "out", "-"), report)
    return 0


def main() -> None:
    sys.exit(run_command())
