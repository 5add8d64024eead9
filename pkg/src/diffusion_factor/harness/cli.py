"""Command-line entry point.

    diffusion-factor [--seed S] [--out DIR] [--config FILE] [--threads N]
                     [--print-config] <command> [options]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
abort.
"""

import argparse
import json
import logging
import os
import sys
import time

import numpy as np

from ..diffusion import FactorModelSpec, GaussianLaw, MixtureLaw, PointMass
from ..errors import (
    AlignmentError,
    ConfigError,
    DataError,
    DegenerateInputError,
    InfeasibleError,
    InsufficientDataError,
    InvalidInputError,
    NumericalAbort,
    UnsupportedLawError,
)
from ..estimation import METRIC_COLUMNS, MomentEstimate, all_metrics, sample_moments, top_k_subspace
from ..panel import ReturnPanel
from ..portfolio.backtest import REPORT_COLUMNS
from ..sampler import appendix_d_spec, simulate_panel, write_samples
from ..score_net import load_checkpoint, save_checkpoint
from .backtest_runner import run_backtest
from .config import load_config
from .ingest import ingest_csv
from .pipeline import fit_diffusion, fitted_from_checkpoint, schedule_from
from .report import emit_report, file_sha256, write_manifest, write_table
from .study import SUMMARY_COLUMNS, run_synthetic_study

log = logging.getLogger("diffusion_factor")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4


# -- spec files -------------------------------------------------------------


def spec_to_dict(spec):
    law = spec.law
    if isinstance(law, GaussianLaw):
        ld = {"type": "gaussian", "mean": law.mean.tolist(), "cov": law.cov.tolist()}
    elif isinstance(law, MixtureLaw):
        ld = {
            "type": "mixture",
            "weights": law.weights.tolist(),
            "means": law.means.tolist(),
            "covs": law.covs.tolist(),
        }
    else:
        ld = {"type": "point_mass", "f0": law.f0.tolist()}
    return {
        "beta": spec.beta.tolist(),
        "sigma": spec.sigma.tolist(),
        "sigma_max": spec.sigma_max,
        "law": ld,
    }


def spec_from_dict(doc):
    ld = doc["law"]
    kind = ld["type"]
    if kind == "gaussian":
        law = GaussianLaw(ld["mean"], ld["cov"])
    elif kind == "mixture":
        law = MixtureLaw(ld["weights"], ld["means"], ld["covs"])
    elif kind == "point_mass":
        law = PointMass(ld["f0"])
    else:
        raise DataError(f"unknown factor law {kind!r}")
    return FactorModelSpec(np.array(doc["beta"]), law, np.array(doc["sigma"]), doc.get("sigma_max"))


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


# -- commands ---------------------------------------------------------------


def cmd_simulate(args, cfg):
    st = cfg.study
    d = args.d or st.d
    k = args.k or st.k
    spec_seed = st.spec_seed if args.spec_seed is None else args.spec_seed
    spec = appendix_d_spec(d, k, spec_seed, st.sigma_max)
    panel = simulate_panel(spec, args.n, cfg.seed)
    panel.to_csv(os.path.join(cfg.out, "panel.csv"))
    with open(os.path.join(cfg.out, "spec.json"), "w") as fh:
        json.dump({**spec_to_dict(spec), "asset_ids": panel.asset_ids}, fh)
    return {"seeds": {"data": cfg.seed, "spec": spec_seed}}


def _load_panel(path, cfg, market_cap=None):
    if path is None:
        raise ConfigError("no input data given (use --data or backtest.data)")
    return ingest_csv(path, cfg.preprocess, market_cap)


def cmd_train(args, cfg):
    panel = _load_panel(args.data, cfg)
    k = args.k or cfg.study.k
    if not 0 < k < panel.d:
        raise ConfigError(f"k={k} must lie in (0, {panel.d})")
    model = fit_diffusion(
        panel.values, cfg, k, cfg.seed, log_path=os.path.join(cfg.out, "train_log.csv")
    )
    model.params.meta["asset_ids"] = panel.asset_ids
    save_checkpoint(os.path.join(cfg.out, "checkpoint.json"), model.params, model.sched)
    return {"seeds": {"train": cfg.seed}}


def cmd_sample(args, cfg):
    params, sched_doc = load_checkpoint(args.checkpoint)
    if sched_doc is not None:
        cfg.schedule.T, cfg.schedule.t0 = sched_doc["T"], sched_doc["t0"]
    sched = schedule_from(cfg)
    model = fitted_from_checkpoint(params, sched)
    m = args.m or cfg.sampler.m
    steps = args.steps or cfg.sampler.steps
    mode = args.mode or cfg.sampler.mode
    values = model.generate(m, cfg.seed, steps, mode)
    ids = params.meta.get("asset_ids")
    panel = ReturnPanel(values, ids, [f"s{i:0{len(str(m - 1))}d}" for i in range(m)])
    sidecar = {
        "checkpoint_sha256": file_sha256(args.checkpoint),
        "seed": cfg.seed,
        "sampler": {"m": m, "steps": steps, "mode": mode},
        "schedule": {"T": sched.T, "t0": sched.t0},
    }
    write_samples(os.path.join(cfg.out, "samples.csv"), panel, sidecar)
    return {"seeds": {"sample": cfg.seed}}


def cmd_recover(args, cfg):
    panel = _load_panel(args.data, cfg)
    k = args.k or cfg.study.k
    est = sample_moments(panel.values)
    sub = top_k_subspace(est, k)
    with open(os.path.join(cfg.out, "subspace.json"), "w") as fh:
        json.dump({"k": k, "eigenvalues": sub.eigenvalues.tolist(), "assets": panel.asset_ids}, fh)
    rows = [dict(zip(["asset", *[f"u{j}" for j in range(k)]], [a, *row])) for a, row in zip(panel.asset_ids, sub.basis)]
    write_table(os.path.join(cfg.out, "basis.csv"), ["asset", *[f"u{j}" for j in range(k)]], rows)
    if args.spec:
        doc = _read_json(args.spec)
        spec = spec_from_dict(doc)
        ids = doc.get("asset_ids") or [f"a{i}" for i in range(spec.d)]
        pos = {a: i for i, a in enumerate(ids)}
        try:
            idx = np.array([pos[a] for a in panel.asset_ids])
        except KeyError as exc:
            raise DataError(f"asset {exc.args[0]!r} is not in the spec") from None
        # preprocessing may drop or reorder columns
        truth = MomentEstimate(spec.mean()[idx], spec.covariance()[np.ix_(idx, idx)], "oracle")
        metrics = all_metrics(est, truth, k)
        write_table(
            os.path.join(cfg.out, "recover_metrics.csv"),
            ["metric", "value"],
            [{"metric": name, "value": val} for name, val in metrics.items()],
        )
    return {}


def cmd_portfolio(args, cfg):
    path = args.data or cfg.backtest.data
    panel = _load_panel(path, cfg, args.market_cap)
    run = run_backtest(cfg, panel)
    long_rows = [
        {"date": date, "method": m, "return": run.results[m].returns[i]}
        for m in run.methods
        for i, date in enumerate(run.dates)
    ]
    tables = {
        "report.csv": (REPORT_COLUMNS, run.report_rows()),
        "returns_long.csv": (["date", "method", "return"], long_rows),
    }
    for j, m in enumerate(run.methods):
        rows = [dict(zip(["date", *run.asset_ids], [date, *w])) for date, w in zip(run.dates, run.weights[m])]
        tables[f"weights_{j:02d}.csv"] = (["date", *run.asset_ids], rows)
    emit_report(cfg.out, tables)
    return {"methods": {f"weights_{j:02d}.csv": m for j, m in enumerate(run.methods)}, "annualized": cfg.backtest.annualize}


def cmd_study(args, cfg):
    res = run_synthetic_study(cfg)
    tables = {}
    long_rows = []
    for arm, rows in res.rows.items():
        tables[f"metrics_{arm}.csv"] = (METRIC_COLUMNS, rows)
        tables[f"summary_{arm}.csv"] = (SUMMARY_COLUMNS, res.summary[arm])
        for r in rows:
            for method, key in (("diff", "diff_value"), ("emp", "emp_value")):
                long_rows.append(
                    {"arm": arm, "N": r["N"], "seed": r["seed"], "metric": r["metric"], "method": method, "value": r[key]}
                )
    tables["metrics_long.csv"] = (["arm", "N", "seed", "metric", "method", "value"], long_rows)
    emit_report(cfg.out, tables)
    return {"seeds": {"base": cfg.seed, "spec": cfg.study.spec_seed}}


def cmd_report(args, cfg):
    if not os.path.isdir(cfg.out) or not os.listdir(cfg.out):
        raise DataError(f"nothing to report in {cfg.out}")
    return {}


COMMANDS = {
    "simulate": cmd_simulate,
    "train": cmd_train,
    "sample": cmd_sample,
    "recover-subspace": cmd_recover,
    "portfolio": cmd_portfolio,
    "report": cmd_report,
    "study": cmd_study,
}


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=default, help="base random seed")
    parser.add_argument("--out", default=default, help="output directory")
    parser.add_argument("--config", default=default, help="JSON config file")
    parser.add_argument("--threads", type=int, default=default, help="worker threads")
    parser.add_argument(
        "--print-config", action="store_true", default=default if suppress else False,
        help="print the effective configuration and exit",
    )


def build_parser():
    parser = argparse.ArgumentParser(prog="diffusion-factor", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        return p

    p = add("simulate", "draw a synthetic factor-model panel")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--spec-seed", type=int)
    p = add("train", "fit the score network to a return CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int)
    p = add("sample", "generate returns from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--mode", choices=["euler_maruyama", "ddpm_footnote"])
    p = add("recover-subspace", "top-k eigenvalues and eigenvectors of a panel")
    p.add_argument("--data", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--spec", help="ground-truth spec.json for error metrics")
    p = add("portfolio", "rolling-window portfolio backtest")
    p.add_argument("--data")
    p.add_argument("--market-cap")
    add("report", "rebuild the manifest of an output directory")
    add("study", "synthetic Diff vs Emp study")
    return parser


def _exit_code(exc):
    if isinstance(exc, (DataError, InsufficientDataError, AlignmentError, DegenerateInputError, OSError)):
        return EXIT_DATA
    if isinstance(exc, (NumericalAbort, ArithmeticError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ConfigError, InfeasibleError, UnsupportedLawError, InvalidInputError)):
        return EXIT_CONFIG
    raise exc


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    try:
        overrides = {"seed": args.seed, "out": args.out, "threads": args.threads}
        cfg = load_config(args.config, overrides)
        if args.print_config:
            print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command is None:
            parser.print_usage(sys.stderr)
            return EXIT_CONFIG
        try:
            os.makedirs(cfg.out, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {cfg.out}: {exc}") from None
        extra = COMMANDS[args.command](args, cfg) or {}
        write_manifest(cfg.out, cfg, extra.pop("seeds", {"base": cfg.seed}), started, {"command": args.command, **extra})
    except Exception as exc:  # mapped to exit codes below
        code = _exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
