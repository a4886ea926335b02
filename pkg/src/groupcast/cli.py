"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure. On failure a JSON error object is printed to stderr and, when an
output directory was given, written to ``error.json`` there.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from .config import load_config, parse_config
from .errors import ConfigError, DataError, GroupcastError
from .evaluation import TransformPolicy
from .diagnostics import SearchConfig

__all__ = ["main", "build_parser", "demo_config_path", "demo_data_path"]


def demo_data_path() -> Path:
    return Path(str(resources.files("groupcast").joinpath("data/demo_sales.csv")))


def demo_config_path() -> Path:
    return Path(str(resources.files("groupcast").joinpath("data/demo_config.json")))


def _methods(text):
    return [m for m in (x.strip() for x in text.split(",")) if m]


def _common(p, data_required=False):
    p.add_argument("--config", help="JSON job configuration (default: bundled demo config)")
    p.add_argument("--data", required=data_required, help="sales CSV (default: bundled demo data)")
    p.add_argument("--out-dir", default=None, help="directory for output files")
    p.add_argument("--seed", type=int, default=None, help="override the configured seed")
    p.add_argument("--methods", type=_methods, default=None,
                   help="comma-separated reconciliation methods, e.g. baseline,bottom-up,wls")
    p.add_argument("--shift", type=float, default=None, help="constant added before the transform")
    p.add_argument("--jobs", type=int, default=None, help="number of nodes fitted concurrently")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="groupcast", description="Grouped sales forecasting with reconciliation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest-check", help="parse and aggregate a sales file, print a summary")
    _common(p)

    p = sub.add_parser("fit", help="select and fit a SARIMA model for one series")
    p.add_argument("--data", required=True,
                   help="CSV with one numeric column, or a sales CSV together with --config and --node")
    p.add_argument("--config", default=None)
    p.add_argument("--node", default=None, help="node label when fitting from sales data (default: total)")
    p.add_argument("--column", default=None, help="value column of a single-series CSV")
    p.add_argument("--season", type=int, default=None)
    p.add_argument("--h", type=int, default=None, help="forecast horizon")
    p.add_argument("--transform", default=None, choices=["none", "log", "auto", "auto-lambda"])
    p.add_argument("--shift", type=float, default=None)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("forecast", help="fit every node and write reconciled forecasts")
    _common(p)

    p = sub.add_parser("reconcile", help="reconcile base forecasts from a forecasts.csv")
    p.add_argument("--config", default=None)
    p.add_argument("--base", required=True, help="forecasts.csv; its baseline rows are the base forecasts")
    p.add_argument("--residuals", default=None, help="residuals.csv (needed for wls and mint methods)")
    p.add_argument("--methods", type=_methods, default=None)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("evaluate", help="hold out the last h weeks and score every method")
    _common(p)

    p = sub.add_parser("simulate", help="write synthetic data for demos and benchmarks")
    p.add_argument("--kind", choices=["demo", "benchmark"], default="demo")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--weeks", type=int, default=110, help="demo length in weeks")
    p.add_argument("--out-dir", required=True)
    return parser


def _load(args):
    config = load_config(args.config) if args.config else load_config(demo_config_path())
    return config.with_overrides(
        methods=getattr(args, "methods", None),
        shift=getattr(args, "shift", None),
        seed=getattr(args, "seed", None),
        jobs=getattr(args, "jobs", None),
    )


def _data(args):
    path = Path(args.data) if args.data else demo_data_path()
    if not path.exists():
        raise DataError(f"data file not found: {path}")
    return path


def _print_json(obj):
    from .pipeline import _clean

    print(json.dumps(_clean(obj), indent=2))


def cmd_ingest_check(args):
    from .pipeline import prepare

    config = _load(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        data = prepare(config, _data(args))
    cal = data.calendar
    summary = {
        "records": data.n_records,
        "first_week": cal.week_date(0).isoformat(),
        "last_week": cal.week_date(len(cal) - 1).isoformat(),
        "weeks": len(cal),
        "bottom_series": data.structure.n_bottom,
        "nodes": data.structure.n_nodes,
        "total_quantity": float(data.Y[0].sum()),
        "empty_weeks": int(np.sum(data.Y[0] == 0)),
        "warnings": [str(w.message) for w in caught],
    }
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "aggregated.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", *(cal.week_date(i).isoformat() for i in range(len(cal)))])
            for key, row in zip(data.structure.nodes, data.Y):
                w.writerow([key.label(), *(format(x, ".12g") for x in row)])
    _print_json(summary)
    return 0


def _single_series(path, column):
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{Path(path).name}: no data rows")
    cols = list(rows[0])
    if column is None:
        numeric = []
        for c in cols:
            try:
                float(rows[0][c])
                numeric.append(c)
            except (TypeError, ValueError):
                pass
        if len(numeric) != 1:
            raise DataError(f"pick the value column with --column (numeric columns: {numeric})")
        column = numeric[0]
    if column not in cols:
        raise DataError(f"column {column!r} not in {cols}")
    try:
        return np.array([float(r[column]) for r in rows])
    except ValueError as exc:
        raise DataError(str(exc)) from None


def cmd_fit(args):
    from .pipeline import fit_single, prepare

    if args.config:
        config = load_config(args.config)
        data = prepare(config, _data(args))
        node = args.node or "total"
        labels = [k.label() for k in data.structure.nodes]
        if node not in labels:
            raise DataError(f"node {node!r} not found; available: {labels}")
        y = data.Y[labels.index(node)]
        s = args.season or config.season
        h = args.h or config.h
        base = config.policy_for(node)
        search = config.search
    else:
        node = args.node or "series"
        y = _single_series(_data(args), args.column)
        s = args.season or 1
        h = args.h or 1
        base = TransformPolicy()
        search = SearchConfig()
    policy = TransformPolicy(args.transform or base.kind, base.shift if args.shift is None else args.shift)
    f = fit_single(y, s, h, policy, search, node, args.out_dir)
    _print_json({"node": node, **f.to_dict(), "forecast": list(f.forecast)})
    return 0


def cmd_forecast(args):
    from .pipeline import run_forecast

    config = _load(args)
    bundle = run_forecast(config, _data(args), args.out_dir or ".")
    _print_json({"written": sorted(str(p) for p in bundle.files.values())})
    return 0


def cmd_reconcile(args):
    from .pipeline import run_reconcile

    config = load_config(args.config) if args.config else load_config(demo_config_path())
    config = config.with_overrides(methods=args.methods)
    for p in (args.base, args.residuals):
        if p is not None and not Path(p).exists():
            raise DataError(f"file not found: {p}")
    bundle = run_reconcile(config, args.base, args.residuals, args.out_dir or ".")
    _print_json({"written": sorted(str(p) for p in bundle.files.values())})
    return 0


def cmd_evaluate(args):
    from .pipeline import run_evaluate

    config = _load(args)
    bundle = run_evaluate(config, _data(args), args.out_dir or ".")
    head = [{"node": r.node, "method": r.method, "mase": r.mase, "rmse": r.rmse}
            for r in bundle.report.headline()]
    _print_json({"written": sorted(str(p) for p in bundle.files.values()), "headline": head})
    return 0


def cmd_simulate(args):
    from .ingest import write_sales_csv
    from .synthetic import correlated_bottom_benchmark, demo_sales, demo_schema

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "demo":
        seed = 2016 if args.seed is None else args.seed
        write_sales_csv(out / "sales.csv", demo_sales(seed=seed, weeks=args.weeks), demo_schema())
        cfg = json.loads(demo_config_path().read_text(encoding="utf-8"))
        cfg["seed"] = seed
        cfg["calendar"]["weeks"] = args.weeks
        cfg["split"] = {"h": cfg["split"]["h"]}
        parse_config(cfg)
        (out / "config.json").write_text(json.dumps(cfg, indent=2) + "\n", encoding="utf-8")
        written = [out / "sales.csv", out / "config.json"]
    else:
        seed = 0 if args.seed is None else args.seed
        b = correlated_bottom_benchmark(seed)
        with (out / "benchmark.csv").open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["node", *range(b.Y.shape[1])])
            for key, row in zip(b.structure.nodes, b.Y):
                w.writerow([key.label(), *(format(x, ".12g") for x in row)])
        (out / "structure.json").write_text(
            json.dumps({"structure": b.structure.to_dict(), "season": b.s, "h": b.h, "seed": seed}, indent=2) + "\n",
            encoding="utf-8")
        written = [out / "benchmark.csv", out / "structure.json"]
    _print_json({"written": [str(p) for p in written]})
    return 0


COMMANDS = {
    "ingest-check": cmd_ingest_check,
    "fit": cmd_fit,
    "forecast": cmd_forecast,
    "reconcile": cmd_reconcile,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
}


def _fail(exc: GroupcastError, out_dir):
    err = exc.to_dict()
    text = json.dumps(err, indent=2)
    print(text, file=sys.stderr)
    if out_dir:
        try:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "error.json").write_text(text + "\n", encoding="utf-8")
        except OSError:
            pass
    return exc.exit_code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_dir = getattr(args, "out_dir", None)
    try:
        return COMMANDS[args.command](args)
    except GroupcastError as exc:
        return _fail(exc, out_dir)
    except FileNotFoundError as exc:
        return _fail(DataError(str(exc)), out_dir)
    except ValueError as exc:
        return _fail(ConfigError(str(exc)), out_dir)


if __name__ == "__main__":
    sys.exit(main())
