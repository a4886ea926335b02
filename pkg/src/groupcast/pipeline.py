"""End-to-end runs: ingest, aggregate, fit, forecast, reconcile, evaluate, write.

Every writer produces byte-identical files for identical inputs: rows follow
structure order, floats are formatted with a fixed number of significant
digits and JSON keys keep insertion order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import JobConfig
from .diagnostics import qq_points
from .errors import DataError, NoFeasibleModel, SeriesTooShort
from .evaluation import (
    EvaluationReport,
    ForecastRun,
    NodeFit,
    check_naive_feasible,
    evaluate_series,
    fit_node,
    forecast_nodes,
    reconcile_all,
)
from .grouping import GroupStructure, WeekCalendar, aggregate_matrix, build_structure, build_summing_matrix
from .ingest import parse_sales_csv, records_for_aggregation
from .reconciliation import BaseForecasts, ResidualMatrix, reconcile_method
from .series import acf, pacf

__all__ = [
    "OutputBundle",
    "PreparedData",
    "prepare",
    "run",
    "run_evaluate",
    "run_forecast",
    "run_reconcile",
    "fit_single",
    "read_forecasts_csv",
    "read_residuals_csv",
]

DIGITS = 12


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, f".{DIGITS}g")


def _clean(obj):
    """JSON-safe copy: NaN and infinities become null, numpy scalars plain floats."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def _write_json(path, obj):
    text = json.dumps(_clean(obj), indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


@dataclass(frozen=True)
class PreparedData:
    """Aggregated node-by-week matrix and the objects that describe it."""

    structure: GroupStructure
    calendar: WeekCalendar
    Y: np.ndarray
    n_records: int
    data_sha256: str


@dataclass
class OutputBundle:
    """What a run produced; ``files`` maps output names to written paths."""

    files: dict = field(default_factory=dict)
    report: EvaluationReport | None = None
    run: ForecastRun | None = None
    metadata: dict = field(default_factory=dict)


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def prepare(config: JobConfig, data_path) -> PreparedData:
    """Parse the sales file, lay out the weekly calendar and aggregate."""
    records = parse_sales_csv(data_path, config.schema)
    dates = [r.date for r in records]
    if config.calendar_start is None:
        cal = WeekCalendar.spanning(dates, config.week_start)
    else:
        first = WeekCalendar(config.calendar_start, 1, config.week_start)
        cal = WeekCalendar(first.start, first.week_of(max(dates)) + 1, config.week_start)
    if config.weeks is not None:
        cal = WeekCalendar(cal.start, config.weeks, config.week_start)
    # sales outside the configured window are dropped, not an error
    inside = [r for r in records if 0 <= cal.week_of(r.date) < len(cal)]
    if not inside:
        raise DataError("no sales fall inside the configured calendar")
    if len(inside) < len(records):
        warnings.warn(f"{len(records) - len(inside)} record(s) outside the calendar were dropped", stacklevel=2)
    structure = build_structure(config.schema, config.levels, [r.key for r in inside])
    Y = aggregate_matrix(records_for_aggregation(inside), structure, cal)
    return PreparedData(structure, cal, Y, len(inside), _sha256(data_path))


def _train_length(config: JobConfig, cal: WeekCalendar, holdout: bool) -> int:
    T = len(cal)
    if config.train_length is not None:
        n = config.train_length
    elif config.train_end is not None:
        n = cal.week_of(config.train_end) + 1
    else:
        n = T - config.h if holdout else T
    if n < 1:
        raise DataError(f"training window is empty (train_end before {cal.start})")
    if n > T or (holdout and n + config.h > T):
        need = n + config.h if holdout else n
        raise DataError(f"split needs {need} weeks but the calendar has {T}")
    return n


def _labels(structure: GroupStructure):
    return [k.label() for k in structure.nodes]


def _node_columns(structure: GroupStructure):
    return list(structure.schema.names)


def _key_cells(key, names):
    b = key.as_dict()
    return [b.get(n, "") for n in names]


def write_forecasts(path, run: ForecastRun, horizon_labels=None):
    """One row per (method, node): key columns, forecast steps and a negativity flag."""
    st = run.structure
    names = _node_columns(st)
    h = run.base.horizon
    labels = horizon_labels or [f"h{i + 1}" for i in range(h)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["method", "node", "level", *names, *labels, "negative"])
        for method, rec in run.reconciled.items():
            for i, key in enumerate(st.nodes):
                row = rec.matrix[i]
                w.writerow([method, key.label(), st.node_level(key), *_key_cells(key, names),
                            *(_fmt(x) for x in row), int(np.any(row < 0))])


def write_residuals(path, run: ForecastRun):
    """In-sample residual matrix used for the weights, one column per node."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow([k.label() for k in run.structure.nodes])
        for r in run.residuals.matrix:
            w.writerow([_fmt(x) for x in r])


def write_report(path, report: EvaluationReport):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["node", "level", "method", "mase", "rmse", "h", "note"])
        for r in report.rows:
            w.writerow([r.node, r.level, r.method, _fmt(r.mase), _fmt(r.rmse), r.h, r.note])


def write_summary(path, report: EvaluationReport):
    """Headline table: one row per method, MASE and RMSE for each headline node."""
    heads = list(report.headline_nodes)
    methods = list(dict.fromkeys(r.method for r in report.rows))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = _writer(fh)
        w.writerow(["method", *(f"{n} {m}" for n in heads for m in ("MASE", "RMSE"))])
        for method in methods:
            cells = []
            for n in heads:
                r = report.lookup(n, method)
                cells += [_fmt(r.mase), _fmt(r.rmse)]
            w.writerow([method, *cells])


def _residual_lags(n, s):
    return max(1, min(n // 2, 2 * s if s > 1 else 20, n - 1))


def write_qq_acf(qq_path, acf_path, labels, fits, s: int):
    """Plot data for the model residuals of every node, in ``labels`` order."""
    with Path(qq_path).open("w", newline="", encoding="utf-8") as fq, \
            Path(acf_path).open("w", newline="", encoding="utf-8") as fa:
        wq, wa = _writer(fq), _writer(fa)
        wq.writerow(["node", "theoretical", "sample"])
        wa.writerow(["node", "lag", "acf", "pacf", "bound"])
        for label, f in zip(labels, fits):
            e = np.asarray(f.model_residuals if f.model_residuals is not None else f.residuals, dtype=float)
            e = e[np.isfinite(e)]
            try:
                for a, b in qq_points(e):
                    wq.writerow([label, _fmt(a), _fmt(b)])
            except SeriesTooShort:
                pass
            if e.size < 4:
                continue
            L = _residual_lags(e.size, s)
            r, p = acf(e, L), pacf(e, L)
            bound = _fmt(1.96 / math.sqrt(e.size))
            for lag in range(1, L + 1):
                wa.writerow([label, lag, _fmt(r[lag]), _fmt(p[lag]), bound])


def _node_diagnostics(structure, fits):
    out = []
    for key, f in zip(structure.nodes, fits):
        d = {"node": key.label(), "level": structure.node_level(key), "key": key.as_dict()}
        d.update(f.to_dict())
        out.append(d)
    return out


def write_diagnostics(path, structure, fits, metadata):
    _write_json(path, {"metadata": metadata, "nodes": _node_diagnostics(structure, fits)})


def _metadata(config: JobConfig, data: PreparedData, n_train: int, command: str) -> dict:
    cal = data.calendar
    h = config.h
    meta = {
        "command": command,
        "data_sha256": data.data_sha256,
        "records": data.n_records,
        "weeks": len(cal),
        "week_start": cal.week_start,
        "train_start": cal.week_date(0).isoformat(),
        "train_end": cal.week_date(n_train - 1).isoformat(),
        "train_length": n_train,
        "h": h,
        "forecast_weeks": [cal.week_date(n_train + i).isoformat() for i in range(h)],
        "season": config.season,
        "methods": list(config.methods),
        "seed": config.seed,
        "nodes": data.structure.n_nodes,
        "bottom_series": data.structure.n_bottom,
        "structure": data.structure.to_dict(),
        "config": config.to_dict(),
    }
    meta["config"].pop("jobs")
    return meta


def _ensure_dir(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_evaluate(config: JobConfig, data_path, out_dir) -> OutputBundle:
    """Hold out ``h`` weeks after the training window and score every method.

    Writes forecasts.csv, report.csv, summary.csv, diagnostics.json,
    residuals.csv, qq.csv and acf.csv into ``out_dir``.
    """
    data = prepare(config, data_path)
    n_train = _train_length(config, data.calendar, holdout=True)
    check_naive_feasible(n_train, config.season)
    Y = data.Y[:, :n_train + config.h]
    meta = _metadata(config, data, n_train, "evaluate")
    report, run = evaluate_series(Y, data.structure, config.h, config.season, config.methods,
                                  config.policies(data.structure), config.search, config.jobs, meta)
    out = _ensure_dir(out_dir)
    files = {name: out / name for name in
             ("forecasts.csv", "report.csv", "summary.csv", "diagnostics.json", "residuals.csv", "qq.csv", "acf.csv")}
    write_forecasts(files["forecasts.csv"], run)
    write_report(files["report.csv"], report)
    write_summary(files["summary.csv"], report)
    write_diagnostics(files["diagnostics.json"], data.structure, run.fits, meta)
    write_residuals(files["residuals.csv"], run)
    write_qq_acf(files["qq.csv"], files["acf.csv"], _labels(data.structure), run.fits, config.season)
    return OutputBundle(files, report, run, meta)


run = run_evaluate


def run_forecast(config: JobConfig, data_path, out_dir) -> OutputBundle:
    """Fit on the training window (all weeks by default) and forecast ``h`` weeks past it."""
    data = prepare(config, data_path)
    n_train = _train_length(config, data.calendar, holdout=False)
    check_naive_feasible(n_train, config.season)
    meta = _metadata(config, data, n_train, "forecast")
    cal = data.calendar
    meta["forecast_weeks"] = [cal.week_date(n_train + i).isoformat() for i in range(config.h)]
    fits = forecast_nodes(data.Y[:, :n_train], data.structure, config.season, config.h,
                          config.policies(data.structure), config.search, config.jobs)
    run = reconcile_all(fits, data.structure, config.methods)
    out = _ensure_dir(out_dir)
    files = {name: out / name for name in
             ("forecasts.csv", "diagnostics.json", "residuals.csv", "qq.csv", "acf.csv")}
    write_forecasts(files["forecasts.csv"], run)
    write_diagnostics(files["diagnostics.json"], data.structure, fits, meta)
    write_residuals(files["residuals.csv"], run)
    write_qq_acf(files["qq.csv"], files["acf.csv"], _labels(data.structure), fits, config.season)
    return OutputBundle(files, None, run, meta)


def read_forecasts_csv(path, schema, method="baseline"):
    """Read base forecasts back from a forecasts.csv; returns ``(keys, matrix)``.

    Only rows whose ``method`` equals ``method`` are used; a file without a
    method column is taken whole.
    """
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise DataError(f"{Path(path).name}: no forecast rows")
    if "method" in rows[0]:
        rows = [r for r in rows if r["method"] == method]
        if not rows:
            raise DataError(f"{Path(path).name}: no rows with method {method!r}")
    steps = sorted((c for c in rows[0] if c and c[0] == "h" and c[1:].isdigit()), key=lambda c: int(c[1:]))
    if not steps:
        raise DataError(f"{Path(path).name}: no h1..hH forecast columns")
    keys, M = [], []
    for r in rows:
        keys.append(schema.key({n: r[n] for n in schema.names if r.get(n, "")}))
        try:
            M.append([float(r[c]) for c in steps])
        except ValueError as exc:
            raise DataError(f"{Path(path).name}: {exc}") from None
    return keys, np.array(M)


def read_residuals_csv(path):
    """``(labels, T x n matrix)`` from a residuals.csv."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise DataError(f"{Path(path).name}: empty residual file")
        E = np.array([[float(x) for x in row] for row in reader if row], dtype=float)
    return header, E.reshape(-1, len(header))


def run_reconcile(config: JobConfig, base_path, residuals_path, out_dir) -> OutputBundle:
    """Reconcile precomputed base forecasts with every configured method."""
    keys, M = read_forecasts_csv(base_path, config.schema)
    full = frozenset(config.schema.names)
    bottom = [k for k in keys if k.attributes() == full]
    structure = build_structure(config.schema, config.levels, bottom)
    pos = {k: i for i, k in enumerate(keys)}
    missing = [k.label() for k in structure.nodes if k not in pos]
    if missing:
        raise DataError(f"base forecasts missing for node(s) {missing}")
    base = BaseForecasts(M[[pos[k] for k in structure.nodes]], structure.nodes)
    E = None
    if residuals_path is not None:
        labels, raw = read_residuals_csv(residuals_path)
        col = {lb: j for j, lb in enumerate(labels)}
        absent = [k.label() for k in structure.nodes if k.label() not in col]
        if absent:
            raise DataError(f"residuals missing for node(s) {absent}")
        E = ResidualMatrix.from_columns([raw[:, col[k.label()]] for k in structure.nodes])
    S = build_summing_matrix(structure)
    rec = {m: reconcile_method(base, S, m, E) for m in config.methods}
    run = ForecastRun(structure, S, (), base, E, rec)
    out = _ensure_dir(out_dir)
    files = {"forecasts.csv": out / "forecasts.csv"}
    write_forecasts(files["forecasts.csv"], run)
    return OutputBundle(files, None, run, {"methods": list(config.methods)})


def fit_single(y, s: int, h: int, policy=None, search=None, label="series", out_dir=None) -> NodeFit:
    """Box-Jenkins loop on one series; optionally writes its audit files."""
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        raise NoFeasibleModel(f"series of length {y.size} is too short to fit")
    check_naive_feasible(y.size, s)
    f = fit_node(y, s, h, policy, search)
    if out_dir is not None:
        out = _ensure_dir(out_dir)
        d = {"node": label, **f.to_dict(), "forecast": list(f.forecast)}
        _write_json(out / "diagnostics.json", {"metadata": {"command": "fit", "season": s, "h": h,
                                                             "length": int(y.size)}, "nodes": [d]})
        write_qq_acf(out / "qq.csv", out / "acf.csv", [label], [f], s)
    return f
