"""Accuracy metrics and the hold-out evaluation harness.

The harness fits one automatically selected SARIMA model per node, forecasts
``h`` steps, maps forecasts back to original units, reconciles them with each
requested method and scores every (node, method) pair on the held-out weeks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import SearchConfig, auto_select, diagnose
from .errors import (
    DataError,
    NoFeasibleModel,
    NumericalError,
    SeriesTooShort,
    ZeroDenominator,
)
from .grouping import GroupStructure, SummingMatrix, aggregate_matrix, build_summing_matrix
from .reconciliation import (
    BaseForecasts,
    ResidualMatrix,
    canonical_method,
    reconcile_method,
)
from .sarima import SarimaOrder, check_feasibility, forecast, one_step_fitted
from .series import TimeSeries, as_series, box_cox, inv_box_cox, select_lambda

__all__ = [
    "mase",
    "rmse",
    "seasonal_naive",
    "TransformPolicy",
    "NodeFit",
    "ReportRow",
    "EvaluationReport",
    "ForecastRun",
    "fit_node",
    "forecast_nodes",
    "reconcile_all",
    "evaluate_series",
    "evaluate_job",
    "check_naive_feasible",
]

TRANSFORMS = ("none", "log", "auto")


def _naive_scale(insample, s):
    y = as_series(insample).values
    lag = s if s > 1 else 1
    if y.size <= lag:
        raise SeriesTooShort(f"scaling needs more than {lag} in-sample points, got {y.size}")
    return float(np.mean(np.abs(y[lag:] - y[:-lag])))


def mase(actual, forecast, insample, s: int = 1) -> float:
    """Mean absolute error scaled by the in-sample (seasonal) naive error.

    The scale is the mean of ``|y_t - y_{t-s}|`` over the training series
    (``s = 1`` for non-seasonal data).
    """
    a = np.asarray(actual, dtype=float).reshape(-1)
    f = np.asarray(forecast, dtype=float).reshape(-1)
    if a.size != f.size or a.size < 1:
        raise ValueError("actual and forecast must have the same positive length")
    scale = _naive_scale(insample, s)
    if not scale > 0:
        raise ZeroDenominator("in-sample naive error is zero; the training series is (seasonally) constant")
    return float(np.mean(np.abs(a - f)) / scale)


def rmse(actual, forecast) -> float:
    a = np.asarray(actual, dtype=float).reshape(-1)
    f = np.asarray(forecast, dtype=float).reshape(-1)
    if a.size != f.size or a.size < 1:
        raise ValueError("actual and forecast must have the same positive length")
    return float(np.sqrt(np.mean((a - f) ** 2)))


def seasonal_naive(y, s: int, h: int) -> np.ndarray:
    """Repeat the last season (the last value when fewer than ``s`` points)."""
    v = as_series(y).values
    if s > 1 and v.size >= s:
        last = v[v.size - s:]
        return np.array([last[i % s] for i in range(h)])
    return np.full(h, v[-1])


@dataclass(frozen=True)
class TransformPolicy:
    """Variance-stabilising transform applied before model search.

    ``kind`` is ``none``, ``log`` or ``auto`` (Box-Cox power chosen per
    series); ``shift`` is added first so that zero sales can be logged.
    """

    kind: str = "none"
    shift: float = 0.0

    def __post_init__(self):
        k = {"auto-lambda": "auto", "boxcox": "auto"}.get(self.kind, self.kind)
        if k not in TRANSFORMS:
            raise ValueError(f"transform must be one of {TRANSFORMS}, got {self.kind!r}")
        object.__setattr__(self, "kind", k)

    def forward(self, y: TimeSeries):
        """Return ``(z, lam)``; ``lam`` is None for no transform."""
        if self.kind == "none":
            return y, None
        shifted = y.replace(y.values + self.shift)
        lam = 0.0 if self.kind == "log" else float(select_lambda(shifted).lam)
        return box_cox(shifted, lam), lam

    def inverse(self, z, lam):
        z = np.asarray(z, dtype=float)
        if lam is None:
            return z
        return inv_box_cox(z, lam).values - self.shift


@dataclass(frozen=True)
class NodeFit:
    """Everything the pipeline keeps about one node's model."""

    forecast: np.ndarray
    residuals: np.ndarray
    order: SarimaOrder | None
    lam: float | None
    transform: str
    fallback: bool = False
    note: str = ""
    criteria: dict | None = None
    ljung_box: dict | None = None
    differencing: tuple | None = None
    converged: bool | None = None
    coefficients: dict | None = None
    model_residuals: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "order": None if self.order is None else str(self.order),
            "order_tuple": None if self.order is None else list(self.order.as_tuple()),
            "transform": self.transform,
            "lambda": self.lam,
            "differencing": None if self.differencing is None else list(self.differencing),
            "criteria": self.criteria,
            "ljung_box": self.ljung_box,
            "converged": self.converged,
            "coefficients": self.coefficients,
            "fallback": self.fallback,
            "note": self.note,
        }


def _naive_fit(v, s, h, transform, note):
    lag = s if (s > 1 and v.size > s) else 1
    resid = v[lag:] - v[:-lag] if v.size > lag else np.zeros(0)
    return NodeFit(
        forecast=seasonal_naive(v, s, h),
        residuals=resid,
        order=SarimaOrder(0, 0, 0, 0, 1, 0, s) if lag > 1 else SarimaOrder(0, 1, 0, 0, 0, 0, 1),
        lam=None,
        transform=transform,
        fallback=True,
        note=note,
        model_residuals=resid,
    )


def fit_node(y, s: int, h: int, policy: TransformPolicy | None = None,
             search: SearchConfig | None = None) -> NodeFit:
    """Transform, search, forecast and back-transform a single series.

    Any numerical or data failure downgrades the node to a seasonal-naive
    forecast with ``fallback=True`` and the reason in ``note``.
    """
    policy = policy or TransformPolicy()
    ts = as_series(y, s)
    v = ts.values
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            try:
                z, lam = policy.forward(ts)
                transform = policy.kind
            except DataError:
                z, lam, transform = ts, None, "none"
            res = auto_select(z, s, search)
            m = res.best
            fz = forecast(m, z, h)
            fc = policy.inverse(fz, lam) if transform != "none" else fz
            fitted_z = one_step_fitted(m, z)
            fitted = policy.inverse(fitted_z, lam) if transform != "none" else fitted_z
            lb = diagnose(m, s)
        if not np.all(np.isfinite(fc)):
            raise NumericalError("non-finite forecast")
        crit = res.best_criteria
        return NodeFit(
            forecast=np.asarray(fc, dtype=float),
            residuals=v[v.size - fitted.size:] - fitted,
            order=m.order,
            lam=lam,
            transform=transform,
            criteria={"aic": crit.aic, "aicc": crit.aicc, "bic": crit.bic, "k": crit.k, "n": crit.n,
                      "log_likelihood": m.log_likelihood, "selected_by": res.criterion},
            ljung_box=None if lb is None else {"q_star": lb.q_star, "lags": lb.lags_tested,
                                               "dof": lb.dof, "p_value": lb.p_value},
            differencing=tuple(res.differencing),
            converged=m.converged,
            coefficients=m.coeffs.to_dict(),
            model_residuals=np.asarray(m.residuals.values),
        )
    except (NumericalError, DataError) as exc:
        transform = policy.kind
        return _naive_fit(v, s, h, transform, f"seasonal-naive fallback: {type(exc).__name__}: {exc}")


def _fit_node_task(args):
    return fit_node(*args)


def check_naive_feasible(T_train: int, s: int):
    """Raise NoFeasibleModel when not even the seasonal-naive model fits the window."""
    if T_train < 2:
        raise NoFeasibleModel(f"training window of {T_train} points leaves nothing to fit")
    if s > 1:
        rep = check_feasibility(SarimaOrder(0, 0, 0, 0, 1, 0, s), T_train)
        if not rep.feasible_for_forecast:
            raise NoFeasibleModel(
                f"training window T={T_train} violates (D+P)s+p+d <= T for the seasonal-naive "
                f"fallback (0,0,0)(0,1,0)^{s}, which needs T >= {rep.required_forecast_length}"
            )


@dataclass(frozen=True)
class ForecastRun:
    """Base and reconciled forecasts for every node."""

    structure: GroupStructure
    S: SummingMatrix
    fits: tuple
    base: BaseForecasts
    residuals: ResidualMatrix
    reconciled: dict


def forecast_nodes(Y, structure: GroupStructure, s: int, h: int,
                   policy: TransformPolicy | None = None, search: SearchConfig | None = None,
                   jobs: int = 1) -> tuple:
    """Fit every row of the node-by-period matrix ``Y``; order is preserved.

    ``policy`` is one :class:`TransformPolicy` for all nodes or a sequence
    with one per row.
    """
    Y = np.asarray(Y, dtype=float)
    check_naive_feasible(Y.shape[1], s)
    policies = list(policy) if isinstance(policy, (list, tuple)) else [policy] * Y.shape[0]
    if len(policies) != Y.shape[0]:
        raise ValueError(f"{len(policies)} transform policies for {Y.shape[0]} nodes")
    tasks = [(Y[i], s, h, policies[i], search) for i in range(Y.shape[0])]
    if jobs and jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return tuple(ex.map(_fit_node_task, tasks))
    return tuple(_fit_node_task(t) for t in tasks)


def reconcile_all(fits, structure: GroupStructure, methods, S: SummingMatrix | None = None) -> ForecastRun:
    S = S or build_summing_matrix(structure)
    base = BaseForecasts(np.vstack([f.forecast for f in fits]), structure.nodes)
    E = ResidualMatrix.from_columns([f.residuals for f in fits])
    out = {}
    for m in dict.fromkeys(canonical_method(x) for x in methods):
        out[m] = reconcile_method(base, S, m, E)
    return ForecastRun(structure, S, tuple(fits), base, E, out)


@dataclass(frozen=True)
class ReportRow:
    node: str
    level: int
    method: str
    mase: float
    rmse: float
    h: int
    note: str = ""


@dataclass
class EvaluationReport:
    rows: list
    metadata: dict = field(default_factory=dict)
    headline_nodes: tuple = ()

    def __post_init__(self):
        seen = set()
        for r in self.rows:
            if (r.node, r.method) in seen:
                raise ValueError(f"duplicate report row for ({r.node}, {r.method})")
            seen.add((r.node, r.method))

    def headline(self):
        """Rows of the most aggregated nodes (root first)."""
        keep = set(self.headline_nodes)
        return [r for r in self.rows if r.node in keep]

    def lookup(self, node, method) -> ReportRow:
        for r in self.rows:
            if r.node == node and r.method == method:
                return r
        raise KeyError((node, method))

    def table(self, metric="rmse", nodes=None) -> dict:
        """``{node: {method: value}}`` for quick comparisons."""
        out = {}
        for r in self.rows:
            if nodes is None or r.node in nodes:
                out.setdefault(r.node, {})[r.method] = getattr(r, metric)
        return out


def _score(actual, fc, insample, s):
    note = ""
    try:
        m = mase(actual, fc, insample, s if len(insample) > s else 1)
    except ZeroDenominator:
        m, note = math.nan, "zero MASE scale"
    return m, rmse(actual, fc), note


def evaluate_series(Y, structure: GroupStructure, h: int, s: int, methods,
                    policy: TransformPolicy | None = None, search: SearchConfig | None = None,
                    jobs: int = 1, metadata: dict | None = None, n_headline: int = 3):
    """Hold out the last ``h`` columns of ``Y`` and score every method.

    Returns ``(report, run)`` where ``run`` is the :class:`ForecastRun`
    trained on the first ``T - h`` columns.
    """
    Y = np.asarray(Y, dtype=float)
    if not 1 <= h < Y.shape[1]:
        raise ValueError(f"horizon h={h} must lie in [1, T) for T={Y.shape[1]}")
    train, test = Y[:, :-h], Y[:, -h:]
    fits = forecast_nodes(train, structure, s, h, policy, search, jobs)
    run = reconcile_all(fits, structure, methods)
    rows = []
    for i, key in enumerate(structure.nodes):
        level = structure.node_level(key)
        flag = fits[i].note if fits[i].fallback else ""
        for method, rec in run.reconciled.items():
            m, r, note = _score(test[i], rec.matrix[i], train[i], s)
            if method != "baseline" and np.any(rec.matrix[i] < 0):
                note = "; ".join(x for x in (note, "negative forecast") if x)
            rows.append(ReportRow(key.label(), level, method, m, r, h, "; ".join(x for x in (flag, note) if x)))
    meta = dict(metadata or {})
    meta.update({"train_length": train.shape[1], "h": h, "season": s, "nodes": structure.n_nodes})
    head = tuple(k.label() for k in structure.nodes[:n_headline])
    return EvaluationReport(rows, meta, head), run


def evaluate_job(structure: GroupStructure, records, calendar, h: int, methods, s: int = 52,
                 policy: TransformPolicy | None = None, search: SearchConfig | None = None,
                 train_length: int | None = None, jobs: int = 1):
    """Aggregate raw records, then run :func:`evaluate_series`.

    The evaluation window is the first ``train_length + h`` calendar periods
    (all of them by default, holding out the last ``h``).
    """
    Y = aggregate_matrix(records, structure, calendar)
    if train_length is not None:
        if train_length + h > Y.shape[1]:
            raise DataError(f"train_length + h = {train_length + h} exceeds the {Y.shape[1]} available periods")
        Y = Y[:, :train_length + h]
    check_naive_feasible(Y.shape[1] - h, s)
    meta = {}
    start = getattr(calendar, "week_date", None)
    if start is not None:
        T = Y.shape[1]
        meta = {
            "train_start": start(0).isoformat(),
            "train_end": start(T - h - 1).isoformat(),
            "test_start": start(T - h).isoformat(),
            "test_end": start(T - 1).isoformat(),
        }
    return evaluate_series(Y, structure, h, s, methods, policy, search, jobs, meta)
