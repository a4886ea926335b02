"""Grouped sales forecasting: SARIMA base forecasts made coherent by reconciliation."""

from . import kernels
from .config import JobConfig, load_config, parse_config
from .diagnostics import (
    SearchConfig,
    auto_select,
    diagnose,
    information_criteria,
    ljung_box,
    qq_points,
)
from .errors import (
    ConfigError,
    DataError,
    GroupcastError,
    NumericalError,
)
from .evaluation import (
    EvaluationReport,
    TransformPolicy,
    evaluate_job,
    evaluate_series,
    fit_node,
    mase,
    rmse,
    seasonal_naive,
)
from .grouping import (
    AttributeSchema,
    GroupStructure,
    SeriesKey,
    SummingMatrix,
    WeekCalendar,
    aggregate_matrix,
    aggregate_records,
    build_structure,
    build_summing_matrix,
)
from .ingest import SalesRecord, parse_sales_csv
from .reconciliation import (
    METHODS,
    BaseForecasts,
    ResidualMatrix,
    WeightSpec,
    bottom_up,
    estimate_weights,
    reconcile,
    reconcile_method,
)
from .sarima import (
    SarimaCoefficients,
    SarimaOrder,
    check_feasibility,
    expand_ar_recursion,
    fit,
    forecast,
    simulate,
)
from .series import TimeSeries, box_cox, difference, integrate, inv_box_cox, select_lambda

__version__ = "0.1.0"
BACKEND = kernels.BACKEND

__all__ = [
    "BACKEND",
    "JobConfig",
    "load_config",
    "parse_config",
    "SearchConfig",
    "auto_select",
    "diagnose",
    "information_criteria",
    "ljung_box",
    "qq_points",
    "ConfigError",
    "DataError",
    "GroupcastError",
    "NumericalError",
    "EvaluationReport",
    "TransformPolicy",
    "evaluate_job",
    "evaluate_series",
    "fit_node",
    "mase",
    "rmse",
    "seasonal_naive",
    "AttributeSchema",
    "GroupStructure",
    "SeriesKey",
    "SummingMatrix",
    "WeekCalendar",
    "aggregate_matrix",
    "aggregate_records",
    "build_structure",
    "build_summing_matrix",
    "SalesRecord",
    "parse_sales_csv",
    "METHODS",
    "BaseForecasts",
    "ResidualMatrix",
    "WeightSpec",
    "bottom_up",
    "estimate_weights",
    "reconcile",
    "reconcile_method",
    "SarimaCoefficients",
    "SarimaOrder",
    "check_feasibility",
    "expand_ar_recursion",
    "fit",
    "forecast",
    "simulate",
    "TimeSeries",
    "box_cox",
    "difference",
    "integrate",
    "inv_box_cox",
    "select_lambda",
]
