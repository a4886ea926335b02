"""SARIMA orders, feasibility rules, CSS estimation, forecasting and simulation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from . import kernels
from .errors import (
    DataError,
    DegenerateSeries,
    InfeasibleOrder,
    InvalidCoefficients,
    NonConvergence,
)
from .series import TimeSeries, as_series, difference_polynomial

__all__ = [
    "SarimaOrder",
    "SarimaCoefficients",
    "FittedModel",
    "FeasibilityReport",
    "check_feasibility",
    "expand_ar_recursion",
    "fit",
    "forecast",
    "one_step_fitted",
    "simulate",
]

# roots closer to the unit circle than this are rejected during estimation
ROOT_MARGIN = 1.001
STARTS = (0.0, 0.1, -0.1)


@dataclass(frozen=True, order=True)
class SarimaOrder:
    p: int = 0
    d: int = 0
    q: int = 0
    P: int = 0
    D: int = 0
    Q: int = 0
    s: int = 1

    def __post_init__(self):
        vals = (self.p, self.d, self.q, self.P, self.D, self.Q)
        if any(int(v) != v or v < 0 for v in vals):
            raise ValueError(f"orders must be non-negative integers, got {vals}")
        if int(self.s) != self.s or self.s < 1:
            raise ValueError(f"seasonal period must be a positive integer, got {self.s}")
        if self.s == 1 and (self.P or self.D or self.Q):
            raise ValueError("seasonal orders require a seasonal period s > 1")

    @property
    def n_arma(self) -> int:
        return self.p + self.q + self.P + self.Q

    @property
    def max_ar_lag(self) -> int:
        return (self.D + self.P) * self.s + self.p + self.d

    @property
    def max_ma_lag(self) -> int:
        return self.Q * self.s + self.q

    @property
    def n_diff(self) -> int:
        """Observations consumed by differencing."""
        return self.d + self.D * self.s

    @property
    def min_condition(self) -> int:
        """Default CSS conditioning length on the differenced series."""
        return max(self.p + self.P * self.s, self.q + self.Q * self.s)

    def as_tuple(self):
        return (self.p, self.d, self.q, self.P, self.D, self.Q, self.s)

    def __str__(self):
        return f"({self.p},{self.d},{self.q})({self.P},{self.D},{self.Q})^{self.s}"


@dataclass(frozen=True)
class SarimaCoefficients:
    phi: tuple = ()
    theta: tuple = ()
    Phi: tuple = ()
    Theta: tuple = ()
    intercept: float = 0.0
    sigma2: float = 1.0

    def __post_init__(self):
        for name in ("phi", "theta", "Phi", "Theta"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))
        if not self.sigma2 > 0:
            raise InvalidCoefficients(f"sigma2 must be positive, got {self.sigma2}")

    def check(self, order: SarimaOrder):
        got = (len(self.phi), len(self.theta), len(self.Phi), len(self.Theta))
        want = (order.p, order.q, order.P, order.Q)
        if got != want:
            raise InvalidCoefficients(f"coefficient counts {got} do not match order {order}")

    def ar_poly(self, s):
        return kernels.ar_polynomial(np.array(self.phi), np.array(self.Phi), s)

    def ma_poly(self, s):
        return kernels.ma_polynomial(np.array(self.theta), np.array(self.Theta), s)

    def to_dict(self):
        return {
            "phi": list(self.phi),
            "theta": list(self.theta),
            "Phi": list(self.Phi),
            "Theta": list(self.Theta),
            "intercept": self.intercept,
            "sigma2": self.sigma2,
        }


@dataclass(frozen=True)
class FittedModel:
    order: SarimaOrder
    coeffs: SarimaCoefficients
    log_likelihood: float
    residuals: TimeSeries
    train_length: int
    include_intercept: bool = False
    converged: bool = True
    n_cond: int = 0
    sse: float = field(default=np.nan, repr=False)

    @property
    def nobs(self) -> int:
        """Number of CSS residuals entering the likelihood."""
        return len(self.residuals)

    @property
    def n_params(self) -> int:
        """ARMA coefficients + intercept + innovation variance."""
        return self.order.n_arma + int(self.include_intercept) + 1


@dataclass(frozen=True)
class FeasibilityReport:
    feasible_for_fit: bool
    feasible_for_forecast: bool
    required_fit_length: int
    required_forecast_length: int
    max_ar_lag: int
    max_ma_lag: int


def check_feasibility(order: SarimaOrder, T: int) -> FeasibilityReport:
    """Length requirements of ``order``.

    Forecasting needs every lag of the expanded recursion inside the window:
    ``(D+P)s + p + d <= T`` and ``Qs + q <= T``. Fitting additionally needs one
    full season where all of those lags are observed.
    """
    s = order.s
    ar, ma = order.max_ar_lag, order.max_ma_lag
    ar_fit = (order.D + order.P + 1) * s + order.p + order.d
    ma_fit = (order.Q + 1) * s + order.q
    return FeasibilityReport(
        feasible_for_fit=ar_fit <= T and ma_fit <= T,
        feasible_for_forecast=ar <= T and ma <= T,
        required_fit_length=max(ar_fit, ma_fit),
        required_forecast_length=max(ar, ma),
        max_ar_lag=ar,
        max_ma_lag=ma,
    )


def _full_ar_poly(order, coeffs):
    poly = coeffs.ar_poly(order.s)
    poly = np.convolve(poly, difference_polynomial(1, order.d))
    return np.convolve(poly, difference_polynomial(order.s, order.D))


def expand_ar_recursion(order: SarimaOrder, coeffs: SarimaCoefficients) -> dict:
    """Weights of past observations once differencing and AR factors are multiplied out.

    ``y_t = sum_k w[k] * y_{t-k} + (MA terms)``; only non-zero weights are
    returned, keyed by lag.
    """
    coeffs.check(order)
    poly = _full_ar_poly(order, coeffs)
    return {k: float(-poly[k]) for k in range(1, poly.size) if poly[k] != 0.0}


def _differenced(values, order):
    delta = np.convolve(difference_polynomial(1, order.d), difference_polynomial(order.s, order.D))
    m = delta.size - 1
    if m == 0:
        return values.copy()
    return np.convolve(values, delta)[m:values.size]


def _unpack(x, order, has_mu):
    p, q, P, Q = order.p, order.q, order.P, order.Q
    i = 0
    phi = x[i:i + p]; i += p
    theta = x[i:i + q]; i += q
    Phi = x[i:i + P]; i += P
    Theta = x[i:i + Q]; i += Q
    mu = float(x[i]) if has_mu else 0.0
    return phi, theta, Phi, Theta, mu


def fit(
    y,
    order: SarimaOrder,
    include_intercept: bool | None = None,
    n_cond: int | None = None,
    strict: bool = False,
    maxiter: int | None = None,
    xatol: float = 1e-5,
    frtol: float = 1e-9,
) -> FittedModel:
    """Estimate SARIMA coefficients by conditional sum of squares.

    The series is differenced and standardised. The first ``n_cond`` points
    (default: the largest AR or MA lag) are conditioned on: their errors are
    not scored. The error recursion itself runs from the first point, with
    pre-sample deviations and errors at zero, so the MA errors feeding the
    first scored residuals are computed rather than assumed zero. A simplex
    search is started from every coefficient at 0, +0.1 and -0.1; the lowest
    sum of squares wins.

    ``include_intercept`` defaults to ``d + D == 0``. A fit that never met the
    simplex tolerances is returned with ``converged=False``; pass
    ``strict=True`` to raise :class:`NonConvergence` instead.
    """
    ts = as_series(y)
    v = ts.values
    T = v.size
    rep = check_feasibility(order, T)
    if not rep.feasible_for_fit:
        raise InfeasibleOrder(
            f"{order} needs T >= {rep.required_fit_length} to fit "
            f"((D+P+1)s+p+d <= T and (Q+1)s+q <= T), got T={T}"
        )
    if not np.all(np.isfinite(v)):
        raise DataError("series contains non-finite values")
    if include_intercept is None:
        include_intercept = order.d + order.D == 0
    w = _differenced(v, order)
    start = order.min_condition if n_cond is None else int(n_cond)
    if start < order.min_condition:
        raise ValueError(f"n_cond={start} is shorter than the largest lag {order.min_condition}")
    nobs = w.size - start
    if nobs < 1:
        raise InfeasibleOrder(f"{order}: no residuals left after conditioning on {start} of {w.size} points")
    sd = float(np.std(w))
    if not sd > 1e-12 * max(1.0, float(np.max(np.abs(w)))):
        raise DegenerateSeries(f"differenced series has zero variance for {order}")
    center = float(np.mean(w)) if include_intercept else 0.0
    ws = (w - center) / sd

    k = order.n_arma + int(include_intercept)
    if maxiter is None:
        maxiter = 200 * max(k, 1)
    best = None
    for c in STARTS if order.n_arma else STARTS[:1]:
        x0 = np.zeros(k)
        x0[:order.n_arma] = c
        if not np.isfinite(kernels.css_objective(x0, ws, order.p, order.q, order.P, order.Q,
                                                 order.s, include_intercept, 0, ROOT_MARGIN, start)):
            continue
        res = kernels.fit_css(ws, order.p, order.q, order.P, order.Q, order.s, include_intercept,
                              0, x0, 0.1, maxiter, xatol, frtol, ROOT_MARGIN, start)
        if best is None or res[1] < best[1]:
            best = res
    x, _, _, converged = best
    phi, theta, Phi, Theta, mu_s = _unpack(np.asarray(x), order, include_intercept)
    mu = center + sd * mu_s

    ar_poly = kernels.ar_polynomial(phi, Phi, order.s)
    ma_poly = kernels.ma_polynomial(theta, Theta, order.s)
    e = kernels.css_residuals(w, ar_poly, ma_poly, mu, 0)[start:]
    sse = float(np.dot(e, e))
    sigma2 = max(sse / nobs, np.finfo(float).tiny)
    loglik = -0.5 * nobs * (1.0 + np.log(2.0 * np.pi) + np.log(sigma2))
    coeffs = SarimaCoefficients(phi, theta, Phi, Theta, mu, sigma2)
    model = FittedModel(
        order=order,
        coeffs=coeffs,
        log_likelihood=float(loglik),
        residuals=ts.replace(e, shift=T - nobs),
        train_length=T,
        include_intercept=bool(include_intercept),
        converged=bool(converged),
        n_cond=start,
        sse=sse,
    )
    if strict and not converged:
        raise NonConvergence(f"simplex search for {order} did not converge", model)
    return model


def _residuals_on(model: FittedModel, values):
    """One-step errors of ``model`` over ``values``; zero over the differencing prefix."""
    order, c = model.order, model.coeffs
    w = _differenced(values, order)
    e = np.zeros(values.size)
    if w.size:
        e[order.n_diff:] = kernels.css_residuals(w, c.ar_poly(order.s), c.ma_poly(order.s), c.intercept, 0)
    return e


def one_step_fitted(model: FittedModel, history) -> np.ndarray:
    """In-sample one-step predictions over the computable tail of ``history``.

    Aligned to the end of ``history``; length equals ``len(model.residuals)``
    when ``history`` is the training series.
    """
    v = as_series(history).values
    e = _residuals_on(model, v)
    n = v.size - model.order.n_diff - max(model.n_cond, model.order.min_condition)
    n = max(n, 0)
    return (v - e)[v.size - n:]


def forecast(model: FittedModel, history, h: int) -> np.ndarray:
    """Iterated conditional-mean forecasts for steps 1..h after ``history``.

    Future shocks are zero; past shocks are the model's one-step errors
    recomputed over ``history``.
    """
    if h < 1:
        raise ValueError("horizon must be >= 1")
    v = as_series(history).values
    order, c = model.order, model.coeffs
    rep = check_feasibility(order, v.size)
    if not rep.feasible_for_forecast:
        raise InfeasibleOrder(
            f"{order} needs {rep.required_forecast_length} past points "
            f"((D+P)s+p+d <= T and Qs+q <= T), history has {v.size}"
        )
    e = _residuals_on(model, v)
    full_ar = _full_ar_poly(order, c)
    ma = c.ma_poly(order.s)
    const = c.intercept * float(np.sum(c.ar_poly(order.s))) if model.include_intercept else 0.0
    ar_lags = np.flatnonzero(full_ar[1:]) + 1
    ar_w = -full_ar[ar_lags]
    ma_lags = np.flatnonzero(ma[1:]) + 1
    ma_w = ma[ma_lags]

    T = v.size
    y = np.concatenate([v, np.zeros(h)])
    shocks = np.concatenate([e, np.zeros(h)])
    for t in range(T, T + h):
        y[t] = const + np.dot(ar_w, y[t - ar_lags]) + np.dot(ma_w, shocks[t - ma_lags])
    return y[T:]


def simulate(
    order: SarimaOrder,
    coeffs: SarimaCoefficients,
    T: int,
    seed: int,
    burn_in: int | None = None,
    initial=None,
) -> TimeSeries:
    """Draw a path of length ``T`` on the observation scale.

    Gaussian shocks come from ``numpy.random.default_rng(seed)``. The ARMA
    part runs with ``burn_in`` discarded points, then differencing is undone
    starting from ``initial`` (``d + D*s`` values, zeros by default).
    """
    coeffs.check(order)
    if not (kernels.is_stable(np.array(coeffs.phi)) and kernels.is_stable(np.array(coeffs.Phi))):
        raise InvalidCoefficients("AR polynomial is not stationary")
    if not (kernels.is_stable(-np.array(coeffs.theta)) and kernels.is_stable(-np.array(coeffs.Theta))):
        raise InvalidCoefficients("MA polynomial is not invertible")
    n_init = order.n_diff
    if initial is None:
        initial = np.zeros(n_init)
    initial = np.asarray(initial, dtype=float).reshape(-1)
    if initial.size != n_init:
        raise InvalidCoefficients(f"need {n_init} initial values, got {initial.size}")
    if T <= n_init:
        raise ValueError(f"T={T} must exceed the {n_init} initial values")
    if burn_in is None:
        burn_in = 10 * max(order.max_ar_lag, order.max_ma_lag) + 100
    n = T - n_init
    rng = np.random.default_rng(seed)
    eps = rng.normal(0.0, np.sqrt(coeffs.sigma2), n + burn_in)
    w = coeffs.intercept + lfilter(coeffs.ma_poly(order.s), coeffs.ar_poly(order.s), eps)
    w = w[burn_in:]
    if n_init == 0:
        return TimeSeries(w, 0, order.s)
    delta = np.convolve(difference_polynomial(1, order.d), difference_polynomial(order.s, order.D))
    lags = np.flatnonzero(delta[1:]) + 1
    wts = -delta[lags]
    y = np.empty(T)
    y[:n_init] = initial
    for t in range(n_init, T):
        y[t] = w[t - n_init] + np.dot(wts, y[t - lags])
    return TimeSeries(y, 0, order.s)
