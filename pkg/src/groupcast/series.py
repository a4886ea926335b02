"""Time-series container, Box-Cox transforms, differencing and autocorrelation."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainViolation, NonPositiveValue, SeriesTooShort, SpecMismatch

__all__ = [
    "TimeSeries",
    "BoxCoxParam",
    "DifferenceSpec",
    "as_series",
    "box_cox",
    "inv_box_cox",
    "select_lambda",
    "difference",
    "integrate",
    "difference_polynomial",
    "acf",
    "pacf",
    "durbin_levinson",
]

LAMBDA_GRID = np.round(np.arange(-10, 21) / 10.0, 1)


@dataclass(frozen=True)
class TimeSeries:
    """Regularly spaced observations.

    Parameters
    ----------
    values : array_like
        Observations, oldest first. Stored as a read-only float array.
    start_index : int or str
        Calendar anchor of the first observation (integer step or ISO date).
    period_length : int
        Observations per season, e.g. 52 for weekly data.
    """

    values: np.ndarray
    start_index: Union[int, str] = 0
    period_length: int = 1

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True).reshape(-1)
        if v.size < 1:
            raise SeriesTooShort("a time series needs at least one observation")
        if int(self.period_length) < 1:
            raise ValueError("period_length must be >= 1")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "period_length", int(self.period_length))

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def replace(self, values, shift=0):
        """Same metadata, new values; ``shift`` advances an integer anchor."""
        start = self.start_index
        if shift and isinstance(start, (int, np.integer)):
            start = int(start) + shift
        return TimeSeries(values, start, self.period_length)


def as_series(y, period_length=None) -> TimeSeries:
    if isinstance(y, TimeSeries):
        if period_length is not None and period_length != y.period_length:
            return TimeSeries(y.values, y.start_index, period_length)
        return y
    return TimeSeries(y, 0, 1 if period_length is None else period_length)


@dataclass(frozen=True)
class BoxCoxParam:
    lam: float

    def __float__(self):
        return float(self.lam)


@dataclass(frozen=True)
class DifferenceSpec:
    """What is needed to undo ``difference``: the lag, the order and the
    first ``lag * order`` original observations."""

    lag: int
    order: int
    initial_values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.initial_values, dtype=float).reshape(-1)
        v.setflags(write=False)
        object.__setattr__(self, "initial_values", v)


def _lam(lam) -> float:
    return float(lam.lam if isinstance(lam, BoxCoxParam) else lam)


def _check_positive(v):
    bad = np.flatnonzero(~(v > 0))
    if bad.size:
        raise NonPositiveValue(bad[0], v[bad[0]])


def box_cox(y, lam) -> TimeSeries:
    """(y**lam - 1) / lam, or log(y) when lam == 0. Requires y > 0."""
    ts = as_series(y)
    lam = _lam(lam)
    v = ts.values
    _check_positive(v)
    if lam == 0.0:
        out = np.log(v)
    elif lam == 1.0:
        out = v - 1.0
    else:
        out = np.expm1(lam * np.log(v)) / lam
    return ts.replace(out)


def inv_box_cox(z, lam) -> TimeSeries:
    ts = as_series(z)
    lam = _lam(lam)
    v = ts.values
    if lam == 0.0:
        return ts.replace(np.exp(v))
    base = lam * v
    bad = np.flatnonzero(~(base > -1.0))
    if bad.size:
        raise DomainViolation(
            f"inverse Box-Cox undefined at index {bad[0]}: lam*z + 1 = {base[bad[0]] + 1.0!r} <= 0"
        )
    if lam == 1.0:
        return ts.replace(v + 1.0)
    return ts.replace(np.exp(np.log1p(base) / lam))


def _guerrero_cv(v, block, lam):
    n_blocks = v.size // block
    blocks = v[v.size - n_blocks * block:].reshape(n_blocks, block)
    means = blocks.mean(axis=1)
    sds = blocks.std(axis=1, ddof=1)
    ratios = sds / means ** (1.0 - lam)
    m = ratios.mean()
    if not np.isfinite(m) or m <= 0:
        return np.nan
    return ratios.std(ddof=1) / m


def select_lambda(y, grid=LAMBDA_GRID, min_improvement=0.1) -> BoxCoxParam:
    """Choose a Box-Cox power by Guerrero's method.

    The series is cut into consecutive blocks of one season (two points for
    non-seasonal data, or when fewer than two full seasons exist). For each
    candidate power the coefficient of variation of
    ``block_sd / block_mean ** (1 - lam)`` is computed; the power with the
    smallest value wins.

    ``lam = 1`` is kept unless the best power lowers that coefficient of
    variation by at least ``min_improvement`` (relative). Without this rule,
    series whose level barely moves get a power picked by sampling noise.
    Zero dispersion everywhere also returns ``lam = 1``, with a warning.
    """
    ts = as_series(y)
    v = ts.values
    _check_positive(v)
    s = ts.period_length
    if v.size < 2 * s:
        warnings.warn(
            f"select_lambda: {v.size} observations is less than two seasons of {s}",
            stacklevel=2,
        )
    block = s if (s > 1 and v.size // s >= 2) else 2
    if v.size // block < 2:
        warnings.warn("select_lambda: too few observations, using lambda = 1", stacklevel=2)
        return BoxCoxParam(1.0)
    cvs = np.array([_guerrero_cv(v, block, lam) for lam in grid])
    if not np.any(np.isfinite(cvs)):
        warnings.warn("select_lambda: zero dispersion, using lambda = 1", stacklevel=2)
        return BoxCoxParam(1.0)
    best = int(np.nanargmin(cvs))
    ref = _guerrero_cv(v, block, 1.0)
    if np.isfinite(ref) and cvs[best] > (1.0 - min_improvement) * ref:
        return BoxCoxParam(1.0)
    return BoxCoxParam(float(grid[best]))


def difference_polynomial(lag: int, order: int) -> np.ndarray:
    """Coefficients of (1 - L**lag)**order, constant term first."""
    poly = np.array([1.0])
    step = np.zeros(lag + 1)
    step[0], step[lag] = 1.0, -1.0
    for _ in range(order):
        poly = np.convolve(poly, step)
    return poly


def difference(y, lag: int = 1, order: int = 1):
    ts = as_series(y)
    if lag < 1 or order < 0:
        raise ValueError("lag must be >= 1 and order >= 0")
    m = lag * order
    if len(ts) <= m:
        raise SeriesTooShort(f"need more than {m} observations to difference at lag {lag}, order {order}")
    z = ts.values.copy()
    for _ in range(order):
        z = z[lag:] - z[:-lag]
    spec = DifferenceSpec(lag, order, ts.values[:m])
    return ts.replace(z, shift=m), spec


def integrate(z, spec: DifferenceSpec) -> TimeSeries:
    """Undo ``difference`` given the retained initial values."""
    ts = as_series(z)
    m = spec.lag * spec.order
    init = spec.initial_values
    if init.size != m:
        raise SpecMismatch(f"spec holds {init.size} initial values, lag*order = {m}")
    poly = difference_polynomial(spec.lag, spec.order)
    lags = np.flatnonzero(poly[1:]) + 1
    coefs = -poly[lags]
    out = np.empty(m + len(ts))
    out[:m] = init
    zv = ts.values
    for t in range(m, out.size):
        out[t] = zv[t - m] + np.dot(coefs, out[t - lags])
    return ts.replace(out, shift=-m)


def acf(y, max_lag: int) -> np.ndarray:
    """Sample autocorrelations r_0..r_max_lag (mean removed, divided by T).

    A zero-variance series gives ``[1, 0, 0, ...]``.
    """
    v = as_series(y).values
    T = v.size
    if not 1 <= max_lag < T:
        raise SeriesTooShort(f"acf needs 1 <= max_lag < T (max_lag={max_lag}, T={T})")
    x = v - v.mean()
    denom = np.dot(x, x)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if denom <= 0:
        return out
    for k in range(1, max_lag + 1):
        out[k] = np.dot(x[k:], x[:-k]) / denom
    return out


def durbin_levinson(r: np.ndarray) -> np.ndarray:
    """Partial autocorrelations from autocorrelations ``r`` (r[0] == 1)."""
    n = r.size - 1
    out = np.zeros(n + 1)
    out[0] = 1.0
    if n == 0:
        return out
    phi = np.zeros(n + 1)
    phi[1] = out[1] = r[1]
    for k in range(2, n + 1):
        prev = phi[1:k]
        den = 1.0 - np.dot(prev, r[1:k])
        if den <= 1e-15:
            break
        kk = (r[k] - np.dot(prev, r[k - 1:0:-1])) / den
        phi[1:k] = prev - kk * prev[::-1]
        phi[k] = out[k] = kk
    return out


def pacf(y, max_lag: int) -> np.ndarray:
    return durbin_levinson(acf(y, max_lag))
