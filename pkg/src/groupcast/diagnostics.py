"""Information criteria, residual tests, differencing choice and automatic order search."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import (
    InfeasibleOrder,
    InsufficientSample,
    InvalidLags,
    NoFeasibleModel,
    NonConvergence,
    SeriesTooShort,
)
from .kernels import is_stable
from .sarima import FittedModel, SarimaOrder, check_feasibility, fit
from .series import acf, as_series

__all__ = [
    "CriteriaSet",
    "LjungBoxResult",
    "KPSSResult",
    "SearchConfig",
    "Candidate",
    "SearchResult",
    "information_criteria",
    "ljung_box",
    "default_lb_lags",
    "diagnose",
    "qq_points",
    "kpss",
    "choose_differencing",
    "auto_select",
    "near_unit_root",
    "common_factor_gap",
]

CRITERIA = ("aic", "aicc", "bic")
TIE_TOL = 1e-9
# fitted AR/MA factors with a root inside this modulus are not ranked
RANK_ROOT_MARGIN = 1.01
# an AR root this close to an MA root of the same factor marks a redundant pair
COMMON_FACTOR_TOL = 0.1

# level-stationarity KPSS critical values (Kwiatkowski et al., 1992, table 1)
_KPSS_CRIT = ((0.10, 0.347), (0.05, 0.463), (0.025, 0.574), (0.01, 0.739))


@dataclass(frozen=True)
class CriteriaSet:
    aic: float
    aicc: float
    bic: float
    k: int
    n: int

    def __getitem__(self, name):
        return getattr(self, name)


def information_criteria(log_likelihood: float, k: int, n: int) -> CriteriaSet:
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    if n <= k + 1:
        raise InsufficientSample(f"AICc undefined: n={n} must exceed k+1={k + 1}")
    aic = -2.0 * log_likelihood + 2.0 * k
    aicc = aic + 2.0 * k * (k + 1) / (n - k - 1)
    bic = -2.0 * log_likelihood + k * math.log(n)
    return CriteriaSet(aic, aicc, bic, k, n)


@dataclass(frozen=True)
class LjungBoxResult:
    q_star: float
    lags_tested: int
    dof: int
    p_value: float


def ljung_box(residuals, l: int, K: int = 0) -> LjungBoxResult:
    """Portmanteau statistic T(T+2) sum_k r_k^2 / (T-k) over lags 1..l."""
    e = as_series(residuals).values
    T = e.size
    if not (1 <= l < T):
        raise InvalidLags(f"need 1 <= l < T, got l={l}, T={T}")
    if l <= K:
        raise InvalidLags(f"need l > K for positive degrees of freedom, got l={l}, K={K}")
    r = acf(e, l)[1:]
    q = T * (T + 2) * float(np.sum(r ** 2 / (T - np.arange(1, l + 1))))
    dof = l - K
    return LjungBoxResult(q, l, dof, float(stats.chi2.sf(q, dof)))


def default_lb_lags(T: int, s: int, K: int = 0) -> int | None:
    """min(2s, T // 5) for seasonal data, 10 otherwise, nudged so that K < l < T."""
    l = min(2 * s, T // 5) if s > 1 else 10
    l = min(max(l, K + 1), T - 1)
    return l if l > K else None


def diagnose(model: FittedModel, s: int | None = None) -> LjungBoxResult | None:
    s = model.order.s if s is None else s
    K = model.order.n_arma
    l = default_lb_lags(model.nobs, s, K)
    if l is None:
        return None
    return ljung_box(model.residuals, l, K)


def qq_points(data) -> np.ndarray:
    """Normal Q-Q pairs as an array of shape (T, 2).

    Column 0 holds standard-normal quantiles at (i - 0.5) / T, column 1 the
    sorted sample rescaled to the mean and standard deviation of column 0,
    so an exactly normal sample lies on the identity line. A constant sample
    maps to zeros.
    """
    x = np.sort(as_series(data).values)
    T = x.size
    if T < 3:
        raise SeriesTooShort("qq_points needs at least 3 observations")
    theo = stats.norm.ppf((np.arange(1, T + 1) - 0.5) / T)
    sd = x.std(ddof=1)
    if not sd > 0:
        return np.column_stack([theo, np.zeros(T)])
    sample = (x - x.mean()) / sd * theo.std(ddof=1) + theo.mean()
    return np.column_stack([theo, sample])


@dataclass(frozen=True)
class KPSSResult:
    statistic: float
    lags: int
    p_value: float

    def rejects(self, alpha=0.05) -> bool:
        return self.p_value < alpha


def kpss(x, nlags: int | None = None) -> KPSSResult:
    """KPSS level-stationarity test with a Bartlett long-run variance.

    ``nlags`` defaults to the short rule int(4 (T/100)^(1/4)). The p-value is
    interpolated in the published table and clipped to [0.01, 0.10].
    """
    v = as_series(x).values
    T = v.size
    if T < 3:
        raise SeriesTooShort("kpss needs at least 3 observations")
    if nlags is None:
        nlags = int(4 * (T / 100.0) ** 0.25)
    nlags = min(nlags, T - 1)
    e = v - v.mean()
    eta = float(np.sum(np.cumsum(e) ** 2)) / T ** 2
    s2 = float(np.dot(e, e))
    for k in range(1, nlags + 1):
        s2 += 2.0 * (1.0 - k / (nlags + 1.0)) * float(np.dot(e[k:], e[:-k]))
    s2 /= T
    stat = eta / s2 if s2 > 0 else 0.0
    ps, cv = zip(*_KPSS_CRIT)
    p = float(np.interp(stat, cv, ps))
    return KPSSResult(stat, nlags, p)


def _sd(x):
    return float(np.std(x, ddof=1))


def choose_differencing(y, s: int) -> tuple:
    """Pick (d, D), each 0 or 1.

    D = 1 when lag-s differencing lowers the standard deviation below both
    the raw series and its first difference. d = 1 when KPSS rejects level
    stationarity at 5% on the (seasonally differenced) series and a first
    difference lowers its standard deviation. Short series return D = 0,
    with a warning.
    """
    x = as_series(y).values
    T = x.size
    if T < 3:
        warnings.warn(f"choose_differencing: series of length {T} too short, using (0, 0)", stacklevel=2)
        return (0, 0)
    D = 0
    if s > 1:
        if T >= 2 * s + 2:
            sd_s = _sd(x[s:] - x[:-s])
            D = int(sd_s < _sd(x) and sd_s < _sd(np.diff(x)))
        else:
            warnings.warn(
                f"choose_differencing: T={T} < 2s+2={2 * s + 2}, seasonal differencing not considered",
                stacklevel=2,
            )
    z = x[s:] - x[:-s] if D else x
    d = 0
    if z.size >= 4 and _sd(z) > 0:
        d = int(kpss(z).rejects(0.05) and _sd(np.diff(z)) < _sd(z))
    return (d, D)


@dataclass(frozen=True)
class SearchConfig:
    max_p: int = 3
    max_q: int = 3
    max_P: int = 1
    max_Q: int = 1
    criterion: str = "aicc"
    d: int | None = None
    D: int | None = None
    include_intercept: bool | None = None
    # candidates conditioning away more than this share of the differenced sample are not ranked
    max_condition_share: float = 0.5

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")


@dataclass(frozen=True)
class Candidate:
    order: SarimaOrder
    criteria: CriteriaSet | None
    converged: bool
    rankable: bool = True
    note: str = ""
    model: FittedModel | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class SearchResult:
    best: FittedModel
    candidates: list
    differencing: tuple
    criterion: str
    n_cond: int
    best_criteria: CriteriaSet


def near_unit_root(model: FittedModel, margin: float = RANK_ROOT_MARGIN) -> bool:
    """True when any AR or MA factor of ``model`` has a root of modulus <= ``margin``."""
    c = model.coeffs
    return not (
        is_stable(c.phi, margin)
        and is_stable(c.Phi, margin)
        and is_stable([-t for t in c.theta], margin)
        and is_stable([-t for t in c.Theta], margin)
    )


def _lag_roots(coefs, sign, s=1):
    """Roots, in the lag variable, of 1 - sign * sum c_i x**i with x = L**s."""
    c = np.asarray(coefs, dtype=float)
    if c.size == 0 or not np.any(c):
        return np.zeros(0, dtype=complex)
    poly = np.r_[1.0, -sign * c]
    poly = np.trim_zeros(poly, "b")
    r = np.roots(poly[::-1])
    if s == 1:
        return r
    k = np.arange(s)
    return np.concatenate([np.abs(x) ** (1.0 / s) * np.exp(1j * (np.angle(x) + 2 * np.pi * k) / s) for x in r])


def common_factor_gap(model: FittedModel) -> float:
    """Smallest distance between an AR root and an MA root of the same factor.

    Non-seasonal roots are compared with non-seasonal ones, seasonal with
    seasonal, both in the lag variable. ``inf`` when no pair exists.
    """
    c, s = model.coeffs, model.order.s
    gap = np.inf
    for ar, ma in (
        (_lag_roots(c.phi, 1.0), _lag_roots(c.theta, -1.0)),
        (_lag_roots(c.Phi, 1.0, s), _lag_roots(c.Theta, -1.0, s)),
    ):
        if ar.size and ma.size:
            gap = min(gap, float(np.min(np.abs(ar[:, None] - ma[None, :]))))
    return gap


def _order_key(o: SarimaOrder):
    return (o.p + o.q + o.P + o.Q, o.p, o.q, o.P, o.Q)


def auto_select(y, s: int, config: SearchConfig | None = None) -> SearchResult:
    """Exhaustive, feasibility-filtered SARIMA search.

    (d, D) are fixed first, so every candidate shares the same differenced
    series. All candidates are fitted on a common conditioning window (the
    largest lag among the ranked candidates) so their likelihoods cover the
    same observations. Ties within 1e-9 go to the smaller total order, then
    to lexicographic (p, q, P, Q).

    Non-converged fits are never ranked. Fits with an AR or MA root within
    ``RANK_ROOT_MARGIN`` of the unit circle are not ranked either: conditional
    sums of squares reward such near-cancelling or boundary roots with
    spurious likelihood gains. Fits whose AR and MA factors share a root to
    within ``COMMON_FACTOR_TOL`` are redundant (the pair cancels, leaving a
    smaller model) and are skipped too. If every converged fit is screened
    out, the screens are dropped with a warning.
    """
    config = config or SearchConfig()
    ts = as_series(y, s)
    T = len(ts)
    if s > 1 and T < s + 2:
        warnings.warn(f"auto_select: T={T} < s+2, restricting to non-seasonal orders", stacklevel=2)
        s = 1
    if config.d is None or config.D is None:
        d, D = choose_differencing(ts, s)
    if config.d is not None:
        d = config.d
    if config.D is not None:
        D = config.D if s > 1 else 0
    seasonal = s > 1
    grid = itertools.product(
        range(config.max_p + 1),
        range(config.max_q + 1),
        range(config.max_P + 1 if seasonal else 1),
        range(config.max_Q + 1 if seasonal else 1),
    )
    orders = [SarimaOrder(p, d, q, P, D, Q, s) for p, q, P, Q in grid]
    feasible = [o for o in orders if check_feasibility(o, T).feasible_for_fit]
    if not feasible:
        req = min(check_feasibility(o, T).required_fit_length for o in orders)
        raise NoFeasibleModel(
            f"no SARIMA order with (d, D)=({d}, {D}), s={s} satisfies (D+P+1)s+p+d <= T "
            f"and (Q+1)s+q <= T for T={T} (smallest requirement {req})"
        )
    n_w = T - (d + D * s)
    intercept = config.include_intercept if config.include_intercept is not None else d + D == 0

    def usable(o):
        n = n_w - o.min_condition
        k = o.n_arma + int(intercept) + 1
        return n > k + 1 and o.min_condition <= config.max_condition_share * n_w

    ranked_orders = [o for o in feasible if usable(o)]
    if not ranked_orders:
        raise NoFeasibleModel(f"differenced series of length {n_w} is too short for any candidate order")
    n_cond = max(o.min_condition for o in ranked_orders)

    candidates = []
    for o in feasible:
        if o not in ranked_orders:
            candidates.append(Candidate(o, None, False, False, "conditioning window too long"))
            continue
        try:
            m = fit(ts, o, include_intercept=intercept, n_cond=n_cond)
            crit = information_criteria(m.log_likelihood, m.n_params, m.nobs)
        except (InsufficientSample, InfeasibleOrder) as exc:
            candidates.append(Candidate(o, None, False, False, str(exc)))
            continue
        if not m.converged:
            candidates.append(Candidate(o, crit, False, True, "not converged", m))
        elif near_unit_root(m):
            candidates.append(Candidate(o, crit, True, True, "root near unit circle", m))
        elif common_factor_gap(m) < COMMON_FACTOR_TOL:
            candidates.append(Candidate(o, crit, True, True, "near-common AR/MA factor", m))
        else:
            candidates.append(Candidate(o, crit, True, True, "", m))

    pool = [c for c in candidates if c.rankable and c.converged and not c.note]
    if not pool:
        pool = [c for c in candidates if c.rankable and c.converged]
        if pool:
            warnings.warn("auto_select: every converged fit failed the root screens; ranking them anyway",
                          stacklevel=2)
    best = None
    for c in pool:
        if best is None:
            best = c
            continue
        a, b = c.criteria[config.criterion], best.criteria[config.criterion]
        if a < b - TIE_TOL or (abs(a - b) <= TIE_TOL and _order_key(c.order) < _order_key(best.order)):
            best = c
    if best is None:
        raise NonConvergence(f"no candidate order converged for (d, D)=({d}, {D})")
    return SearchResult(best.model, candidates, (d, D), config.criterion, n_cond, best.criteria)
