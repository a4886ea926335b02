"""Coherent forecasts by weighted projection onto the span of the summing matrix.

Every method except bottom-up solves

    y_tilde = S (S' W^-1 S)^-1 S' W^-1 y_hat

for a different weight matrix ``W``: identity (ols), the diagonal of the
residual second-moment matrix (wls), the full matrix (mint-sample) or a
shrunk version of it (mint-shrink).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import DegenerateResiduals, InsufficientSample, SingularSystem
from .grouping import SummingMatrix

__all__ = [
    "METHODS",
    "BaseForecasts",
    "ResidualMatrix",
    "WeightSpec",
    "ReconciledForecasts",
    "estimate_weights",
    "shrinkage_intensity",
    "reconcile",
    "bottom_up",
    "reconcile_method",
    "canonical_method",
]

METHODS = ("baseline", "bottom-up", "ols", "wls", "mint-sample", "mint-shrink")
WEIGHT_KINDS = ("ols", "wls", "mint-sample", "mint-shrink")
_ALIASES = {"mint": "mint-shrink", "bottomup": "bottom-up", "bu": "bottom-up", "base": "baseline"}
JITTER = 1e-8
VARIANCE_FLOOR = 1e-8


def canonical_method(name: str) -> str:
    key = str(name).strip().lower().replace("_", "-")
    key = _ALIASES.get(key, key)
    if key not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {METHODS} (or 'mint')")
    return key


@dataclass(frozen=True)
class BaseForecasts:
    """Independent h-step forecasts, one row per node in structure order."""

    matrix: np.ndarray
    nodes: tuple = ()

    def __post_init__(self):
        Y = np.array(self.matrix, dtype=float, ndmin=2)
        if Y.ndim != 2:
            raise ValueError("base forecasts must be a nodes x h matrix")
        Y.setflags(write=False)
        object.__setattr__(self, "matrix", Y)
        object.__setattr__(self, "nodes", tuple(self.nodes))
        if self.nodes and len(self.nodes) != Y.shape[0]:
            raise ValueError(f"{len(self.nodes)} node keys for {Y.shape[0]} forecast rows")

    @property
    def horizon(self) -> int:
        return self.matrix.shape[1]

    @property
    def node_index(self) -> dict:
        return {k: i for i, k in enumerate(self.nodes)}


@dataclass(frozen=True)
class ResidualMatrix:
    """In-sample one-step residuals, ``T_common`` rows by nodes."""

    matrix: np.ndarray

    def __post_init__(self):
        E = np.array(self.matrix, dtype=float, ndmin=2)
        if not np.all(np.isfinite(E)):
            raise ValueError("residual matrix has missing or non-finite entries; use from_columns")
        E.setflags(write=False)
        object.__setattr__(self, "matrix", E)

    @property
    def T_common(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_columns(cls, columns):
        """Align residual vectors of unequal length at their ends.

        Rows where any node lacks a finite residual are dropped.
        """
        cols = [np.asarray(c, dtype=float).reshape(-1) for c in columns]
        T = min(c.size for c in cols)
        E = np.column_stack([c[c.size - T:] for c in cols]) if T else np.zeros((0, len(cols)))
        keep = np.all(np.isfinite(E), axis=1)
        return cls(E[keep])


@dataclass(frozen=True)
class WeightSpec:
    kind: str
    W: np.ndarray = field(repr=False)
    shrink_intensity: float | None = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"kind must be one of {WEIGHT_KINDS}, got {self.kind!r}")
        W = np.array(self.W, dtype=float, ndmin=2)
        if W.shape[0] != W.shape[1]:
            raise ValueError("W must be square")
        if not np.allclose(W, W.T, rtol=0.0, atol=1e-12 * max(1.0, float(np.max(np.abs(W))))):
            raise ValueError("W must be symmetric")
        W = 0.5 * (W + W.T)
        W.setflags(write=False)
        object.__setattr__(self, "W", W)

    def scaled(self, k: float) -> "WeightSpec":
        return WeightSpec(self.kind, self.W * k, self.shrink_intensity)


@dataclass(frozen=True)
class ReconciledForecasts:
    matrix: np.ndarray
    bottom_estimates: np.ndarray
    method: str = ""
    base: np.ndarray | None = field(default=None, repr=False)

    @property
    def discrepancy(self):
        """Base minus reconciled forecasts, or None when the base is unknown."""
        return None if self.base is None else self.base - self.matrix

    @property
    def negative(self) -> np.ndarray:
        return self.matrix < 0


def _second_moment(E):
    return E.T @ E / E.shape[0]


def _floored_diagonal(W1):
    d = np.diag(W1).copy()
    bad = ~(d > 0)
    if np.any(bad):
        pos = d[~bad]
        floor = VARIANCE_FLOOR * (pos.mean() if pos.size else 1.0)
        warnings.warn(
            f"{int(bad.sum())} node(s) with zero residual variance; weight floored at {floor:.3g}",
            DegenerateResiduals,
            stacklevel=3,
        )
        d[bad] = floor
    return d


def shrinkage_intensity(E) -> float:
    """Analytic intensity for shrinking the correlation toward the identity.

    ``E`` is a T x n residual matrix. Columns are scaled by their root mean
    square (no centring, matching the second-moment estimator), then

        lambda = sum_{i != j} Var(r_ij) / sum_{i != j} r_ij**2

    clipped to [0, 1].
    """
    E = np.asarray(E, dtype=float)
    T, n = E.shape
    if n < 2 or T < 2:
        return 1.0
    rms = np.sqrt(np.mean(E ** 2, axis=0))
    X = np.divide(E, rms, out=np.zeros_like(E), where=rms > 0)
    R = X.T @ X / T
    X2 = X ** 2
    V = (X2.T @ X2 - (X.T @ X) ** 2 / T) / (T * (T - 1))
    off = ~np.eye(n, dtype=bool)
    denom = float(np.sum(R[off] ** 2))
    if denom <= 0:
        return 1.0
    return float(np.clip(np.sum(V[off]) / denom, 0.0, 1.0))


def estimate_weights(residuals, kind: str = "mint-shrink", shrink_intensity: float | None = None) -> WeightSpec:
    """Weight matrix for :func:`reconcile` from in-sample residuals.

    Parameters
    ----------
    residuals : ResidualMatrix or array_like, shape (T, n)
    kind : {"ols", "wls", "mint-sample", "mint-shrink"} or "mint"
    shrink_intensity : float, optional
        Override the estimated intensity (mint-shrink only).

    Notes
    -----
    The second-moment matrix is (1/T) sum e_t e_t', not mean-centred.
    mint-sample with T <= n is singular and is upgraded to mint-shrink with
    a warning. Zero-variance nodes get a small floored variance.
    """
    kind = canonical_method(kind)
    if kind not in WEIGHT_KINDS:
        raise ValueError(f"{kind!r} does not use a weight matrix")
    E = residuals.matrix if isinstance(residuals, ResidualMatrix) else np.array(residuals, dtype=float, ndmin=2)
    T, n = E.shape
    if kind == "ols":
        return WeightSpec("ols", np.eye(n))
    if T < 2:
        raise InsufficientSample(f"need at least 2 residual rows to estimate weights, got {T}")
    W1 = _second_moment(E)
    d = _floored_diagonal(W1)
    if kind == "wls":
        return WeightSpec("wls", np.diag(d))
    if kind == "mint-sample" and T <= n:
        warnings.warn(
            f"mint-sample needs more residual rows than nodes (T={T}, n={n}); using mint-shrink",
            stacklevel=2,
        )
        kind = "mint-shrink"
    np.fill_diagonal(W1, d)
    if kind == "mint-sample":
        return WeightSpec("mint-sample", W1)
    lam = shrinkage_intensity(E) if shrink_intensity is None else float(shrink_intensity)
    if not 0.0 <= lam <= 1.0:
        raise ValueError("shrink_intensity must lie in [0, 1]")
    W = lam * np.diag(d) + (1.0 - lam) * W1
    return WeightSpec("mint-shrink", W, lam)


def _cholesky(W):
    try:
        return linalg.cho_factor(W, lower=True, check_finite=True)
    except linalg.LinAlgError:
        pass
    n = W.shape[0]
    scale = float(np.trace(W)) / n
    if not scale > 0:
        raise SingularSystem("weight matrix has a non-positive trace; try mint-shrink or wls")
    eps = JITTER * scale
    try:
        return linalg.cho_factor(W + eps * np.eye(n), lower=True)
    except linalg.LinAlgError as exc:
        raise SingularSystem(
            "weight matrix is not positive definite even after jitter; try mint-shrink or wls"
        ) from exc


def _as_matrix(S):
    return S.entries if isinstance(S, SummingMatrix) else np.asarray(S, dtype=float)


def reconcile(base: BaseForecasts, S, w: WeightSpec) -> ReconciledForecasts:
    """Project base forecasts onto the coherent subspace.

    All horizons are solved together through Cholesky factors; no explicit
    inverse is formed.
    """
    Smat = _as_matrix(S)
    Y = base.matrix if isinstance(base, BaseForecasts) else np.array(base, dtype=float, ndmin=2)
    n, m = Smat.shape
    if Y.shape[0] != n or w.W.shape != (n, n):
        raise ValueError(f"dimension mismatch: S is {Smat.shape}, base {Y.shape}, W {w.W.shape}")
    cW = _cholesky(w.W)
    WiS = linalg.cho_solve(cW, Smat)
    WiY = linalg.cho_solve(cW, Y)
    A = Smat.T @ WiS
    A = 0.5 * (A + A.T)
    if not np.all(np.isfinite(A)):
        raise SingularSystem("S' W^-1 S is not finite; the weight matrix is numerically singular")
    try:
        cA = linalg.cho_factor(A, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularSystem("S' W^-1 S is singular; the structure may be degenerate") from exc
    if np.linalg.cond(A) > 1e14:
        raise SingularSystem("S' W^-1 S is numerically singular; consider shrinkage")
    B = linalg.cho_solve(cA, Smat.T @ WiY)
    return ReconciledForecasts(Smat @ B, B, w.kind, Y.copy())


def _bottom_rows(S):
    if isinstance(S, SummingMatrix):
        return [S.row_index[k] for k in sorted(S.col_index, key=S.col_index.get)]
    Smat = np.asarray(S)
    n, m = Smat.shape
    return list(range(n - m, n))


def bottom_up(base: BaseForecasts, S) -> ReconciledForecasts:
    """Keep the bottom-level base forecasts and sum them up the structure."""
    Smat = _as_matrix(S)
    Y = base.matrix if isinstance(base, BaseForecasts) else np.array(base, dtype=float, ndmin=2)
    B = Y[_bottom_rows(S)].copy()
    return ReconciledForecasts(Smat @ B, B, "bottom-up", Y.copy())


def reconcile_method(base: BaseForecasts, S, method: str, residuals=None) -> ReconciledForecasts:
    """Dispatch on a method name from :data:`METHODS`."""
    method = canonical_method(method)
    Y = base.matrix if isinstance(base, BaseForecasts) else np.array(base, dtype=float, ndmin=2)
    if method == "baseline":
        return ReconciledForecasts(Y.copy(), Y[_bottom_rows(S)].copy(), "baseline", Y.copy())
    if method == "bottom-up":
        return bottom_up(base, S)
    if method != "ols" and residuals is None:
        raise ValueError(f"method {method!r} needs in-sample residuals")
    n = _as_matrix(S).shape[0]
    w = estimate_weights(residuals if residuals is not None else np.zeros((2, n)), method)
    out = reconcile(base, S, w)
    return ReconciledForecasts(out.matrix, out.bottom_estimates, method, out.base)
