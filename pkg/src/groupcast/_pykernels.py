"""Pure-Python kernels: CSS residual recursion and the simplex search.

Mirrors ``_ckernels.pyx`` function for function. Selected automatically when
the compiled module is unavailable (see ``groupcast.kernels``).

Parameter vector layout used by ``css_objective`` and ``fit_css``::

    [phi_1..phi_p, theta_1..theta_q, Phi_1..Phi_P, Theta_1..Theta_Q, (mu)]
"""

import numpy as np
from scipy.signal import lfilter

BACKEND = "python"

_RHO, _CHI, _PSI, _SIGMA = 1.0, 2.0, 0.5, 0.5


def ar_polynomial(phi, Phi, s):
    """Dense coefficients of phi(L) * Phi(L**s), phi(L) = 1 - sum phi_i L**i."""
    p, P = len(phi), len(Phi)
    a = np.zeros(p + 1)
    a[0] = 1.0
    a[1:] = -np.asarray(phi, dtype=float)
    b = np.zeros(P * s + 1)
    b[0] = 1.0
    for i in range(P):
        b[(i + 1) * s] = -Phi[i]
    return np.convolve(a, b)


def ma_polynomial(theta, Theta, s):
    """Dense coefficients of theta(L) * Theta(L**s), theta(L) = 1 + sum theta_j L**j."""
    q, Q = len(theta), len(Theta)
    a = np.zeros(q + 1)
    a[0] = 1.0
    a[1:] = np.asarray(theta, dtype=float)
    b = np.zeros(Q * s + 1)
    b[0] = 1.0
    for i in range(Q):
        b[(i + 1) * s] = Theta[i]
    return np.convolve(a, b)


def is_stable(coefs, margin=1.0):
    """True when every root of 1 - sum c_i z**i has modulus > ``margin``.

    Schur-Cohn step-down recursion on the rescaled coefficients
    ``c_i * margin**i``; no root finding.
    """
    k = len(coefs)
    if k == 0:
        return True
    a = [float(coefs[i]) * margin ** (i + 1) for i in range(k)]
    while k > 0:
        r = a[k - 1]
        if not abs(r) < 1.0:
            return False
        den = 1.0 - r * r
        a = [(a[i] + r * a[k - 2 - i]) / den for i in range(k - 1)]
        k -= 1
    return True


def css_residuals(w, ar_poly, ma_poly, mu, start):
    """e_t = A(L)(w - mu)_t - sum_{k>=1} B_k e_{t-k} for t >= start; zero before.

    Lags reaching before the first observation contribute zero, both for
    ``w - mu`` and for ``e``.
    """
    if start < 0:
        raise ValueError("start must be >= 0")
    w = np.asarray(w, dtype=float)
    n = w.size
    e = np.zeros(n)
    if start >= n:
        return e
    x = np.convolve(w - mu, ar_poly)[start:n]
    if ma_poly.size > 1:
        e[start:] = lfilter([1.0], ma_poly, x)
    else:
        e[start:] = x
    return e


def _unpack(x, p, q, P, Q, has_mu):
    i = 0
    phi = x[i:i + p]; i += p
    theta = x[i:i + q]; i += q
    Phi = x[i:i + P]; i += P
    Theta = x[i:i + Q]; i += Q
    mu = x[i] if has_mu else 0.0
    return phi, theta, Phi, Theta, mu


def css_objective(x, w, p, q, P, Q, s, has_mu, start, margin, count_from=-1):
    """Sum of squared CSS residuals from ``count_from`` (default ``start``) on,
    or inf outside the stationary/invertible region."""
    x = np.asarray(x, dtype=float)
    phi, theta, Phi, Theta, mu = _unpack(x, p, q, P, Q, has_mu)
    if not (is_stable(phi, margin) and is_stable(Phi, margin)
            and is_stable(-theta, margin) and is_stable(-Theta, margin)):
        return np.inf
    e = css_residuals(w, ar_polynomial(phi, Phi, s), ma_polynomial(theta, Theta, s), mu, start)
    tail = e[max(start, count_from):]
    return float(np.dot(tail, tail))


def nelder_mead(func, x0, step, maxiter, xatol, frtol):
    """Minimise ``func`` from ``x0`` with an axis-aligned initial simplex.

    Returns ``(x, f, iterations, converged)``.
    """
    x0 = np.asarray(x0, dtype=float)
    k = x0.size
    if k == 0:
        return x0.copy(), func(x0), 0, True
    sim = np.empty((k + 1, k))
    sim[0] = x0
    for i in range(k):
        sim[i + 1] = x0
        sim[i + 1, i] += step
    fsim = np.array([func(v) for v in sim])
    order = np.argsort(fsim, kind="stable")
    sim, fsim = sim[order], fsim[order]

    it = 0
    converged = False
    while it < maxiter:
        if (np.max(np.abs(sim[1:] - sim[0])) <= xatol
                and np.max(np.abs(fsim[1:] - fsim[0])) <= frtol * max(1.0, abs(fsim[0]))):
            converged = True
            break
        it += 1
        xbar = sim[:-1].sum(axis=0) / k
        xr = (1 + _RHO) * xbar - _RHO * sim[-1]
        fr = func(xr)
        shrink = False
        if fr < fsim[0]:
            xe = (1 + _RHO * _CHI) * xbar - _RHO * _CHI * sim[-1]
            fe = func(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-1]:
            xc = (1 + _PSI * _RHO) * xbar - _PSI * _RHO * sim[-1]
            fc = func(xc)
            if fc <= fr:
                sim[-1], fsim[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = (1 - _PSI) * xbar + _PSI * sim[-1]
            fcc = func(xcc)
            if fcc < fsim[-1]:
                sim[-1], fsim[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for j in range(1, k + 1):
                sim[j] = sim[0] + _SIGMA * (sim[j] - sim[0])
                fsim[j] = func(sim[j])
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]
    return sim[0].copy(), float(fsim[0]), it, converged


def fit_css(w, p, q, P, Q, s, has_mu, start, x0, step, maxiter, xatol, frtol, margin, count_from=-1):
    """Simplex search of ``css_objective``; returns ``(x, sse, iterations, converged)``."""
    w = np.ascontiguousarray(w, dtype=float)

    def f(x):
        return css_objective(x, w, p, q, P, Q, s, has_mu, start, margin, count_from)

    return nelder_mead(f, x0, step, maxiter, xatol, frtol)
