# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled CSS kernels. Same contract as ``_pykernels``."""

import numpy as np

from libc.math cimport fabs, pow, INFINITY
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy

BACKEND = "cython"

cdef double RHO = 1.0, CHI = 2.0, PSI = 0.5, SIGMA = 0.5


cdef bint _stable(const double* c, int k, double margin, double sign, double* buf) noexcept nogil:
    cdef int i, j, m
    cdef double r, den, ai, aj
    if k == 0:
        return True
    for i in range(k):
        buf[i] = sign * c[i] * pow(margin, i + 1)
    m = k
    while m > 0:
        r = buf[m - 1]
        if not fabs(r) < 1.0:
            return False
        den = 1.0 - r * r
        # pairs (i, m-2-i) are updated together so the step-down can run in place
        i = 0
        while i <= m - 2 - i:
            j = m - 2 - i
            ai = buf[i]
            aj = buf[j]
            buf[i] = (ai + r * aj) / den
            if j != i:
                buf[j] = (aj + r * ai) / den
            i += 1
        m -= 1
    return True


cdef struct Model:
    int n, p, q, P, Q, s, has_mu, start, count, na, nm
    double margin
    const double* w
    double* ar
    double* ma
    double* e
    double* buf


cdef void _polys(const double* x, Model* M) noexcept nogil:
    cdef int i, j
    cdef double ai, bj
    cdef int p = M.p, q = M.q, P = M.P, Q = M.Q, s = M.s
    for i in range(M.na):
        M.ar[i] = 0.0
    for i in range(M.nm):
        M.ma[i] = 0.0
    for i in range(p + 1):
        ai = 1.0 if i == 0 else -x[i - 1]
        for j in range(P + 1):
            bj = 1.0 if j == 0 else -x[p + q + j - 1]
            M.ar[i + j * s] += ai * bj
    for i in range(q + 1):
        ai = 1.0 if i == 0 else x[p + i - 1]
        for j in range(Q + 1):
            bj = 1.0 if j == 0 else x[p + q + P + j - 1]
            M.ma[i + j * s] += ai * bj


cdef double _residuals(Model* M, double mu) noexcept nogil:
    cdef int t, k
    cdef double v, sse = 0.0
    cdef const double* w = M.w
    for t in range(M.start):
        M.e[t] = 0.0
    for t in range(M.start, M.n):
        v = 0.0
        for k in range(min(M.na, t + 1)):
            if M.ar[k] != 0.0:
                v += M.ar[k] * (w[t - k] - mu)
        for k in range(1, min(M.nm, t + 1)):
            if M.ma[k] != 0.0:
                v -= M.ma[k] * M.e[t - k]
        M.e[t] = v
        if t >= M.count:
            sse += v * v
    return sse


cdef double _objective(const double* x, Model* M) noexcept nogil:
    cdef int p = M.p, q = M.q, P = M.P, Q = M.Q
    cdef double mu = x[p + q + P + Q] if M.has_mu else 0.0
    if not _stable(x, p, M.margin, 1.0, M.buf):
        return INFINITY
    if not _stable(x + p + q, P, M.margin, 1.0, M.buf):
        return INFINITY
    if not _stable(x + p, q, M.margin, -1.0, M.buf):
        return INFINITY
    if not _stable(x + p + q + P, Q, M.margin, -1.0, M.buf):
        return INFINITY
    _polys(x, M)
    return _residuals(M, mu)


cdef int _setup(Model* M, const double[::1] w, int p, int q, int P, int Q, int s,
                bint has_mu, int start, double margin, int count_from) except -1:
    M.n = w.shape[0]
    M.p, M.q, M.P, M.Q, M.s = p, q, P, Q, s
    M.has_mu = has_mu
    M.start = start
    M.count = max(start, count_from)
    M.margin = margin
    M.na = p + P * s + 1
    M.nm = q + Q * s + 1
    if start < 0:
        raise ValueError("start must be >= 0")
    M.w = &w[0]
    M.ar = <double*> malloc(M.na * sizeof(double))
    M.ma = <double*> malloc(M.nm * sizeof(double))
    M.e = <double*> malloc(max(M.n, 1) * sizeof(double))
    M.buf = <double*> malloc((max(max(p, q), max(P, Q)) + 1) * sizeof(double))
    if M.ar == NULL or M.ma == NULL or M.e == NULL or M.buf == NULL:
        _teardown(M)
        raise MemoryError()
    return 0


cdef void _teardown(Model* M) noexcept nogil:
    free(M.ar)
    free(M.ma)
    free(M.e)
    free(M.buf)
    M.ar = M.ma = M.e = M.buf = NULL


def is_stable(coefs, double margin=1.0):
    cdef double[::1] c = np.ascontiguousarray(coefs, dtype=float)
    cdef int k = c.shape[0]
    cdef double* buf
    if k == 0:
        return True
    buf = <double*> malloc(k * sizeof(double))
    try:
        return bool(_stable(&c[0], k, margin, 1.0, buf))
    finally:
        free(buf)


def css_residuals(w, ar_poly, ma_poly, double mu, int start):
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef double[::1] a = np.ascontiguousarray(ar_poly, dtype=float)
    cdef double[::1] b = np.ascontiguousarray(ma_poly, dtype=float)
    cdef int n = wv.shape[0], na = a.shape[0], nm = b.shape[0]
    cdef int t, k
    cdef double v
    out = np.zeros(n)
    cdef double[::1] e = out
    if start < 0:
        raise ValueError("start must be >= 0")
    for t in range(start, n):
        v = 0.0
        for k in range(min(na, t + 1)):
            if a[k] != 0.0:
                v += a[k] * (wv[t - k] - mu)
        for k in range(1, min(nm, t + 1)):
            if b[k] != 0.0:
                v -= b[k] * e[t - k]
        e[t] = v
    return out


def css_objective(x, w, int p, int q, int P, int Q, int s, bint has_mu, int start, double margin,
                  int count_from=-1):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef Model M
    cdef double f
    _setup(&M, wv, p, q, P, Q, s, has_mu, start, margin, count_from)
    try:
        f = _objective(&xv[0] if xv.shape[0] else NULL, &M)
    finally:
        _teardown(&M)
    return f


cdef void _sort(double* sim, double* fsim, int k, double* tmp) noexcept nogil:
    # stable insertion sort of k+1 vertices by value
    cdef int i, j
    cdef double fv
    for i in range(1, k + 1):
        fv = fsim[i]
        memcpy(tmp, sim + i * k, k * sizeof(double))
        j = i - 1
        while j >= 0 and fsim[j] > fv:
            fsim[j + 1] = fsim[j]
            memcpy(sim + (j + 1) * k, sim + j * k, k * sizeof(double))
            j -= 1
        fsim[j + 1] = fv
        memcpy(sim + (j + 1) * k, tmp, k * sizeof(double))


cdef int _nelder_mead(Model* M, double* sim, double* fsim, int k, int maxiter,
                      double xatol, double frtol, double* work, bint* converged) noexcept nogil:
    cdef double* xbar = work
    cdef double* xr = work + k
    cdef double* xe = work + 2 * k
    cdef double* tmp = work + 3 * k
    cdef double fr, fe, fc, fcc, dx, df, scale
    cdef int i, j, it = 0
    cdef bint shrink
    cdef double* worst = sim + k * k
    for i in range(k + 1):
        fsim[i] = _objective(sim + i * k, M)
    _sort(sim, fsim, k, tmp)
    converged[0] = False
    while it < maxiter:
        dx = 0.0
        df = 0.0
        for i in range(1, k + 1):
            for j in range(k):
                dx = max(dx, fabs(sim[i * k + j] - sim[j]))
            df = max(df, fabs(fsim[i] - fsim[0]))
        scale = max(1.0, fabs(fsim[0]))
        if dx <= xatol and df <= frtol * scale:
            converged[0] = True
            break
        it += 1
        for j in range(k):
            xbar[j] = 0.0
        for i in range(k):
            for j in range(k):
                xbar[j] += sim[i * k + j]
        for j in range(k):
            xbar[j] /= k
            xr[j] = (1 + RHO) * xbar[j] - RHO * worst[j]
        fr = _objective(xr, M)
        shrink = False
        if fr < fsim[0]:
            for j in range(k):
                xe[j] = (1 + RHO * CHI) * xbar[j] - RHO * CHI * worst[j]
            fe = _objective(xe, M)
            if fe < fr:
                memcpy(worst, xe, k * sizeof(double))
                fsim[k] = fe
            else:
                memcpy(worst, xr, k * sizeof(double))
                fsim[k] = fr
        elif fr < fsim[k - 1]:
            memcpy(worst, xr, k * sizeof(double))
            fsim[k] = fr
        elif fr < fsim[k]:
            for j in range(k):
                xe[j] = (1 + PSI * RHO) * xbar[j] - PSI * RHO * worst[j]
            fc = _objective(xe, M)
            if fc <= fr:
                memcpy(worst, xe, k * sizeof(double))
                fsim[k] = fc
            else:
                shrink = True
        else:
            for j in range(k):
                xe[j] = (1 - PSI) * xbar[j] + PSI * worst[j]
            fcc = _objective(xe, M)
            if fcc < fsim[k]:
                memcpy(worst, xe, k * sizeof(double))
                fsim[k] = fcc
            else:
                shrink = True
        if shrink:
            for i in range(1, k + 1):
                for j in range(k):
                    sim[i * k + j] = sim[j] + SIGMA * (sim[i * k + j] - sim[j])
                fsim[i] = _objective(sim + i * k, M)
        _sort(sim, fsim, k, tmp)
    return it


def fit_css(w, int p, int q, int P, int Q, int s, bint has_mu, int start, x0, double step,
            int maxiter, double xatol, double frtol, double margin, int count_from=-1):
    cdef double[::1] wv = np.ascontiguousarray(w, dtype=float)
    cdef double[::1] x = np.array(x0, dtype=float)
    cdef int k = x.shape[0], i
    cdef Model M
    cdef double* sim
    cdef double* fsim
    cdef double* work
    cdef bint converged = True
    cdef int it = 0
    cdef double f
    _setup(&M, wv, p, q, P, Q, s, has_mu, start, margin, count_from)
    if k == 0:
        try:
            f = _objective(NULL, &M)
        finally:
            _teardown(&M)
        return np.zeros(0), f, 0, True
    sim = <double*> malloc((k + 1) * k * sizeof(double))
    fsim = <double*> malloc((k + 1) * sizeof(double))
    work = <double*> malloc(4 * k * sizeof(double))
    try:
        if sim == NULL or fsim == NULL or work == NULL:
            raise MemoryError()
        for i in range(k + 1):
            memcpy(sim + i * k, &x[0], k * sizeof(double))
            if i > 0:
                sim[i * k + i - 1] += step
        with nogil:
            it = _nelder_mead(&M, sim, fsim, k, maxiter, xatol, frtol, work, &converged)
        out = np.empty(k)
        for i in range(k):
            out[i] = sim[i]
        f = fsim[0]
    finally:
        free(sim)
        free(fsim)
        free(work)
        _teardown(&M)
    return out, f, it, bool(converged)
