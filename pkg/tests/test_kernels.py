import importlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupcast import _pykernels as py
from groupcast import kernels

try:
    ck = importlib.import_module("groupcast._ckernels")
except ImportError:  # pragma: no cover - extension not built
    ck = None

needs_c = pytest.mark.skipif(ck is None, reason="compiled kernels not built")


def root_moduli(coefs):
    """Oracle: moduli of the roots of 1 - sum c_i z**i via numpy.roots."""
    poly = np.trim_zeros(np.concatenate([[1.0], -np.asarray(coefs, dtype=float)]), "b")
    if poly.size == 1:
        return np.array([np.inf])
    return np.abs(np.roots(poly[::-1]))


def residuals_loop(w, ar, ma, mu, start):
    """Oracle: the CSS recursion written as explicit loops."""
    n = len(w)
    e = np.zeros(n)
    for t in range(start, n):
        acc = 0.0
        for k in range(len(ar)):
            if t - k >= 0:
                acc += ar[k] * (w[t - k] - mu)
        for k in range(1, len(ma)):
            if t - k >= start:
                acc -= ma[k] * e[t - k]
        e[t] = acc
    return e


coef_lists = st.lists(st.floats(-1.5, 1.5).map(lambda x: round(x, 6)), min_size=0, max_size=4)


@given(coef_lists)
@settings(max_examples=200, deadline=None)
def test_is_stable_matches_root_oracle(coefs):
    r = root_moduli(coefs)
    # cases sitting on the unit circle are decided by rounding
    if np.min(np.abs(r - 1.0)) < 1e-6:
        return
    assert py.is_stable(np.array(coefs)) == bool(np.all(r > 1.0))


@needs_c
@given(coef_lists, st.floats(1.0, 1.2))
@settings(max_examples=200, deadline=None)
def test_is_stable_backends_agree(coefs, margin):
    c = np.array(coefs)
    assert ck.is_stable(c, margin) == py.is_stable(c, margin)


def test_is_stable_examples():
    assert py.is_stable(np.array([0.5]))
    assert not py.is_stable(np.array([1.0]))
    assert not py.is_stable(np.array([0.9995]), 1.001)
    assert py.is_stable(np.array([]))
    # 1 - 1.5z + 0.56z^2 = (1 - 0.7z)(1 - 0.8z)
    assert py.is_stable(np.array([1.5, -0.56]))
    # (1 - 1.25z)(1 - 0.4z) has a root at 0.8
    assert not py.is_stable(np.array([1.65, -0.5]))


@pytest.mark.parametrize("start", [0, 1, 3, 13])
def test_css_residuals_match_loop_oracle(backend, start, rng):
    w = rng.normal(size=60)
    ar = kernels.ar_polynomial(np.array([0.4, -0.2]), np.array([0.3]), 12)
    ma = kernels.ma_polynomial(np.array([0.5]), np.array([-0.3]), 12)
    got = kernels.css_residuals(w, ar, ma, 0.25, start)
    assert np.allclose(got, residuals_loop(w, ar, ma, 0.25, start), atol=1e-12)


def test_polynomials_expand_seasonal_products():
    ar = py.ar_polynomial(np.array([0.5]), np.array([0.2]), 4)
    # (1 - 0.5L)(1 - 0.2L^4) = 1 - 0.5L - 0.2L^4 + 0.1L^5
    assert np.allclose(ar, [1, -0.5, 0, 0, -0.2, 0.1])
    ma = py.ma_polynomial(np.array([0.3]), np.array([0.6]), 2)
    assert np.allclose(ma, [1, 0.3, 0.6, 0.18])


@needs_c
@pytest.mark.parametrize("count_from", [-1, 0, 5])
def test_objective_backends_agree(rng, count_from):
    w = rng.normal(size=120)
    for _ in range(20):
        x = rng.uniform(-0.6, 0.6, size=5)
        args = (w, 1, 1, 1, 1, 4, True, 0, 1.001, count_from)
        a = py.css_objective(x, *args)
        b = ck.css_objective(x, *args)
        if np.isinf(a):
            assert np.isinf(b)
        else:
            assert b == pytest.approx(a, rel=1e-12)


@needs_c
def test_fit_css_backends_agree(rng):
    w = rng.normal(size=150)
    x0 = np.zeros(3)
    a = py.fit_css(w, 1, 1, 0, 0, 1, True, 0, x0, 0.1, 2000, 1e-6, 1e-10, 1.001, 1)
    b = ck.fit_css(w, 1, 1, 0, 0, 1, True, 0, x0, 0.1, 2000, 1e-6, 1e-10, 1.001, 1)
    assert np.allclose(a[0], b[0], atol=1e-8)
    assert a[1] == pytest.approx(b[1], rel=1e-10)
    assert a[3] and b[3]


def test_objective_is_infinite_outside_stationary_region():
    w = np.random.default_rng(0).normal(size=30)
    assert np.isinf(py.css_objective(np.array([1.2]), w, 1, 0, 0, 0, 1, False, 0, 1.001))
    assert np.isinf(py.css_objective(np.array([-1.0005]), w, 0, 1, 0, 0, 1, False, 0, 1.001))


def test_backend_selected_at_import():
    assert kernels.BACKEND in ("cython", "python")
