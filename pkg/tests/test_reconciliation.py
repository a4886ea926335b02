import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from groupcast.errors import DegenerateResiduals, InsufficientSample, SingularSystem
from groupcast.grouping import AttributeSchema, build_structure, build_summing_matrix
from groupcast.reconciliation import (
    BaseForecasts,
    ResidualMatrix,
    WeightSpec,
    bottom_up,
    canonical_method,
    estimate_weights,
    reconcile,
    reconcile_method,
    shrinkage_intensity,
)

S2 = np.array([[1.0, 1.0], [1.0, 0.0], [0.0, 1.0]])


def grid_structure():
    schema = AttributeSchema((("g1", ("A", "B")), ("g2", ("X", "Y"))))
    bottoms = [schema.key(g1=a, g2=b) for a in "AB" for b in "XY"]
    return build_structure(schema, [["g1"], ["g2"]], bottoms)


def projection_oracle(S, W, y):
    """Closed form with explicit inverses, for comparison only."""
    Wi = np.linalg.inv(W)
    return S @ np.linalg.inv(S.T @ Wi @ S) @ S.T @ Wi @ y


def second_moment_oracle(E):
    T, n = E.shape
    W = np.zeros((n, n))
    for t in range(T):
        W += np.outer(E[t], E[t])
    return W / T


def intensity_oracle(E):
    """Loop version of the analytic correlation-shrinkage intensity."""
    T, n = E.shape
    X = E / np.sqrt((E ** 2).mean(axis=0))
    num = den = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            w = X[:, i] * X[:, j]
            r = w.mean()
            num += np.sum((w - r) ** 2) * T / (T - 1) / (T * (T - 1)) * (T - 1) / T
            den += r * r
    return min(1.0, max(0.0, num / den))


class TestWeights:
    def test_single_node_wls(self):
        w = estimate_weights(np.array([[1.0], [-1.0], [1.0], [-1.0]]), "wls")
        assert w.W[0, 0] == 1.0

    def test_second_moment_oracle(self, rng):
        E = rng.normal(size=(30, 3)) + [0.5, -1.0, 0.0]
        w = estimate_weights(E, "mint-sample")
        assert np.max(np.abs(w.W - second_moment_oracle(E))) <= 1e-12
        assert np.array_equal(estimate_weights(E, "wls").W, np.diag(np.diag(w.W)))

    def test_ols_is_identity(self, rng):
        assert np.array_equal(estimate_weights(rng.normal(size=(5, 4)), "ols").W, np.eye(4))

    def test_shrink_endpoints(self, rng):
        E = rng.normal(size=(20, 4))
        one = estimate_weights(E, "mint-shrink", shrink_intensity=1.0)
        assert np.array_equal(one.W, estimate_weights(E, "wls").W)
        zero = estimate_weights(E, "mint-shrink", shrink_intensity=0.0)
        assert np.allclose(zero.W, estimate_weights(E, "mint-sample").W, atol=1e-15)
        with pytest.raises(ValueError):
            estimate_weights(E, "mint-shrink", shrink_intensity=1.5)

    def test_intensity_matches_loop_oracle(self, rng):
        for _ in range(5):
            base = rng.normal(size=(25, 1))
            E = base + 0.7 * rng.normal(size=(25, 4))
            assert shrinkage_intensity(E) == pytest.approx(intensity_oracle(E), abs=1e-12)

    def test_intensity_behaviour(self, rng):
        common = rng.normal(size=(400, 1))
        strong = common + 0.1 * rng.normal(size=(400, 5))
        assert shrinkage_intensity(strong) < 0.05
        assert shrinkage_intensity(rng.normal(size=(10, 5))) > shrinkage_intensity(strong)
        lam = estimate_weights(strong, "mint").shrink_intensity
        assert 0.0 <= lam <= 1.0

    def test_mint_sample_upgraded_when_short(self, rng):
        with pytest.warns(UserWarning, match="mint-shrink"):
            w = estimate_weights(rng.normal(size=(4, 6)), "mint-sample")
        assert w.kind == "mint-shrink"
        assert np.min(np.linalg.eigvalsh(w.W)) > 0

    def test_zero_variance_node_floored(self, rng):
        E = rng.normal(size=(10, 3))
        E[:, 1] = 0.0
        with pytest.warns(DegenerateResiduals):
            w = estimate_weights(E, "wls")
        assert w.W[1, 1] > 0

    def test_insufficient_rows(self):
        with pytest.raises(InsufficientSample):
            estimate_weights(np.ones((1, 3)), "wls")

    def test_weight_spec_validation(self):
        with pytest.raises(ValueError):
            WeightSpec("wls", [[1.0, 0.5], [0.0, 1.0]])
        with pytest.raises(ValueError):
            WeightSpec("bogus", np.eye(2))

    def test_residual_alignment(self):
        R = ResidualMatrix.from_columns([[9.0, 1.0, 2.0, 3.0], [5.0, 6.0], [0.0, np.nan, 8.0]])
        assert np.array_equal(R.matrix, [[3.0, 6.0, 8.0]])
        with pytest.raises(ValueError):
            ResidualMatrix([[1.0, np.nan]])


class TestReconcile:
    def test_two_child_ols(self):
        out = reconcile(BaseForecasts([[100.0], [40.0], [50.0]]), S2, WeightSpec("ols", np.eye(3)))
        assert np.allclose(out.matrix[:, 0], [290 / 3, 130 / 3, 160 / 3], atol=1e-10)
        assert out.matrix[:, 0] == pytest.approx([96.6667, 43.3333, 53.3333], abs=1e-4)
        assert np.allclose(out.discrepancy[:, 0], [10 / 3, -10 / 3, -10 / 3])

    def test_matches_closed_form(self, rng):
        S = build_summing_matrix(grid_structure()).entries
        E = rng.normal(size=(40, 9))
        y = rng.normal(50, 10, size=(9, 3))
        for kind in ("ols", "wls", "mint-sample", "mint-shrink"):
            w = estimate_weights(E, kind)
            out = reconcile(BaseForecasts(y), S, w)
            assert np.allclose(out.matrix, projection_oracle(S, w.W, y), atol=1e-9)

    def test_coherent_input_unchanged(self, rng):
        S = build_summing_matrix(grid_structure())
        y = S.entries @ rng.normal(size=(4, 2))
        for kind in ("ols", "wls", "mint-shrink"):
            w = estimate_weights(rng.normal(size=(30, 9)), kind)
            assert np.allclose(reconcile(BaseForecasts(y), S, w).matrix, y, atol=1e-9)

    def test_weight_scaling_cancels(self, rng):
        S = build_summing_matrix(grid_structure())
        y = BaseForecasts(rng.normal(size=(9, 4)))
        w = estimate_weights(rng.normal(size=(30, 9)), "mint-shrink")
        a = reconcile(y, S, w).matrix
        b = reconcile(y, S, w.scaled(7.3)).matrix
        assert np.max(np.abs(a - b)) <= 1e-10

    def test_idempotent(self, rng):
        S = build_summing_matrix(grid_structure())
        w = estimate_weights(rng.normal(size=(30, 9)), "wls")
        once = reconcile(BaseForecasts(rng.normal(size=(9, 2))), S, w)
        twice = reconcile(BaseForecasts(once.matrix), S, w)
        assert np.max(np.abs(once.matrix - twice.matrix)) <= 1e-9

    def test_special_cases(self, rng):
        S = build_summing_matrix(grid_structure())
        E = rng.normal(size=(30, 9))
        y = BaseForecasts(rng.normal(size=(9, 2)))
        ols = reconcile_method(y, S, "ols").matrix
        assert np.max(np.abs(ols - reconcile(y, S, WeightSpec("ols", np.eye(9))).matrix)) <= 1e-9
        wls = reconcile_method(y, S, "wls", E).matrix
        shrink1 = reconcile(y, S, estimate_weights(E, "mint-shrink", shrink_intensity=1.0)).matrix
        assert np.max(np.abs(wls - shrink1)) <= 1e-9

    def test_bottom_up_as_limit(self, rng):
        S = build_summing_matrix(grid_structure())
        y = BaseForecasts(rng.normal(100, 10, size=(9, 2)))
        d = np.ones(9)
        d[:5] = 1e12
        lim = reconcile(y, S, WeightSpec("wls", np.diag(d))).matrix
        bu = bottom_up(y, S).matrix
        assert np.max(np.abs(lim - bu) / np.abs(bu)) <= 1e-4

    def test_permutation_equivariant(self, rng):
        S = build_summing_matrix(grid_structure()).entries
        E = rng.normal(size=(30, 9))
        y = rng.normal(size=(9, 3))
        w = estimate_weights(E, "mint-shrink")
        base = reconcile(BaseForecasts(y), S, w).matrix
        p = rng.permutation(9)
        out = reconcile(BaseForecasts(y[p]), S[p], WeightSpec("mint-shrink", w.W[np.ix_(p, p)])).matrix
        assert np.allclose(out, base[p], atol=1e-10)

    def test_singular_weights(self):
        W = np.zeros((3, 3))
        with pytest.raises(SingularSystem):
            reconcile(BaseForecasts([[1.0], [2.0], [3.0]]), S2, WeightSpec("mint-sample", W))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            reconcile(BaseForecasts([[1.0], [2.0]]), S2, WeightSpec("ols", np.eye(3)))

    @given(st.integers(0, 2 ** 31), st.sampled_from(["ols", "wls", "mint-sample", "mint-shrink"]))
    @settings(max_examples=50, deadline=None)
    def test_coherence_property(self, seed, kind):
        r = np.random.default_rng(seed)
        S = build_summing_matrix(grid_structure()).entries
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            w = estimate_weights(r.normal(size=(int(r.integers(2, 40)), 9)) * r.uniform(0.1, 10, 9), kind)
        out = reconcile(BaseForecasts(r.normal(0, 100, size=(9, 3))), S, w)
        assert np.max(np.abs(out.matrix - S @ out.bottom_estimates)) <= 1e-8 * np.max(np.abs(out.matrix))


class TestBottomUp:
    def test_two_child(self):
        out = bottom_up(BaseForecasts([[100.0], [40.0], [50.0]]), S2)
        assert np.array_equal(out.matrix[:, 0], [90, 40, 50])

    def test_grid_filter_and_sum(self, rng):
        st_ = grid_structure()
        S = build_summing_matrix(st_)
        y = rng.normal(size=(9, 2))
        out = bottom_up(BaseForecasts(y), S).matrix
        bottom = {k: y[st_.index(k)] for k in st_.bottom}
        for i, node in enumerate(st_.nodes):
            want = sum(v for k, v in bottom.items() if node.covers(k))
            assert np.allclose(out[i], want, atol=1e-12)

    def test_coherent_unchanged(self, rng):
        S = build_summing_matrix(grid_structure()).entries
        y = S @ rng.normal(size=(4, 2))
        assert np.allclose(bottom_up(BaseForecasts(y), S).matrix, y, atol=1e-12)


class TestDispatch:
    def test_aliases(self):
        assert canonical_method("MinT") == "mint-shrink"
        assert canonical_method("bottom_up") == "bottom-up"
        with pytest.raises(ValueError):
            canonical_method("top-down")

    def test_baseline_passthrough(self, rng):
        y = rng.normal(size=(3, 2))
        assert np.array_equal(reconcile_method(BaseForecasts(y), S2, "baseline").matrix, y)

    def test_residuals_required(self, rng):
        with pytest.raises(ValueError):
            reconcile_method(BaseForecasts(rng.normal(size=(3, 1))), S2, "wls")

    def test_negative_flagged(self):
        out = bottom_up(BaseForecasts([[0.0], [-2.0], [1.0]]), S2)
        assert out.negative[:, 0].tolist() == [True, True, False]
