import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinealloc.eigenupdate import EigenDecomp, eigen_rank_one_update
from onlinealloc.ovar import (Ovar, SingularMomentError, delta_grid, dense_ovar_weights,
                              lambda_gradient_sign, lambda_update, ovar_weights, select_delta)
from onlinealloc.windowing import decay_exponents, weighted_second_moment


def _psd(rng, d, rows=None):
    A = rng.standard_normal((rows or d + 2, d))
    return A.T @ A


class TestEigenUpdate:
    def test_zero_vector(self, rng):
        dec = EigenDecomp.of(_psd(rng, 4))
        out = eigen_rank_one_update(dec, np.zeros(4))
        np.testing.assert_array_equal(out.Pi, dec.Pi)
        np.testing.assert_array_equal(out.Q, dec.Q)

    def test_inverse_pair(self, rng):
        M = _psd(rng, 5)
        xi = rng.standard_normal(5)
        dec = eigen_rank_one_update(eigen_rank_one_update(EigenDecomp.of(M), xi, +1), xi, -1)
        assert np.linalg.norm(dec.matrix() - M) <= 1e-8 * np.linalg.norm(M)

    @pytest.mark.parametrize("sign", [1, -1])
    def test_matches_full_decomposition(self, rng, sign):
        for _ in range(50):
            M = _psd(rng, 4)
            xi = rng.standard_normal(4)
            if sign < 0:
                # keep the downdated matrix PSD: remove part of a known rank-one term
                M = M + np.outer(xi, xi)
            target = M + sign * np.outer(xi, xi)
            out = eigen_rank_one_update(EigenDecomp.of(M), xi, sign)
            ref = np.linalg.eigvalsh(target)[::-1]
            scale = np.abs(ref).max()
            np.testing.assert_allclose(out.Pi, ref, atol=1e-8 * scale)
            assert np.linalg.norm(out.matrix() - target) <= 1e-8 * np.linalg.norm(target)
            assert np.linalg.norm(out.Q.T @ out.Q - np.eye(4)) <= 1e-8

    def test_repeated_eigenvalues_deflate(self, rng):
        # rank-deficient moment: many identical (zero) eigenvalues
        M = _psd(rng, 12, rows=3)
        xi = rng.standard_normal(12)
        out = eigen_rank_one_update(EigenDecomp.of(M), xi, +1)
        target = M + np.outer(xi, xi)
        assert np.linalg.norm(out.matrix() - target) <= 1e-8 * np.linalg.norm(target)
        assert np.linalg.norm(out.Q.T @ out.Q - np.eye(12)) <= 1e-8

    def test_downdate_clamps_negative(self):
        dec = EigenDecomp(np.eye(2), np.array([1.0, 0.0]))
        out = eigen_rank_one_update(dec, np.array([1.0, 0.0]), -1)
        assert out.Pi.min() >= 0.0
        np.testing.assert_allclose(out.Pi, [0.0, 0.0], atol=1e-12)

    def test_sign_validation(self):
        with pytest.raises(ValueError):
            eigen_rank_one_update(EigenDecomp(np.eye(2), np.ones(2)), np.ones(2), 2)


class TestWeights:
    def test_identity_is_naive(self):
        for delta in (0.0, 0.3, 5.0):
            np.testing.assert_allclose(ovar_weights(EigenDecomp.of(np.eye(3)), delta), np.full(3, 1 / 3))

    def test_diagonal(self):
        np.testing.assert_allclose(ovar_weights(EigenDecomp.of(np.diag([1.0, 3.0])), 0.0), [0.75, 0.25])

    def test_dominant_delta(self, rng):
        w = ovar_weights(EigenDecomp.of(_psd(rng, 5)), 1e9)
        np.testing.assert_allclose(w, np.full(5, 0.2), atol=1e-6)

    def test_singular(self):
        with pytest.raises(SingularMomentError):
            ovar_weights(EigenDecomp.of(np.diag([1.0, 0.0])), 0.0)

    def test_matches_dense_solve(self, rng):
        M = _psd(rng, 6)
        np.testing.assert_allclose(ovar_weights(EigenDecomp.of(M), 0.7), dense_ovar_weights(M, 0.7),
                                   atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 10_000))
    def test_shrinkage_monotone(self, d, seed):
        rng = np.random.default_rng(seed)
        M = _psd(rng, d, rows=max(1, d - 1))
        dec = EigenDecomp.of(M)
        grid = delta_grid(np.trace(M), d, 25)
        dist = [np.linalg.norm(ovar_weights(dec, g) - 1 / d) for g in grid]
        assert all(b <= a + 1e-12 for a, b in zip(dist, dist[1:]))


class TestGrid:
    def test_three_points(self):
        np.testing.assert_allclose(delta_grid(10, 5, 3), [2, 6, 10])

    def test_single_asset_collapses(self):
        np.testing.assert_allclose(delta_grid(4.0, 1, 5), np.full(5, 4.0))

    def test_endpoints(self):
        np.testing.assert_allclose(delta_grid(1, 2, 2), [0.5, 1])

    def test_bad_trace(self):
        with pytest.raises(ValueError):
            delta_grid(0.0, 3, 4)


def _brute_grid_returns(grid, X, lam, W):
    totals = []
    for delta in grid:
        total = 0.0
        for n in range(W - 1, X.shape[0] - 1):
            M = weighted_second_moment(X[n - W + 1:n + 1], lam)
            total += X[n + 1] @ dense_ovar_weights(M, delta)
        totals.append(total)
    return np.array(totals)


class TestSelectDelta:
    def test_identical_grid(self, rng):
        X = rng.standard_normal((30, 3))
        assert select_delta([0.4, 0.4, 0.4], X, 0.9, 10) == 0.4

    def test_dominant_asset_prefers_least_shrinkage(self, rng):
        T, W = 60, 20
        X = np.column_stack([0.01 + 0.001 * rng.standard_normal(T),
                             0.02 * rng.standard_normal(T),
                             0.02 * rng.standard_normal(T)])
        M = weighted_second_moment(X[:W], 0.95)
        grid = delta_grid(np.trace(M), 3, 6)
        totals = _brute_grid_returns(grid, X, 0.95, W)
        assert np.argmax(totals) == 0
        assert select_delta(grid, X, 0.95, W) == grid[0]

    def test_matches_brute_force(self, rng):
        X = 0.01 * rng.standard_normal((40, 4))
        grid = delta_grid(np.trace(weighted_second_moment(X[:15], 0.9)), 4, 5)
        totals = _brute_grid_returns(grid, X, 0.9, 15)
        assert select_delta(grid, X, 0.9, 15) == grid[int(np.argmax(totals))]

    def test_zero_returns_tie_to_smallest(self):
        assert select_delta([0.1, 0.2, 0.3], np.zeros((30, 2)), 0.9, 10) == 0.1

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            select_delta([], np.zeros((30, 2)), 0.9, 10)


class TestLambdaUpdate:
    def test_all_positive(self):
        assert lambda_update(0.5, 4, 10, signs=[1.0] * 10) == pytest.approx(0.5 + 1 / 4)

    def test_clamp(self):
        assert lambda_update(0.7, 2, 5, signs=[1.0] * 5) == 0.7  # candidate 1.2

    def test_cancelling(self):
        assert lambda_update(0.3, 3, 4, signs=[1, -1, 1, -1]) == 0.3

    def test_from_path_uses_derivative_sign(self, rng):
        rows = 0.01 * rng.standard_normal((6, 2))
        beta = np.array([0.5, 0.5])
        lam = 0.6
        # finite-difference derivative of sum (1 - lam^p s)^2
        s, p = rows @ beta, decay_exponents(6)
        g = lambda l: np.sum((1 - l**p * s) ** 2)  # noqa: E731
        fd = (g(lam + 1e-6) - g(lam - 1e-6)) / 2e-6
        assert lambda_gradient_sign(rows, beta, lam) == np.sign(fd)
        expected = lam + np.sign(fd) * 3 / (1 * 3)
        expected = expected if 0 < expected < 1 else lam
        assert lambda_update(lam, 1, 3, path=[(rows, beta)] * 3) == expected

    @settings(max_examples=200, deadline=None)
    @given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 50), st.integers(1, 300),
           st.lists(st.sampled_from([-1.0, 0.0, 1.0]), min_size=1, max_size=300))
    def test_stays_in_unit_interval(self, lam, m, l, signs):
        out = lambda_update(lam, m, l, signs=signs[:l])
        assert 0.0 < out < 1.0


class TestOvarStep:
    def test_identical_rows_constant_weights(self, rng):
        x = rng.standard_normal(3)
        model = Ovar(3, W=5, lam=0.9, delta=0.1, adapt_lambda=False)
        seen = []
        for _ in range(12):
            model.step(x)
            M = sum(0.9**p for p in range(min(model.window.n, 5))) * np.outer(x, x)
            assert np.linalg.norm(model.decomp.matrix() - M) <= 1e-10 * np.linalg.norm(M)
            if model.window.full:
                seen.append(model.weights())
        for w in seen[1:]:
            np.testing.assert_allclose(w, seen[0], atol=1e-10)

    def test_one_step_from_full_window(self, rng):
        X = rng.standard_normal((9, 4))
        model = Ovar(4, W=8, lam=0.8, delta=0.5, adapt_lambda=False).warm_start(X[:8])
        model.step(X[8])
        ref = dense_ovar_weights(weighted_second_moment(X[1:], 0.8), 0.5)
        np.testing.assert_allclose(model.weights(), ref, atol=1e-8)

    def test_huge_delta_pins_naive(self, rng):
        model = Ovar(4, W=10, lam=0.9, delta=1e9, adapt_lambda=False)
        for x in rng.standard_normal((30, 4)):
            model.step(x)
            if model.window.full:
                np.testing.assert_allclose(model.weights(), np.full(4, 0.25), atol=1e-8)

    def test_training_then_rebalance(self, rng):
        X = 0.01 * rng.standard_normal((120, 3))
        model = Ovar(3, W=30, lam=0.5, G=10)
        for x in X[:60]:
            model.step(x)
        model.finish_training(X[:60])
        assert model.delta in model.grid
        for x in X[60:]:
            model.step(x)
        lam_before = model.lam
        model.rebalance()
        assert 0 < model.lam < 1
        assert model.m == 1
        assert model.delta in model.grid
        np.testing.assert_allclose(model.decomp.matrix(),
                                   weighted_second_moment(model.window, model.lam), atol=1e-12)
        assert lam_before != model.lam or model._signs == []
