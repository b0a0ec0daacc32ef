import numpy as np
import pytest

from onlinealloc.denoise import denoised_latest, truncated_svd


def test_exact_rank_one_is_unchanged(rng):
    X = np.outer(rng.standard_normal(5), rng.standard_normal(3))
    np.testing.assert_allclose(truncated_svd(X, 1), X, atol=1e-12)
    np.testing.assert_allclose(denoised_latest(X, 1), X[-1], atol=1e-12)


def test_diagonal_keeps_largest():
    np.testing.assert_allclose(truncated_svd(np.diag([3.0, 1.0]), 1), np.diag([3.0, 0.0]), atol=1e-15)


@pytest.mark.parametrize("rank", [1, 2, 3])
def test_eckart_young_residual(rng, rank):
    X = rng.standard_normal((6, 4))
    s = np.linalg.svd(X, compute_uv=False)
    resid = np.linalg.norm(X - truncated_svd(X, rank)) ** 2
    assert resid == pytest.approx(np.sum(s[rank:] ** 2), rel=1e-10)


def test_orthogonal_rows_projected(rng):
    # rows are orthogonal, so the right singular vectors are the normalized rows
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    X = Q[:3] * np.array([3.0, 2.0, 1.0])[:, None]
    latest = denoised_latest(X, 2)
    # smallest singular direction is the last row itself: it is removed entirely
    np.testing.assert_allclose(latest, np.zeros(4), atol=1e-12)
    X2 = Q[:3] * np.array([1.0, 2.0, 3.0])[:, None]
    np.testing.assert_allclose(denoised_latest(X2, 2), X2[-1], atol=1e-12)


def test_full_rank_last_row_changes(rng):
    X = rng.standard_normal((5, 4))
    r = min(X.shape) - 1
    V = np.linalg.svd(X)[2][:r]
    expected = X[-1] @ V.T @ V
    latest = denoised_latest(X, r)
    np.testing.assert_allclose(latest, expected, atol=1e-12)
    assert np.linalg.norm(latest - X[-1]) > 1e-3


def test_idempotent(rng):
    X = rng.standard_normal((8, 5))
    Xh = truncated_svd(X, 2)
    np.testing.assert_allclose(truncated_svd(Xh, 2), Xh, atol=1e-10)


def test_beats_random_candidates(rng):
    for rank in (1, 2):
        X = rng.standard_normal((3, 3))
        best = np.linalg.norm(X - truncated_svd(X, rank))
        for _ in range(1000):
            C = rng.standard_normal((3, rank)) @ rng.standard_normal((rank, 3))
            assert np.linalg.norm(X - C) >= best - 1e-12


def test_norm_never_grows(rng):
    for _ in range(50):
        X = rng.standard_normal((7, 4))
        assert np.linalg.norm(truncated_svd(X, 2)) <= np.linalg.norm(X) + 1e-12


@pytest.mark.parametrize("rank", [0, 3, 5])
def test_invalid_rank(rank):
    with pytest.raises(ValueError):
        truncated_svd(np.ones((3, 4)), rank)


def test_non_finite():
    X = np.ones((3, 3))
    X[0, 0] = np.nan
    with pytest.raises(ValueError):
        denoised_latest(X, 1)
