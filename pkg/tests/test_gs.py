import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from mdgs.gs import (
    check_covariance, cholesky_psd, innovations_variances, ldl, sequential_chain,
    vector_gs_degenerate, vector_sequential_chain,
)
from oracles import gram_schmidt_variances, gram_schmidt_vectors


@st.composite
def covariances(draw, min_size=1, max_size=5, rank_drop=0):
    m = draw(st.integers(min_size, max_size))
    r = max(1, m - draw(st.integers(0, rank_drop)))
    a = draw(hnp.arrays(np.float64, (m, r), elements=st.floats(-3, 3)))
    k = a @ a.T + (np.eye(m) * 0.1 if rank_drop == 0 else 0.0)
    return k


@given(covariances())
def test_ldl_reproduces_k_and_matches_gram_schmidt(k):
    dec = ldl(k)
    assert np.allclose(dec.L @ np.diag(dec.D) @ dec.L.T, k, atol=1e-9 * max(1, np.abs(k).max()))
    assert np.allclose(dec.D, gram_schmidt_variances(k), rtol=1e-6, atol=1e-9)
    L, D = gram_schmidt_vectors(k)
    assert np.allclose(dec.L, L, atol=1e-6)
    assert np.allclose(np.diag(dec.L), 1.0)
    assert np.allclose(np.triu(dec.L, 1), 0.0)


@given(covariances())
def test_predictors_are_linear_mmse(k):
    dec = ldl(k)
    for i in range(1, k.shape[0]):
        want = np.linalg.solve(k[:i, :i], k[:i, i])
        assert np.allclose(dec.predictors[i], want, atol=1e-6 * max(1, np.abs(want).max()))


@given(covariances(min_size=2, rank_drop=3))
def test_singular_covariance_gives_exact_zero_pivots(k):
    dec = ldl(k)
    assert np.all(dec.D >= 0)
    ev = np.linalg.eigvalsh(k)
    lam = max(ev[-1], 0.0)
    err = np.max(np.abs(dec.L @ np.diag(dec.D) @ dec.L.T - k))
    # a dropped pivot d <= 1e-9 lam discards a cross-covariance of at most sqrt(d K_jj)
    assert err <= k.shape[0] * np.sqrt(1e-9 * lam * np.max(np.diag(k))) + 1e-9 * max(1, lam)
    # pivot count and rank agree when no eigenvalue sits near the zero threshold
    if not np.any((ev > 1e-13 * lam) & (ev < 1e-6 * lam)):
        assert int(np.sum(dec.D > 0)) == np.linalg.matrix_rank(k, tol=1e-9 * lam)


def test_duplicate_variable_is_pass_through():
    k = np.array([[2.0, 2.0, 1.0], [2.0, 2.0, 1.0], [1.0, 1.0, 3.0]])
    dec = ldl(k)
    assert dec.D[1] == 0.0
    assert dec.pass_through.tolist() == [False, True, False]
    assert innovations_variances(k)[2] == pytest.approx(2.5)


def test_innovations_are_uncorrelated():
    k = np.array([[1.0, 0.8, 0.3], [0.8, 1.0, 0.5], [0.3, 0.5, 1.0]])
    x = np.random.default_rng(0).multivariate_normal(np.zeros(3), k, size=200_000)
    b = ldl(k).innovations(x)
    c = np.cov(b.T)
    assert np.allclose(c - np.diag(np.diag(c)), 0.0, atol=0.01)
    assert np.allclose(np.diag(c), ldl(k).D, rtol=0.02)


def test_check_covariance_rejects_bad_input():
    with pytest.raises(ValueError, match="square"):
        check_covariance(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="symmetric"):
        check_covariance([[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError, match="indefinite"):
        check_covariance([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ValueError):
        check_covariance([[np.nan]])


def test_sequential_chain_matches_covariance():
    # uniform first variable: the chain must still reproduce K
    k = np.array([[1.0, 1.0, 0.9], [1.0, 1.2, 0.95], [0.9, 0.95, 1.1]])
    x1 = np.random.default_rng(3).uniform(-np.sqrt(3), np.sqrt(3), 500_000)
    out = sequential_chain(k, x1, seed=9)
    emp = out.T @ out / out.shape[0]
    assert np.max(np.abs(emp - k)) < 0.01


def test_sequential_chain_pass_through_stage():
    k = np.array([[1.0, 1.0], [1.0, 1.0]])
    x1 = np.random.default_rng(0).normal(size=1000)
    out = sequential_chain(k, x1)
    assert np.array_equal(out[:, 1], out[:, 0])


def test_degenerate_subspace_basis_is_deterministic():
    kb = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 0.5]])
    sub = vector_gs_degenerate(kb)
    assert sub.rank == 2
    assert np.allclose(sub.eigenvalues, [2.0, 0.5])
    assert np.allclose(sub.basis.T @ sub.basis, np.eye(3))
    for c in range(3):
        col = sub.basis[:, c]
        assert col[np.argmax(np.abs(col))] > 0
    again = vector_gs_degenerate(kb.copy())
    assert np.array_equal(sub.basis, again.basis)


@pytest.mark.parametrize("shaping", ["cholesky", "eigen"])
def test_vector_chain_matches_block_covariance(shaping):
    rng = np.random.default_rng(5)
    a = rng.normal(size=(6, 6))
    k = a @ a.T / 6 + 0.2 * np.eye(6)
    x1 = rng.multivariate_normal(np.zeros(2), k[:2, :2], size=300_000)
    out = vector_sequential_chain(k, 2, x1, seed=4, shaping=shaping)
    emp = out.T @ out / out.shape[0]
    assert np.max(np.abs(emp - k)) < 0.03 * np.abs(k).max()


def test_vector_chain_singular_innovation():
    # block 2 = block 1 plus noise on a single direction only
    k11 = np.eye(2)
    kb = np.array([[0.5, 0.5], [0.5, 0.5]])
    k = np.block([[k11, k11], [k11, k11 + kb]])
    x1 = np.random.default_rng(2).normal(size=(300_000, 2))
    out = vector_sequential_chain(k, 2, x1, seed=1)
    emp = out.T @ out / out.shape[0]
    assert np.max(np.abs(emp - k)) < 0.02
    noise = out[:, 2:] - out[:, :2]
    # no noise orthogonal to the (1, 1) direction
    assert np.max(np.abs(noise[:, 0] - noise[:, 1])) < 1e-9


def test_cholesky_psd_handles_singular():
    k = np.array([[1.0, 1.0], [1.0, 1.0]])
    a = cholesky_psd(k)
    assert np.allclose(a @ a.T, k)


@pytest.mark.parametrize("k", [
    [[2.72738254e-315, 2.72738254e-315], [2.72738254e-315, 2.72738254e-315]],
    [[2.72738254e-315, 3.69281907e-158], [3.69281907e-158, 1.0]],
    [[0.0, 0.0], [0.0, 0.0]],
])
def test_predictors_stay_finite_at_extreme_scales(k):
    dec = ldl(k)
    assert all(np.all(np.isfinite(p)) for p in dec.predictors)
    assert np.all(np.isfinite(dec.L))
