import numpy as np
import pytest
import scipy.linalg

from conftest import dft_matrix
from shiftinv import (
    BlockToeplitzGram,
    DivergenceError,
    NotPositiveDefiniteError,
    SymToeplitz,
    assemble_gram,
    block_gram_solve,
    cg_solve,
    levinson_solve,
    toeplitz_col_from_weights,
)


def _random_spd_toeplitz(rng, n):
    # autocorrelation of a random sequence is positive definite
    w = np.abs(np.fft.fft(rng.standard_normal(2 * n))) ** 2 + 0.1
    return np.fft.ifft(w).real[:n]


def test_levinson_identity(rng):
    b = rng.standard_normal(6)
    assert np.allclose(levinson_solve(np.eye(6)[0], b), b)


def test_levinson_tridiagonal(rng):
    t = np.zeros(8)
    t[:2] = [2, 1]
    b = rng.standard_normal(8)
    x = levinson_solve(t, b)
    assert np.allclose(x, scipy.linalg.cho_solve(scipy.linalg.cho_factor(scipy.linalg.toeplitz(t)), b), atol=1e-10)


def test_levinson_random_systems(rng):
    for _ in range(100):
        n = int(rng.integers(1, 33))
        t = _random_spd_toeplitz(rng, n)
        b = rng.standard_normal(n)
        x = levinson_solve(SymToeplitz(t), b)
        T = SymToeplitz(t).dense()
        assert np.linalg.norm(T @ x - b) <= 1e-8 * np.linalg.norm(b)
        assert np.allclose(x, np.linalg.solve(T, b), rtol=1e-8, atol=1e-8 * np.abs(x).max())


def test_levinson_from_code_weights(rng):
    p, n = 16, 5
    X = rng.standard_normal((p, 20)) * (rng.random((p, 20)) < 0.2)
    w = (np.abs(np.fft.fft(X, axis=0, norm="ortho")) ** 2).sum(axis=1)
    F = dft_matrix(p)
    T = (F.conj().T @ np.diag(w) @ F)[:n, :n].real * np.sqrt(p)
    b = rng.standard_normal(n)
    x = levinson_solve(toeplitz_col_from_weights(w, n), b)
    assert np.allclose(x, np.linalg.solve(T, b), atol=1e-8)


def test_levinson_not_positive_definite():
    with pytest.raises(NotPositiveDefiniteError):
        levinson_solve([1.0, 2.0, 0.0], np.ones(3))
    with pytest.raises(NotPositiveDefiniteError):
        levinson_solve([0.0, 1.0], np.ones(2))


def test_toeplitz_col_flat_and_dc():
    assert np.allclose(toeplitz_col_from_weights(np.ones(4), 2), [2, 0])
    assert np.allclose(toeplitz_col_from_weights(4 * np.eye(4)[0], 3), 2.0)


def test_toeplitz_col_dense_oracle(rng):
    p, n = 12, 5
    w = np.abs(np.fft.fft(rng.standard_normal(p))) ** 2
    F = dft_matrix(p)
    dense_col = (F.conj().T @ np.diag(w) @ F)[:n, 0]
    assert np.allclose(toeplitz_col_from_weights(w, n), np.sqrt(p) * dense_col.real, atol=1e-12)
    assert np.abs(dense_col.imag).max() < 1e-10


def test_toeplitz_col_size_error():
    with pytest.raises(ValueError):
        toeplitz_col_from_weights(np.ones(4), 5)


def _random_gram(rng, L, n, p=16, N=40):
    Xt = np.fft.fft(rng.standard_normal((L, p, N)), axis=1, norm="ortho")
    return assemble_gram(Xt, n)


def test_gram_structure(rng):
    G = _random_gram(rng, 3, 4)
    D = G.dense()
    assert np.array_equal(D, D.T)
    for a in range(3):
        for b in range(3):
            assert np.allclose(G.block(b, a), G.block(a, b).T)
    L, n = 3, 4
    assert G.parameter_count == n * L + (2 * n - 1) * L * (L - 1) // 2


def test_block_solve_single_block_matches_levinson(rng):
    G = _random_gram(rng, 1, 6)
    v = rng.standard_normal(6)
    x = block_gram_solve(G, v, method="cholesky")
    assert np.allclose(x, levinson_solve(G.cols[0, 0], v), atol=1e-10)
    assert np.allclose(block_gram_solve(G, v), x, atol=1e-10)


def test_block_solve_dense_oracle(rng):
    G = _random_gram(rng, 2, 3)
    v = rng.standard_normal(6)
    x = block_gram_solve(G, v)
    assert np.allclose(x, np.linalg.solve(G.dense(), v), atol=1e-10)


def test_block_solve_identity(rng):
    v = rng.standard_normal(8)
    assert np.allclose(block_gram_solve(BlockToeplitzGram.identity(2, 4), v), v)


def test_block_solve_residual_random(rng):
    for _ in range(20):
        L = int(rng.integers(1, 5))
        n = int(rng.integers(1, 64 // L + 1))
        G = _random_gram(rng, L, n, p=max(2 * n, 8), N=8 * n * L)
        v = rng.standard_normal(n * L)
        x = block_gram_solve(G, v)
        assert np.linalg.norm(G.dense() @ x - v) <= 1e-8 * np.linalg.norm(v)


def test_block_solve_ridge_on_singular():
    cols = np.zeros((1, 1, 3))
    cols[0, 0, :] = 1.0  # all-ones Toeplitz, rank one
    G = BlockToeplitzGram(cols, cols.copy())
    events = []
    x = block_gram_solve(G, np.ones(3), method="cholesky", events=events)
    assert events and np.all(np.isfinite(x))
    with pytest.raises(NotPositiveDefiniteError):
        block_gram_solve(G, np.ones(3), method="cholesky", ridge=False)


def test_cg_identity(rng):
    v = rng.standard_normal(5)
    res = cg_solve(lambda x: x, v)
    assert res.converged and res.n_iter == 1
    assert np.allclose(res.x, v)


def test_cg_agrees_with_cholesky(rng):
    G = _random_gram(rng, 2, 3)
    v = rng.standard_normal(6)
    res = cg_solve(G.matvec, v, tol=1e-12)
    assert np.allclose(res.x, block_gram_solve(G, v, method="cholesky"), atol=1e-6)


def test_cg_ill_conditioned(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    A = Q @ np.diag(np.logspace(0, 6, 30)) @ Q.T
    v = rng.standard_normal(30)
    res = cg_solve(lambda x: A @ x, v, tol=1e-10, max_iter=2000)
    assert res.converged
    exact = np.linalg.solve(A, v)
    assert np.linalg.norm(res.x - exact) <= 1e-3 * np.linalg.norm(exact)


def test_cg_indefinite_is_flagged():
    A = np.diag([1.0, -1.0])
    with pytest.raises(DivergenceError):
        cg_solve(lambda x: A @ x, np.array([1.0, 1.0]))


def test_cg_non_finite():
    with pytest.raises(DivergenceError):
        cg_solve(lambda x: x * np.nan, np.ones(3))


def test_matvec_matches_dense(rng):
    G = _random_gram(rng, 3, 4)
    x = rng.standard_normal(12)
    assert np.allclose(G.matvec(x), G.dense() @ x)
