import numpy as np
import pytest

from shiftinv import (
    WaveletConfigError,
    WaveletDict,
    WaveletStage,
    check_wavelet_config,
    d4_filters,
    haar_filters,
    image_patches,
    omp_batch,
    procedural_images,
    project_topk,
    remove_dc,
    stage_ls_update,
    wavelet_apply,
    wdla_fit,
)


def _stage_dense(g, h, size):
    """[G S, H S] from the definition: column i holds g (resp. h) shifted by 2i."""
    n = len(g)
    gp = np.zeros(size)
    hp = np.zeros(size)
    gp[:n], hp[:n] = g, h
    half = size // 2
    C = np.zeros((size, size))
    for i in range(half):
        C[:, i] = np.roll(gp, 2 * i)
        C[:, half + i] = np.roll(hp, 2 * i)
    return C


def _cascade_dense(stages, p):
    W = np.eye(p)
    size = p
    for g, h in stages:
        Wk = np.eye(p)
        Wk[:size, :size] = _stage_dense(g, h, size)
        W = W @ Wk
        size //= 2
    return W


def _random_stages(rng, m, n):
    return [tuple(rng.standard_normal((2, n))) for _ in range(m)]


def test_filter_coefficients():
    g, h = haar_filters()
    assert np.allclose(g, [1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert np.allclose(h, [1 / np.sqrt(2), -1 / np.sqrt(2)])
    g, h = d4_filters()
    s3, den = np.sqrt(3), 4 * np.sqrt(2)
    assert np.allclose(g, np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / den)
    assert np.allclose(h, np.array([1 - s3, -(3 - s3), 3 + s3, -(1 + s3)]) / den)


@pytest.mark.parametrize("filters, m", [(haar_filters, 6), (d4_filters, 5)])
def test_cascade_orthonormal(filters, m):
    W = _cascade_dense([filters()] * m, 64)
    assert np.abs(W.T @ W - np.eye(64)).max() < 1e-10
    wd = WaveletDict([filters()] * m, 64)
    assert np.abs(wd.transform() - W).max() < 1e-12


def test_identity_stages_interleave():
    wd = WaveletDict([WaveletStage.identity(2)], 8)
    W = wd.transform()
    # a permutation: every column and row holds a single 1
    assert np.array_equal(np.sort(W, axis=0)[-1], np.ones(8))
    assert np.array_equal(W.T @ W, np.eye(8))
    assert W[:, 0].argmax() == 0 and W[:, 4].argmax() == 1


def test_haar_synthesis_column():
    p = 16
    wd = WaveletDict([haar_filters()] * 4, p)
    col = wavelet_apply(wd, np.eye(p)[0])
    assert np.allclose(col, _cascade_dense([haar_filters()] * 4, p)[:, 0])
    assert np.allclose(np.abs(col), 1 / np.sqrt(p))


def test_apply_matches_dense_random(rng):
    stages = _random_stages(rng, 2, 4)
    wd = WaveletDict(stages, 16, norm_diag=rng.uniform(0.5, 2, 16))
    X = rng.standard_normal((16, 5))
    expected = _cascade_dense(stages, 16) @ (wd.norm_diag[:, None] * X)
    assert np.allclose(wavelet_apply(wd, X), expected, atol=1e-12)
    assert np.allclose(wd.matrix() @ X, expected, atol=1e-12)


def test_apply_dimension_mismatch(rng):
    wd = WaveletDict(_random_stages(rng, 1, 2), 8)
    with pytest.raises(ValueError):
        wavelet_apply(wd, np.ones((6, 2)))


def test_multiply_count_bound(rng):
    wd = WaveletDict(_random_stages(rng, 3, 4), 32)
    counter = {}
    N = 7
    wavelet_apply(wd, rng.standard_normal((32, N)), counter=counter)
    assert counter["multiplies"] <= 2 * wd.n * sum(wd.sizes) * N


def test_degrees_of_freedom(rng):
    wd = WaveletDict(_random_stages(rng, 3, 4), 32)
    assert wd.dof == 2 * 4 * 3 == wd.params().size


def _stage_oracle(stages, p, d, k, Y, X):
    """Dense LS over the 2n taps of stage k; the model is affine in them."""
    n = len(stages[0][0])

    def model(theta):
        st = list(stages)
        st[k - 1] = (theta[:n], theta[n:])
        return (_cascade_dense(st, p) @ (d[:, None] * X)).ravel()

    base = model(np.zeros(2 * n))
    A = np.stack([model(e) - base for e in np.eye(2 * n)], axis=1)
    return np.linalg.lstsq(A, Y.ravel() - base, rcond=None)[0]


@pytest.mark.parametrize("p, m, n, k", [(16, 2, 4, 1), (16, 2, 4, 2), (32, 3, 3, 2), (32, 3, 4, 3), (8, 1, 8, 1)])
def test_stage_update_matches_dense_ls(rng, p, m, n, k):
    stages = _random_stages(rng, m, n)
    d = rng.uniform(0.5, 2, p)
    wd = WaveletDict(stages, p, norm_diag=d)
    N = 4 * p
    Y = rng.standard_normal((p, N))
    X = rng.standard_normal((p, N)) * (rng.random((p, N)) < 0.5)
    g, h = stage_ls_update(wd, k, Y, X)
    ref = _stage_oracle(stages, p, d, k, Y, X)
    assert np.allclose(np.concatenate([g, h]), ref, atol=1e-7)


def test_stage_update_descends_from_perturbed_haar(rng):
    p = 16
    truth = WaveletDict([haar_filters()] * 4, p)
    X = project_topk(rng.standard_normal((p, 200)), 3).toarray()
    Y = truth.matrix() @ X
    g, h = haar_filters()
    pert = [(g + 0.1 * rng.standard_normal(2), h + 0.1 * rng.standard_normal(2))] * 4
    wd = WaveletDict(pert, p)
    before = np.sum((Y - wd.matrix() @ X) ** 2)
    for k in range(1, 5):
        wd = wd.with_stage(k, *stage_ls_update(wd, k, Y, X))
    after = np.sum((Y - wd.matrix() @ X) ** 2)
    assert after < before


def test_stage_index_checked(rng):
    wd = WaveletDict(_random_stages(rng, 2, 2), 8)
    with pytest.raises(ValueError):
        stage_ls_update(wd, 3, np.zeros((8, 2)), np.zeros((8, 2)))


@pytest.mark.parametrize(
    "p, m, n, init",
    [(16, 0, 2, None), (24, 4, 2, None), (16, 2, 9, None), (16, 2, 1, None), (64, 6, 4, "haar"), (64, 6, 4, "d4")],
)
def test_config_errors(p, m, n, init):
    with pytest.raises(WaveletConfigError):
        check_wavelet_config(p, m, n, init)


def test_valid_configs():
    check_wavelet_config(64, 6, 2, "haar")
    check_wavelet_config(64, 5, 4, "d4")
    check_wavelet_config(24, 3, 3)


def _image_data(N=1024):
    Y = np.hstack([image_patches(img, 8) for img in procedural_images()])
    Y = remove_dc(Y)[0]
    return Y[:, :: max(1, Y.shape[1] // N)]


def test_haar_full_sparsity_is_exact(rng):
    Y = rng.standard_normal((64, 50))
    _, _, rep = wdla_fit(Y, 6, 2, 64, 2, init="haar")
    assert rep.epsilon[0] < 1e-20 and rep.epsilon[-1] < 1e-20


def test_orthonormal_omp_equals_topk(rng):
    wd = WaveletDict([d4_filters()] * 5, 64).normalized()
    Y = rng.standard_normal((64, 30))
    D = wd.matrix()
    assert np.allclose(omp_batch(D, Y, 6).toarray(), project_topk(D.T @ Y, 6).toarray(), atol=1e-10)


def test_d4_start_improves_on_fixed_d4():
    Y = _image_data()
    wd, code, rep = wdla_fit(Y, 5, 4, 6, 20, init="d4")
    assert rep.epsilon[-1] < rep.epsilon[0]
    assert rep.dictionary_steps_monotone()
    assert np.allclose(np.linalg.norm(wd.matrix(), axis=0), 1.0, atol=1e-10)


@pytest.mark.slow
def test_haar_start_not_worse_than_random():
    Y = _image_data(4096)
    haar = wdla_fit(Y, 6, 2, 8, 100, init="haar")[2].epsilon[-1]
    rand = np.mean([wdla_fit(Y, 6, 2, 8, 100, init="random", seed=s)[2].epsilon[-1] for s in range(4)])
    assert haar <= rand + 1.0


@pytest.mark.parametrize("init", ["svd", "random"])
def test_fit_invariants(init):
    Y = _image_data(512)
    wd, code, rep = wdla_fit(Y, 3, 4, 6, 15, init=init, early_stop=False)
    assert rep.dictionary_steps_monotone()
    assert np.allclose(np.linalg.norm(wd.matrix(), axis=0), 1.0, atol=1e-10)
    assert wd.dof == 2 * 4 * 3
    R = Y - wd.matrix() @ code.toarray()
    assert np.isclose(100 * np.sum(R**2) / np.sum(Y**2), rep.epsilon[-1])


def test_fit_errors(rng):
    Y = rng.standard_normal((16, 10))
    with pytest.raises(WaveletConfigError):
        wdla_fit(Y, 2, 2, 17, 3)
    with pytest.raises(WaveletConfigError):
        wdla_fit(Y, 3, 2, 4, 3, init="haar")
    with pytest.raises(ValueError):
        wdla_fit(Y, 2, 2, 4, 0)
