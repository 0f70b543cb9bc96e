"""Unions of circulant dictionaries.

:func:`ucirc_fit` updates all ``L`` circulants at once by solving, for each
frequency bin, an ``L``-variable complex least-squares problem.
:func:`ucdla_block_fit` is the sequential block-coordinate baseline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circulant import cdla_spectrum_update, union_apply, union_matrix
from .data import remove_dc
from .report import FitReport, frobenius2, should_stop
from .sparse import SparseCode, omp_batch
from .spectral import hermitian_mirror

__all__ = [
    "UnionCirculantDict",
    "per_bin_ls_update",
    "union_spectra_update",
    "rescue_unused_block",
    "ucirc_fit",
    "ucdla_block_fit",
]


@dataclass
class UnionCirculantDict:
    """``D = [circ(c_1) ... circ(c_L)]`` with unit-norm generators (rows of ``generators``)."""

    generators: np.ndarray

    def __post_init__(self):
        self.generators = np.atleast_2d(np.asarray(self.generators, dtype=float))

    @property
    def L(self):
        return self.generators.shape[0]

    @property
    def n(self):
        return self.generators.shape[1]

    @property
    def spectra(self):
        return np.fft.fft(self.generators, axis=1)

    def matrix(self):
        return union_matrix(self.generators)

    def apply(self, X):
        return union_apply(self.generators, X)


def _solve_bins(A, b, events=None, label="ucirc"):
    """Batched complex least squares: for each bin k minimize ||b_k - A_k^T x_k||.

    ``A`` has shape ``(K, L, N)``, ``b`` shape ``(K, N)``.  Rank-deficient
    bins get a 1e-12 relative ridge (approximately the minimum-norm solution).
    """
    G = np.einsum("kln,kmn->klm", A.conj(), A)
    rhs = np.einsum("kln,kn->kl", A.conj(), b)
    sv = np.linalg.svd(G, compute_uv=False)
    top = sv[:, 0]
    bad = sv[:, -1] <= 1e-12 * np.maximum(top, np.finfo(float).tiny)
    if bad.any():
        L = G.shape[1]
        lam = 1e-12 * np.maximum(top[bad], 1e-300)
        G[bad] += lam[:, None, None] * np.eye(L)
        if events is not None:
            events.append(f"{label}: ridge applied to {int(bad.sum())} rank-deficient bins")
    return np.linalg.solve(G, rhs[..., None])[..., 0]


def per_bin_ls_update(ytilde_k, xtilde_k, events=None):
    """Jointly optimal eigenvalues ``sigma_k^(1..L)`` for one frequency bin.

    ``ytilde_k``: length-N row of the transformed data; ``xtilde_k``: ``(L, N)``
    matching rows of the ``L`` transformed code blocks.
    """
    y = np.asarray(ytilde_k, dtype=complex)
    X = np.atleast_2d(np.asarray(xtilde_k, dtype=complex))
    if X.shape[1] != y.size:
        raise ValueError("code rows and data row must have the same length")
    return _solve_bins(X[None], y[None], events)[0]


def union_spectra_update(Ytilde, Xtilde_blocks, events=None):
    """Solve every independent bin ``k = 1..n//2``, zero the DC bin, mirror the rest.

    ``Ytilde``: ``(n, N)``; ``Xtilde_blocks``: ``(L, n, N)``.  Returns ``(L, n)`` spectra.
    """
    Yt = np.asarray(Ytilde)
    Xt = np.asarray(Xtilde_blocks)
    L, n, _ = Xt.shape
    bins = np.arange(1, n // 2 + 1)
    sigma = np.zeros((L, n), dtype=complex)
    if bins.size:
        A = np.transpose(Xt[:, bins, :], (1, 0, 2))
        sigma[:, bins] = _solve_bins(A, Yt[bins], events).T
    return hermitian_mirror(sigma.T).T


def rescue_unused_block(R, seed=0):
    """Unit vector along the dominant left singular direction of the residual ``R``.

    Falls back to a seeded random unit vector when ``R`` is zero.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    U, sv, _ = np.linalg.svd(R, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        v = np.random.default_rng(seed).standard_normal(R.shape[0])
        return v / np.linalg.norm(v)
    return U[:, 0].copy()


def _init_generators(Y, L, rng):
    n = Y.shape[0]
    U, sv, _ = np.linalg.svd(Y, full_matrices=False)
    gens = rng.standard_normal((L, n))
    keep = min(L, int(np.sum(sv > 1e-10 * max(sv[0], 1e-300))) if sv.size else 0)
    gens[:keep] = U[:, :keep].T
    return gens / np.linalg.norm(gens, axis=1, keepdims=True)


def _objective(Y, D, X):
    return frobenius2(Y - D @ X)


def _code(Y, gens, s, mask, report, rng, theta, rescue, D=None):
    L, n = gens.shape
    if D is None:
        D = union_matrix(gens)
    X = omp_batch(D, Y, s, mask=mask).toarray()
    if not rescue:
        return gens, X
    energy = (X.reshape(L, n, -1) ** 2).sum(axis=(1, 2))
    weak = np.flatnonzero(energy <= theta * energy.max())
    if weak.size == 0 or weak.size == L:
        return gens, X
    gens = gens.copy()
    Xb = X.reshape(L, n, -1)
    for l in weak:
        others = np.delete(np.arange(L), l)
        R = Y - union_apply(gens[others], Xb[others].reshape(-1, Y.shape[1]))
        gens[l] = rescue_unused_block(R, seed=int(rng.integers(2**31)))
    report.events.append(f"rescued blocks {weak.tolist()}")
    X = omp_batch(union_matrix(gens), Y, s, mask=mask).toarray()
    return gens, X


def _normalize_fold(gens, X, keep, fallback):
    """Unit-normalize generators and scale code blocks so ``DX`` is unchanged."""
    L, n = gens.shape
    Xb = X.reshape(L, n, -1).copy()
    norms = np.linalg.norm(gens, axis=1)
    out = gens.copy()
    for l in range(L):
        if keep[l] or norms[l] == 0.0:
            # a zero generator contributed nothing, so dropping its code keeps DX
            out[l] = fallback[l]
            Xb[l] = 0.0
            continue
        out[l] = gens[l] / norms[l]
        Xb[l] *= norms[l]
    return out, Xb.reshape(L * n, -1)


def _fit(Y, L, s, K, method, seed, mask, theta, rescue, early_stop, tol, patience, init):
    if L < 1:
        raise ValueError(f"number of circulants L must be >= 1, got {L}")
    if K < 1:
        raise ValueError(f"number of iterations K must be >= 1, got {K}")
    Y, _ = remove_dc(np.asarray(Y, dtype=float))
    n, N = Y.shape
    if not 1 <= s <= n:
        raise ValueError(f"sparsity s={s} must lie in [1, {n}]")
    rng = np.random.default_rng(seed)
    if init is None or (isinstance(init, str) and init == "svd"):
        gens = _init_generators(Y, L, rng)
    elif isinstance(init, str) and init == "random":
        gens = rng.standard_normal((L, n))
        gens /= np.linalg.norm(gens, axis=1, keepdims=True)
    elif isinstance(init, str):
        raise ValueError(f"unknown init {init!r}; use 'svd', 'random' or an array")
    else:
        gens = np.array(init, dtype=float).reshape(L, n)
        gens /= np.linalg.norm(gens, axis=1, keepdims=True)

    report = FitReport(data_energy=frobenius2(Y))
    Yt = np.fft.fft(Y, axis=0, norm="ortho")
    Yt[0] = 0.0

    with report.timed("coding"):
        gens, X = _code(Y, gens, s, mask, report, rng, theta, rescue)
    report.objective.append(_objective(Y, union_matrix(gens), X))

    for _ in range(K):
        with report.timed("dictionary"):
            report.dict_before.append(report.objective[-1])
            Xb = X.reshape(L, n, N)
            unused = ~Xb.any(axis=(1, 2))
            if method == "simultaneous":
                gens, X = _simultaneous_step(Yt, gens, X, unused, report)
            else:
                gens, X = _block_step(Yt, gens, X, unused, report)
            D = union_matrix(gens)
            report.dict_after.append(_objective(Y, D, X))
        with report.timed("coding"):
            gens, X = _code(Y, gens, s, mask, report, rng, theta, rescue, D)
            D = union_matrix(gens)
        report.objective.append(_objective(Y, D, X))
        if early_stop and should_stop(report.objective, report.data_energy, tol, patience):
            report.stopped_early = True
            break
    return UnionCirculantDict(gens), SparseCode.from_dense(X, s), report


def _simultaneous_step(Yt, gens, X, unused, report):
    L, n = gens.shape
    N = X.shape[1]
    active = np.flatnonzero(~unused)
    Xt = np.fft.fft(X.reshape(L, n, N)[active], axis=1, norm="ortho")
    sigma = np.zeros((L, n), dtype=complex)
    sigma[active] = union_spectra_update(Yt, Xt, report.events)
    raw = np.fft.ifft(sigma, axis=1).real
    return _normalize_fold(raw, X, unused, gens)


def _block_step(Yt, gens, X, unused, report):
    L, n = gens.shape
    N = X.shape[1]
    Xb = X.reshape(L, n, N).copy()
    Xt = np.fft.fft(Xb, axis=1, norm="ortho")
    sigma = np.fft.fft(gens, axis=1)
    R = Yt - np.einsum("lk,lkj->kj", sigma, Xt)
    gens = gens.copy()
    for l in range(L):
        if unused[l]:
            continue
        R += sigma[l][:, None] * Xt[l]
        new = cdla_spectrum_update(R, Xt[l], report.events).values
        new[0] = 0.0
        c = np.fft.ifft(new).real
        scale = np.linalg.norm(c)
        if scale > 0:
            gens[l] = c / scale
            Xb[l] *= scale
            Xt[l] *= scale
            sigma[l] = new / scale
        R -= sigma[l][:, None] * Xt[l]
    return gens, Xb.reshape(L * n, N)


def ucirc_fit(Y, L, s, K, seed=0, mask=None, theta=1e-6, rescue=True, early_stop=True,
              tol=1e-10, patience=3, init=None):
    """Learn a union of ``L`` circulants with simultaneous per-frequency updates.

    ``init`` is ``'svd'`` (leading singular vectors of the centered data,
    padded with random vectors), ``'random'`` or an ``(L, n)`` array.
    Returns ``(UnionCirculantDict, SparseCode, FitReport)``.  Blocks whose code
    energy falls to ``theta`` times the largest block's are re-seeded from the
    dominant direction of their residual after the coding step.
    """
    return _fit(Y, L, s, K, "simultaneous", seed, mask, theta, rescue, early_stop, tol, patience, init)


def ucdla_block_fit(Y, L, s, K, seed=0, mask=None, theta=1e-6, rescue=True, early_stop=True,
                    tol=1e-10, patience=3, init=None):
    """Same loop as :func:`ucirc_fit` but each circulant is refit in turn against
    the residual left by the others (block coordinate descent)."""
    return _fit(Y, L, s, K, "block", seed, mask, theta, rescue, early_stop, tol, patience, init)
