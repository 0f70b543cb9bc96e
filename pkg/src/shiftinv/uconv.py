"""Unions of compactly supported convolutional dictionaries.

Each atom family is ``circ(c)`` of size ``p`` whose generator ``c`` vanishes
outside a short support (the first ``n`` entries by default), i.e. a linear
convolution with an ``n``-tap kernel embedded in a circulant.  All ``L``
kernels are refit jointly from one block-Toeplitz normal-equation system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .circulant import union_apply, union_matrix
from .data import remove_dc
from .report import FitReport, frobenius2, should_stop
from .solvers import (
    BlockToeplitzGram,
    block_gram_solve,
    toeplitz_col_from_weights,
)
from .sparse import SparseCode, omp_batch
from .spectral import hermitian_mirror

__all__ = [
    "UnionConvDict",
    "ConvGramSystem",
    "assemble_rhs",
    "assemble_gram",
    "single_conv_update",
    "uconv_fit",
]


@dataclass
class UnionConvDict:
    """``L`` kernels of length ``n`` embedded in circulants of size ``p``."""

    kernels: np.ndarray
    p: int
    support: np.ndarray | None = None

    def __post_init__(self):
        self.kernels = np.atleast_2d(np.asarray(self.kernels, dtype=float))
        if self.support is None:
            self.support = np.arange(self.kernels.shape[1])
        self.support = np.asarray(self.support, dtype=np.int64)
        if self.kernels.shape[1] != self.support.size:
            raise ValueError("kernel length does not match the support size")
        if self.support.max(initial=-1) >= self.p:
            raise ValueError(f"support exceeds generator length p={self.p}")

    @property
    def L(self):
        return self.kernels.shape[0]

    @property
    def n(self):
        return self.kernels.shape[1]

    @property
    def m_in(self):
        """Input length ``m`` with ``p = n + m - 1``."""
        return self.p - self.n + 1

    def generators(self):
        gens = np.zeros((self.L, self.p))
        gens[:, self.support] = self.kernels
        return gens

    def matrix(self):
        return union_matrix(self.generators())

    def apply(self, X):
        return union_apply(self.generators(), X)


@dataclass
class ConvGramSystem:
    """Normal equations ``gram @ c = rhs`` for the stacked kernels."""

    gram: BlockToeplitzGram
    rhs: np.ndarray

    def solve(self, **kwargs):
        return block_gram_solve(self.gram, self.rhs, **kwargs).reshape(self.gram.L, self.gram.n)


def _check_blocks(Ytilde, Xtilde_blocks):
    Xt = np.asarray(Xtilde_blocks)
    if Xt.ndim == 2:
        Xt = Xt[None]
    if Ytilde is not None:
        Yt = np.asarray(Ytilde)
        if Xt.shape[1:] != Yt.shape:
            raise ValueError(f"code blocks of shape {Xt.shape[1:]} do not match data {Yt.shape}")
    return Xt


def assemble_rhs(Ytilde, Xtilde_blocks, n):
    """Right-hand side ``v`` (length ``nL``) from row inner products ``z_k = x_k^H y_k``.

    The DC weight ``z_0`` is set to zero and the remaining weights are
    mirrored to exact conjugate symmetry before the inverse transform.
    """
    Xt = _check_blocks(Ytilde, Xtilde_blocks)
    z = np.einsum("lkj,kj->kl", Xt.conj(), np.asarray(Ytilde))
    z[0] = 0.0
    z = hermitian_mirror(z)
    return np.concatenate([toeplitz_col_from_weights(z[:, l], n) for l in range(Xt.shape[0])])


def assemble_gram(Xtilde_blocks, n, counter=None):
    """Block-Toeplitz Gram from cross-row weights ``w_k = (x_k^a)^H x_k^b``.

    Only the ``L(L+1)/2`` upper blocks are formed; ``counter['products']``
    (if a dict is given) accumulates the number of complex multiplies.
    """
    Xt = _check_blocks(None, Xtilde_blocks)
    L, p, N = Xt.shape
    upper = {}
    for a in range(L):
        for b in range(a, L):
            w = np.einsum("kj,kj->k", Xt[a].conj(), Xt[b])
            if a == b:
                w = w.real.astype(complex)
            w = hermitian_mirror(w)
            upper[(a, b)] = (toeplitz_col_from_weights(w, n), toeplitz_col_from_weights(w.conj(), n))
            if counter is not None:
                counter["products"] = counter.get("products", 0) + p * N
    return BlockToeplitzGram.from_upper(upper)


def _random_unit(n, seed):
    v = np.random.default_rng(seed).standard_normal(n)
    return v / np.linalg.norm(v)


def single_conv_update(Ytilde, Xtilde, n, events=None, seed=0):
    """Least-squares kernel of length ``n`` for one convolutional dictionary.

    Solves the symmetric Toeplitz system by Levinson recursion (with a ridge
    retry).  An all-zero code yields a seeded random unit kernel.
    """
    Yt = np.asarray(Ytilde)
    Xt = np.asarray(Xtilde)
    if Xt.shape != Yt.shape:
        raise ValueError(f"shape mismatch {Xt.shape} vs {Yt.shape}")
    w = np.einsum("kj,kj->k", Xt.conj(), Xt).real
    if not w.any():
        if events is not None:
            events.append("uconv: empty code, random kernel returned")
        return _random_unit(n, seed)
    z = hermitian_mirror(np.einsum("kj,kj->k", Xt.conj(), Yt))
    t = toeplitz_col_from_weights(w, n)[None, None]
    G = BlockToeplitzGram(t, t.copy())
    return block_gram_solve(G, toeplitz_col_from_weights(z, n), method="levinson", events=events)


def _dense_support_solve(Xt, Yt, support, events):
    """Normal equations for an arbitrary support (no Toeplitz structure)."""
    L, p, N = Xt.shape
    n = support.size
    diff = (support[:, None] - support[None, :]) % p
    G = np.zeros((n * L, n * L))
    for a in range(L):
        for b in range(L):
            w = hermitian_mirror(np.einsum("kj,kj->k", Xt[a].conj(), Xt[b]))
            G[a * n : (a + 1) * n, b * n : (b + 1) * n] = np.fft.ifft(w, norm="ortho").real[diff]
    z = np.einsum("lkj,kj->kl", Xt.conj(), Yt)
    z[0] = 0.0
    z = hermitian_mirror(z)
    v = np.fft.ifft(z, axis=0, norm="ortho").real[support].T.ravel()
    try:
        sol = scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), v)
    except np.linalg.LinAlgError:
        lam = 1e-10 * max(np.trace(G) / G.shape[0], 1e-300)
        if events is not None:
            events.append(f"uconv: Cholesky failed, retrying with ridge {lam:.3e}")
        sol = scipy.linalg.solve(G + lam * np.eye(G.shape[0]), v, assume_a="sym")
    return sol.reshape(L, n)


def _objective(Y, D, X):
    return frobenius2(Y - D @ X)


def uconv_fit(Y, L, n, s, K, seed=0, method="auto", cholesky_max=512, cg_tol=1e-8,
              mask=None, support=None, early_stop=True, tol=1e-10, patience=3, init=None):
    """Learn ``L`` convolutional kernels of length ``n`` from ``p x N`` data.

    Alternates OMP over the ``p x pL`` dictionary (all ``p`` shifts of every
    kernel) with a joint least-squares update of all kernels.  ``support``
    replaces the default prefix ``0..n-1`` by an explicit index list.
    Returns ``(UnionConvDict, SparseCode, FitReport)``.
    """
    Y, _ = remove_dc(np.asarray(Y, dtype=float))
    p, N = Y.shape
    if L < 1:
        raise ValueError(f"number of kernels L must be >= 1, got {L}")
    if K < 1:
        raise ValueError(f"number of iterations K must be >= 1, got {K}")
    if not 1 <= n <= p:
        raise ValueError(f"kernel length n={n} must lie in [1, p={p}]")
    if not 1 <= s <= p:
        raise ValueError(f"sparsity s={s} must lie in [1, p={p}]")
    if support is None:
        support = np.arange(n)
    support = np.asarray(support, dtype=np.int64)
    if support.size != n or np.unique(support).size != n or support.min() < 0 or support.max() >= p:
        raise ValueError(f"support must list {n} distinct indices in [0, {p})")
    prefix = np.array_equal(support, np.arange(n))

    rng = np.random.default_rng(seed)
    if init is None:
        kernels = rng.standard_normal((L, n))
    else:
        kernels = np.array(init, dtype=float).reshape(L, n)
    kernels /= np.linalg.norm(kernels, axis=1, keepdims=True)
    model = UnionConvDict(kernels, p, support)

    report = FitReport(data_energy=frobenius2(Y))
    Yt = np.fft.fft(Y, axis=0, norm="ortho")
    Yt[0] = 0.0

    with report.timed("coding"):
        D = model.matrix()
        X = omp_batch(D, Y, s, mask=mask).toarray()
    report.objective.append(_objective(Y, D, X))

    for _ in range(K):
        with report.timed("dictionary"):
            report.dict_before.append(report.objective[-1])
            Xb = X.reshape(L, p, N)
            active = np.flatnonzero(Xb.any(axis=(1, 2)))
            new = model.kernels.copy()
            if active.size:
                Xt = np.fft.fft(Xb[active], axis=1, norm="ortho")
                if prefix:
                    system = ConvGramSystem(assemble_gram(Xt, n), assemble_rhs(Yt, Xt, n))
                    sol = system.solve(method=method, cholesky_max=cholesky_max, cg_tol=cg_tol,
                                       events=report.events)
                else:
                    sol = _dense_support_solve(Xt, Yt, support, report.events)
                Xb = Xb.copy()
                for i, l in enumerate(active):
                    scale = np.linalg.norm(sol[i])
                    if scale > 0:
                        new[l] = sol[i] / scale
                        Xb[l] *= scale
                    else:
                        Xb[l] = 0.0
                X = Xb.reshape(L * p, N)
            model = UnionConvDict(new, p, support)
            D = model.matrix()
            report.dict_after.append(_objective(Y, D, X))
        with report.timed("coding"):
            X = omp_batch(D, Y, s, mask=mask).toarray()
        report.objective.append(_objective(Y, D, X))
        if early_stop and should_stop(report.objective, report.data_energy, tol, patience):
            report.stopped_early = True
            break
    return model, SparseCode.from_dense(X, s), report
