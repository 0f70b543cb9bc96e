"""Single circulant dictionary learning (C-DLA) and circulant projections."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .data import remove_dc
from .report import FitReport, frobenius2, should_stop
from .sparse import SparseCode, omp_batch
from .spectral import Spectrum, circulant_matrix, fft_columns, hermitian_mirror

__all__ = [
    "CdlaState",
    "cdla_spectrum_update",
    "cdla_min_error",
    "nearest_circulant",
    "cdla_fit",
    "union_matrix",
    "union_apply",
]

log = logging.getLogger(__name__)


def union_matrix(generators):
    """Dense ``[circ(c1) ... circ(cL)]`` for generators of shape ``(L, n)``."""
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    return np.hstack([circulant_matrix(c) for c in G])


def union_apply(generators, X):
    """``sum_l circ(c_l) X_l`` where ``X`` stacks the ``L`` blocks of ``n`` rows."""
    G = np.atleast_2d(np.asarray(generators, dtype=float))
    L, n = G.shape
    X = np.asarray(X, dtype=float)
    Xb = X.reshape(L, n, -1)
    spec = np.fft.fft(G, axis=1)
    prod = (spec[:, :, None] * np.fft.fft(Xb, axis=1)).sum(axis=0)
    return np.fft.ifft(prod, axis=0).real


def _ratio_rows(num, den, events, label):
    out = np.zeros_like(num)
    scale = den.max(initial=0.0)
    used = den > 1e-14 * scale if scale > 0 else np.zeros(den.shape, dtype=bool)
    out[used] = num[used] / den[used]
    if events is not None and not used.all():
        events.append(f"{label}: {int((~used).sum())} frequency bins with empty code rows set to 0")
    return out


def cdla_spectrum_update(Ytilde, Xtilde, events=None):
    """Least-squares eigenvalues ``sigma_k = x_k^H y_k / ||x_k||^2`` per frequency row.

    ``Ytilde`` and ``Xtilde`` are column-wise Fourier transforms (same
    normalization).  Bins whose code row vanishes get ``sigma_k = 0``.
    The result is mirrored to exact conjugate symmetry and is not normalized.
    """
    Yt = np.asarray(Ytilde)
    Xt = np.asarray(Xtilde)
    if Yt.shape != Xt.shape:
        raise ValueError(f"shape mismatch {Yt.shape} vs {Xt.shape}")
    num = np.einsum("kj,kj->k", Xt.conj(), Yt)
    den = np.einsum("kj,kj->k", Xt.conj(), Xt).real
    sigma = _ratio_rows(num, den, events, "cdla")
    return Spectrum(hermitian_mirror(sigma))


def cdla_min_error(Ytilde, Xtilde):
    """Smallest ``||Y - C X||_F^2`` over all circulants ``C`` for fixed ``X``."""
    Yt = np.asarray(Ytilde)
    Xt = np.asarray(Xtilde)
    num = np.abs(np.einsum("kj,kj->k", Xt.conj(), Yt)) ** 2
    den = np.einsum("kj,kj->k", Xt.conj(), Xt).real
    gain = np.zeros_like(den)
    used = den > 0
    gain[used] = num[used] / den[used]
    return float(frobenius2(Yt) - gain.sum())


def nearest_circulant(Y):
    """Generator of the circulant closest to the square ``Y`` in Frobenius norm.

    Entry ``k`` is the mean of the wrapped diagonal ``(i - j) mod n == k``.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] != Y.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {Y.shape}")
    n = Y.shape[0]
    i, j = np.indices((n, n))
    return np.bincount(((i - j) % n).ravel(), weights=Y.ravel(), minlength=n) / n


@dataclass
class CdlaState:
    generator: np.ndarray
    code: SparseCode
    report: FitReport

    @property
    def spectrum(self):
        return Spectrum.from_generator(self.generator)

    @property
    def objective_trace(self):
        return self.report.objective

    def dictionary(self):
        return circulant_matrix(self.generator)


def _objective(Y, c, X):
    R = Y - np.fft.ifft(np.fft.fft(c)[:, None] * np.fft.fft(X, axis=0), axis=0).real
    return frobenius2(R)


def cdla_fit(Y, s, K, seed=0, mask=None, early_stop=True, tol=1e-10, patience=3, init=None):
    """Learn one unit-norm circulant dictionary by alternating OMP and the
    closed-form Fourier-domain update.

    ``Y`` is centered internally.  ``init`` overrides the default starting
    generator: ``'svd'`` (default, first left singular vector of the
    centered data), ``'random'`` or an explicit vector.
    """
    if K < 1:
        raise ValueError(f"number of iterations K must be >= 1, got {K}")
    Y, _ = remove_dc(np.asarray(Y, dtype=float))
    n, N = Y.shape
    if not 1 <= s <= n:
        raise ValueError(f"sparsity s={s} must lie in [1, {n}]")
    if isinstance(init, str) and init not in ("svd", "random"):
        raise ValueError(f"unknown init {init!r}; use 'svd', 'random' or an array")
    if init is None or isinstance(init, str):
        U, sv, _ = np.linalg.svd(Y, full_matrices=False)
        if init != "random" and sv[0] > 0:
            c = U[:, 0].copy()
        else:
            c = np.random.default_rng(seed).standard_normal(n)
    else:
        c = np.asarray(init, dtype=float).copy()
    c /= np.linalg.norm(c)

    report = FitReport(data_energy=frobenius2(Y))
    Yt = fft_columns(Y)
    Yt[0] = 0.0

    with report.timed("coding"):
        X = omp_batch(circulant_matrix(c), Y, s, mask=mask).toarray()
    report.objective.append(_objective(Y, c, X))

    for _ in range(K):
        with report.timed("dictionary"):
            report.dict_before.append(report.objective[-1])
            spec = cdla_spectrum_update(Yt, fft_columns(X), report.events)
            values = spec.values.copy()
            values[0] = 0.0
            c_new = Spectrum(values).generator()
            scale = np.linalg.norm(c_new)
            if scale > 0:
                c = c_new / scale
                X = X * scale
            else:
                report.events.append("cdla: empty code, generator kept")
            report.dict_after.append(_objective(Y, c, X))
        with report.timed("coding"):
            X = omp_batch(circulant_matrix(c), Y, s, mask=mask).toarray()
        report.objective.append(_objective(Y, c, X))
        if early_stop and should_stop(report.objective, report.data_energy, tol, patience):
            report.stopped_early = True
            break
    return CdlaState(c, SparseCode.from_dense(X, s), report)
