"""Evaluation metrics: representation error, kernel recovery, atom utilization."""

from __future__ import annotations

import numpy as np

from .sparse import SparseCode

__all__ = [
    "metric_epsilon",
    "shift_correlations",
    "metric_recovery",
    "matched_scores",
    "metric_utilization",
    "peak_mass",
]


def _dense_code(X):
    return X.toarray() if isinstance(X, SparseCode) else np.asarray(X, dtype=float)


def metric_epsilon(Y, D, X):
    """``100 * ||Y - D X||_F^2 / ||Y||_F^2``.

    ``D`` may be a matrix or any object exposing ``matrix()``; ``X`` a dense
    array or a :class:`SparseCode`.
    """
    Y = np.asarray(Y, dtype=float)
    energy = float(np.vdot(Y, Y))
    if energy == 0.0:
        raise ValueError("relative error is undefined for an all-zero dataset")
    D = D.matrix() if hasattr(D, "matrix") else np.asarray(D, dtype=float)
    R = Y - D @ _dense_code(X)
    return 100.0 * float(np.vdot(R, R)) / energy


def _unit_rows(K, center):
    K = np.atleast_2d(np.asarray(K, dtype=float))
    if center:
        K = K - K.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(K, axis=1, keepdims=True)
    return np.divide(K, norms, out=np.zeros_like(K), where=norms > 0)


def shift_correlations(learned, truth, center=True):
    """``S[i, j] = max_q |<P^q learned_j, truth_i>|`` for unit-normalized rows.

    With ``center=True`` both sets are mean-removed before normalizing, which
    matches what a learner can see after DC removal.
    """
    A = _unit_rows(truth, center)
    B = _unit_rows(learned, center)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"kernel lengths differ: {A.shape[1]} vs {B.shape[1]}")
    # circular cross-correlation for every pair via the FFT
    cc = np.fft.ifft(np.fft.fft(A, axis=1)[:, None, :] * np.fft.fft(B, axis=1)[None, :, :].conj(), axis=2)
    return np.abs(cc.real).max(axis=2)


def matched_scores(learned, truth, center=True):
    """Greedy one-to-one matching, best pair first; returns one score per truth kernel
    (0 for kernels left unmatched)."""
    S = shift_correlations(learned, truth, center)
    scores = np.zeros(S.shape[0])
    free_t = np.ones(S.shape[0], dtype=bool)
    free_l = np.ones(S.shape[1], dtype=bool)
    for flat in np.argsort(-S, axis=None, kind="stable"):
        i, j = divmod(int(flat), S.shape[1])
        if free_t[i] and free_l[j]:
            scores[i] = S[i, j]
            free_t[i] = free_l[j] = False
            if not free_t.any() or not free_l.any():
                break
    return scores


def metric_recovery(learned, truth, threshold=0.99, center=True):
    """Fraction of ground-truth kernels matched above ``threshold``.

    ``learned`` is an ``(L, n)`` generator array or an object with a
    ``generators`` attribute; ``truth`` likewise or one with ``kernels``.
    """
    learned = getattr(learned, "generators", learned)
    truth = getattr(truth, "kernels", truth)
    scores = matched_scores(learned, truth, center)
    return float(np.mean(scores >= threshold))


def metric_utilization(code, L, n):
    """How often each of the ``nL`` atoms is selected over all data columns."""
    if not isinstance(code, SparseCode):
        code = SparseCode.from_dense(np.asarray(code, dtype=float))
    if code.n_rows != L * n:
        raise ValueError(f"code has {code.n_rows} rows, expected L*n = {L * n}")
    used = code.indices[code.indices >= 0]
    return np.bincount(used, minlength=L * n).astype(np.int64)


def peak_mass(hist, L, n, q):
    """Per circulant: share of its selections falling on its ``q`` most used shifts.

    Returns ``(share, total)``; ``share`` is NaN for blocks never selected.
    """
    H = np.asarray(hist, dtype=float).reshape(L, n)
    total = H.sum(axis=1)
    top = np.sort(H, axis=1)[:, ::-1][:, :q].sum(axis=1)
    share = np.full(L, np.nan)
    np.divide(top, total, out=share, where=total > 0)
    return share, total
