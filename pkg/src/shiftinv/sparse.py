"""Orthogonal matching pursuit and hard-thresholding projections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DictionaryNormError",
    "SparseCode",
    "ShiftMask",
    "omp",
    "omp_batch",
    "project_topk",
]


class DictionaryNormError(ValueError):
    """Dictionary columns are not unit norm."""


@dataclass
class SparseCode:
    """Column-sparse coefficient matrix of shape ``(n_rows, N)``.

    Column ``j`` holds the entries ``(indices[j, t], coefs[j, t])`` for the
    slots with ``indices[j, t] >= 0``; used slots come first, sorted by row.
    """

    n_rows: int
    indices: np.ndarray
    coefs: np.ndarray

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.coefs = np.asarray(self.coefs, dtype=float)
        if self.indices.ndim != 2 or self.indices.shape != self.coefs.shape:
            raise ValueError("indices and coefs must be matching (N, s) arrays")

    @property
    def n_cols(self):
        return self.indices.shape[0]

    @property
    def sparsity(self):
        return self.indices.shape[1]

    @property
    def shape(self):
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self):
        return int((self.indices >= 0).sum())

    def column(self, j):
        used = self.indices[j] >= 0
        return list(zip(self.indices[j][used].tolist(), self.coefs[j][used].tolist()))

    def toarray(self):
        X = np.zeros((self.n_rows, self.n_cols))
        j, t = np.nonzero(self.indices >= 0)
        X[self.indices[j, t], j] = self.coefs[j, t]
        return X

    def row_counts(self):
        """Number of columns using each row (atom utilization)."""
        used = self.indices[self.indices >= 0]
        return np.bincount(used, minlength=self.n_rows)

    @classmethod
    def from_dense(cls, X, s=None):
        X = np.asarray(X, dtype=float)
        nz = X != 0
        per_col = nz.sum(axis=0)
        if s is None:
            s = int(per_col.max(initial=0))
        if per_col.max(initial=0) > s:
            raise ValueError(f"a column has {per_col.max()} nonzeros, more than s={s}")
        N = X.shape[1]
        idx = np.full((N, s), -1, dtype=np.int64)
        val = np.zeros((N, s))
        for j in range(N):
            rows = np.flatnonzero(nz[:, j])
            idx[j, : rows.size] = rows
            val[j, : rows.size] = X[rows, j]
        return cls(X.shape[0], idx, val)

    def _sorted(self):
        key = np.where(self.indices >= 0, self.indices, np.iinfo(np.int64).max)
        order = np.argsort(key, axis=1, kind="stable")
        self.indices = np.take_along_axis(self.indices, order, axis=1)
        self.coefs = np.take_along_axis(self.coefs, order, axis=1)
        return self


@dataclass(frozen=True)
class ShiftMask:
    """Which dictionary columns OMP may select."""

    allowed: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.allowed, dtype=bool)
        if a.ndim != 1:
            raise ValueError("mask must be a boolean vector")
        if not a.any():
            raise ValueError("mask must allow at least one column")
        object.__setattr__(self, "allowed", a)

    @classmethod
    def first_shifts(cls, n, L, q):
        """Allow only shifts ``0..q-1`` of each of the ``L`` circulant blocks."""
        allowed = np.zeros((L, n), dtype=bool)
        allowed[:, :q] = True
        return cls(allowed.ravel())


def _check_dictionary(D, s, mask):
    D = np.asarray(D, dtype=float)
    if D.ndim != 2:
        raise ValueError("dictionary must be a matrix")
    n, S = D.shape
    norms = np.linalg.norm(D, axis=0)
    if np.abs(norms - 1.0).max(initial=0.0) > 1e-8:
        bad = int(np.argmax(np.abs(norms - 1.0)))
        raise DictionaryNormError(f"column {bad} has norm {norms[bad]:.12g}, expected 1")
    if s < 0 or s > n:
        raise ValueError(f"sparsity {s} must lie in [0, {n}]")
    if mask is not None:
        if not isinstance(mask, ShiftMask):
            mask = ShiftMask(mask)
        if mask.allowed.size != S:
            raise ValueError(f"mask has {mask.allowed.size} entries for {S} atoms")
        if s > mask.allowed.sum():
            raise ValueError(f"sparsity {s} exceeds the {mask.allowed.sum()} allowed atoms")
    return D, mask


def omp_batch(D, Y, s, mask=None, rtol=1e-12):
    """Orthogonal matching pursuit applied to every column of ``Y``.

    Each column gets exactly ``s`` atoms unless its residual drops below
    ``rtol * ||y||`` first.  Ties in ``|<d_i, r>|`` go to the smallest
    column index.  Coefficients are the least-squares fit on the support,
    computed by a batched QR.
    """
    D, mask = _check_dictionary(D, s, mask)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    n, S = D.shape
    if Y.shape[0] != n:
        raise ValueError(f"signals have {Y.shape[0]} rows, dictionary has {n}")
    N = Y.shape[1]
    idx = np.full((N, s), -1, dtype=np.int64)
    coef = np.zeros((N, s))
    ynorm = np.linalg.norm(Y, axis=0)
    R = Y.copy()
    active = ynorm > 0
    blocked = None if mask is None else ~mask.allowed
    for t in range(s):
        act = np.flatnonzero(active)
        if act.size == 0:
            break
        C = np.abs(D.T @ R[:, act])
        if blocked is not None:
            C[blocked] = -1.0
        cols = np.arange(act.size)
        for u in range(t):
            C[idx[act, u], cols] = -1.0
        sel = np.argmax(C, axis=0)
        best = C[sel, cols]
        ok = best > rtol * ynorm[act]
        active[act[~ok]] = False
        act, sel = act[ok], sel[ok]
        if act.size == 0:
            break
        idx[act, t] = sel
        sup = idx[act, : t + 1]
        Ds = np.transpose(D[:, sup], (1, 0, 2))
        Q, Rr = np.linalg.qr(Ds)
        rhs = np.einsum("ank,an->ak", Q, Y[:, act].T)
        c = np.linalg.solve(Rr, rhs[..., None])[..., 0]
        coef[act, : t + 1] = c
        R[:, act] = Y[:, act] - np.einsum("ank,ak->na", Ds, c)
        active[act] = np.linalg.norm(R[:, act], axis=0) > rtol * ynorm[act]
    return SparseCode(S, idx, coef)._sorted()


def omp(D, y, s, mask=None, rtol=1e-12):
    """OMP for a single signal; returns ``(rows, coefficients)`` sorted by row."""
    y = np.asarray(y, dtype=float)
    if y.ndim != 1:
        raise ValueError("omp expects a single signal vector")
    code = omp_batch(D, y[:, None], s, mask=mask, rtol=rtol)
    used = code.indices[0] >= 0
    return code.indices[0][used], code.coefs[0][used]


def project_topk(M, s):
    """Keep the ``s`` largest-magnitude entries of every column.

    Ties go to the lower row index.  Exact zeros are not stored.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M[:, None]
    n, N = M.shape
    if s < 0 or s > n:
        raise ValueError(f"sparsity {s} must lie in [0, {n}]")
    order = np.argsort(-np.abs(M), axis=0, kind="stable")[:s]
    vals = np.take_along_axis(M, order, axis=0)
    idx = np.where(vals != 0, order, -1).T
    code = SparseCode(n, idx, np.where(vals != 0, vals, 0.0).T)
    return code._sorted()
