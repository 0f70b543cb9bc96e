"""Toeplitz and block-Toeplitz solvers for the dictionary normal equations."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "NotPositiveDefiniteError",
    "DivergenceError",
    "SymToeplitz",
    "BlockToeplitzGram",
    "CGResult",
    "levinson_solve",
    "block_gram_solve",
    "cg_solve",
    "toeplitz_col_from_weights",
]

log = logging.getLogger(__name__)


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky or Levinson recursion breaks down."""


class DivergenceError(ArithmeticError):
    """Raised when an iterative solve produces non-finite or indefinite steps."""


@dataclass(frozen=True)
class SymToeplitz:
    """Symmetric Toeplitz matrix given by its first column."""

    first_column: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.first_column, dtype=float)
        if t.ndim != 1 or t.size < 1:
            raise ValueError("first column must be a non-empty vector")
        object.__setattr__(self, "first_column", t)

    @property
    def size(self):
        return self.first_column.size

    def dense(self):
        return scipy.linalg.toeplitz(self.first_column)


def levinson_solve(t, b):
    """Solve ``T x = b`` for symmetric positive definite Toeplitz ``T``.

    Levinson-Durbin recursion, ~4n^2 flops.  ``t`` is the first column (or a
    :class:`SymToeplitz`).  Raises :class:`NotPositiveDefiniteError` when a
    reflection denominator is not strictly positive.
    """
    if isinstance(t, SymToeplitz):
        t = t.first_column
    t = np.asarray(t, dtype=float)
    b = np.asarray(b, dtype=float)
    n = t.size
    if b.shape != (n,):
        raise ValueError(f"rhs of shape {b.shape} does not match Toeplitz size {n}")
    t0 = t[0]
    if not t0 > 0:
        raise NotPositiveDefiniteError(f"non-positive diagonal {t0!r}")
    r = t[1:] / t0
    rhs = b / t0
    tiny = n * np.finfo(float).eps

    x = np.empty(n)
    x[0] = rhs[0]
    if n == 1:
        return x
    y = np.empty(n - 1)
    y[0] = -r[0]
    beta = 1.0
    alpha = -r[0]
    for k in range(1, n):
        beta *= 1.0 - alpha * alpha
        if not beta > tiny:
            raise NotPositiveDefiniteError(f"Levinson breakdown at step {k} (beta={beta:.3e})")
        mu = (rhs[k] - r[:k] @ x[k - 1 :: -1]) / beta
        x[:k] = x[:k] + mu * y[k - 1 :: -1]
        x[k] = mu
        if k < n - 1:
            alpha = -(r[k] + r[:k] @ y[k - 1 :: -1]) / beta
            y[:k] = y[:k] + alpha * y[k - 1 :: -1]
            y[k] = alpha
    return x


def toeplitz_col_from_weights(w, n):
    """First ``n`` entries of the unitary inverse FFT of ``w``.

    For diagonal weights ``W`` this is ``sqrt(p)`` times the first column of
    the leading ``n x n`` block of ``F^H diag(w) F`` (a Toeplitz matrix).
    ``w`` may be complex as long as it is conjugate symmetric.
    """
    w = np.asarray(w)
    if w.ndim != 1:
        raise ValueError("weights must be a vector")
    p = w.size
    if n > p:
        raise ValueError(f"requested {n} entries from a length-{p} transform")
    col = np.fft.ifft(w, norm="ortho")[:n]
    scale = max(np.abs(col).max(initial=0.0), 1.0)
    if np.abs(col.imag).max(initial=0.0) > 1e-10 * scale:
        raise ValueError("weights are not conjugate symmetric; inverse transform is complex")
    return col.real.copy()


@dataclass
class BlockToeplitzGram:
    """Symmetric ``nL x nL`` matrix made of ``n x n`` Toeplitz blocks.

    ``cols[a, b]`` and ``rows[a, b]`` hold the first column and first row of
    block ``(a, b)``; ``rows[a, b] == cols[b, a]`` by symmetry.
    """

    cols: np.ndarray
    rows: np.ndarray

    def __post_init__(self):
        self.cols = np.asarray(self.cols, dtype=float)
        self.rows = np.asarray(self.rows, dtype=float)
        if self.cols.ndim != 3 or self.cols.shape[0] != self.cols.shape[1]:
            raise ValueError("cols must have shape (L, L, n)")
        if self.rows.shape != self.cols.shape:
            raise ValueError("rows and cols must have the same shape")

    @classmethod
    def from_upper(cls, upper):
        """Build from ``{(a, b): (col, row)}`` for ``a <= b``."""
        L = 1 + max(a for a, _ in upper)
        n = len(next(iter(upper.values()))[0])
        cols = np.zeros((L, L, n))
        rows = np.zeros((L, L, n))
        for (a, b), (col, row) in upper.items():
            cols[a, b], rows[a, b] = col, row
            cols[b, a], rows[b, a] = row, col
        return cls(cols, rows)

    @classmethod
    def identity(cls, L, n):
        cols = np.zeros((L, L, n))
        cols[np.arange(L), np.arange(L), 0] = 1.0
        return cls(cols, cols.copy())

    @property
    def L(self):
        return self.cols.shape[0]

    @property
    def n(self):
        return self.cols.shape[2]

    @property
    def shape(self):
        return (self.n * self.L, self.n * self.L)

    @property
    def parameter_count(self):
        """Free parameters: n per symmetric diagonal block, 2n-1 per upper block."""
        n, L = self.n, self.L
        return n * L + (2 * n - 1) * L * (L - 1) // 2

    def block(self, a, b):
        return scipy.linalg.toeplitz(self.cols[a, b], self.rows[a, b])

    def dense(self):
        n, L = self.n, self.L
        G = np.empty((n * L, n * L))
        for a in range(L):
            for b in range(L):
                G[a * n : (a + 1) * n, b * n : (b + 1) * n] = self.block(a, b)
        return G

    def trace(self):
        idx = np.arange(self.L)
        return float(self.n * self.cols[idx, idx, 0].sum())

    def matvec(self, x):
        n, L = self.n, self.L
        xb = np.asarray(x, dtype=float).reshape(L, n)
        out = np.zeros((L, n))
        for a in range(L):
            for b in range(L):
                out[a] += scipy.linalg.matmul_toeplitz((self.cols[a, b], self.rows[a, b]), xb[b])
        return out.ravel()

    def with_ridge(self, lam):
        cols = self.cols.copy()
        rows = self.rows.copy()
        idx = np.arange(self.L)
        cols[idx, idx, 0] += lam
        rows[idx, idx, 0] += lam
        return BlockToeplitzGram(cols, rows)


@dataclass(frozen=True)
class CGResult:
    x: np.ndarray
    converged: bool
    n_iter: int
    rel_residual: float


def cg_solve(apply, v, tol=1e-8, max_iter=None):
    """Conjugate gradients for a symmetric positive definite operator.

    Stops when ``||v - A x|| <= tol * ||v||`` or after ``max_iter`` steps;
    the returned :class:`CGResult` says which.  A non-positive curvature
    ``p^T A p`` or a non-finite iterate raises :class:`DivergenceError`.
    """
    v = np.asarray(v, dtype=float)
    if max_iter is None:
        max_iter = 10 * v.size
    x = np.zeros_like(v)
    bnorm = np.linalg.norm(v)
    if bnorm == 0.0:
        return CGResult(x, True, 0, 0.0)
    r = v.copy()
    p = r.copy()
    rr = r @ r
    it = 0
    while it < max_iter:
        Ap = np.asarray(apply(p), dtype=float)
        curv = p @ Ap
        if not np.isfinite(curv):
            raise DivergenceError("non-finite curvature in CG")
        if curv <= 0.0:
            raise DivergenceError(f"operator is not positive definite (p^T A p = {curv:.3e})")
        step = rr / curv
        x = x + step * p
        r = r - step * Ap
        it += 1
        rr_new = r @ r
        if not np.isfinite(rr_new):
            raise DivergenceError("non-finite residual in CG")
        if np.sqrt(rr_new) <= tol * bnorm:
            rr = rr_new
            break
        p = r + (rr_new / rr) * p
        rr = rr_new
    rel = float(np.linalg.norm(v - apply(x)) / bnorm)
    return CGResult(x, rel <= tol * (1 + 1e-6) or np.sqrt(rr) <= tol * bnorm, it, rel)


def _solve_once(G, v, method, cg_tol, cg_max_iter):
    if method == "levinson":
        if G.L != 1:
            raise ValueError("Levinson path requires a single block")
        return levinson_solve(G.cols[0, 0], v)
    if method == "cholesky":
        try:
            factor = scipy.linalg.cho_factor(G.dense(), lower=True, check_finite=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        return scipy.linalg.cho_solve(factor, v)
    if method == "cg":
        res = cg_solve(G.matvec, v, tol=cg_tol, max_iter=cg_max_iter)
        if not res.converged:
            log.warning("CG stopped after %d iterations (rel. residual %.2e)", res.n_iter, res.rel_residual)
        return res.x
    raise ValueError(f"unknown method {method!r}")


def block_gram_solve(G, v, method="auto", cholesky_max=512, ridge=True, cg_tol=1e-8,
                     cg_max_iter=None, events=None):
    """Solve ``G c = v`` for a :class:`BlockToeplitzGram`.

    ``method='auto'`` picks Levinson for one block, dense Cholesky while
    ``nL <= cholesky_max`` and CG above.  If the matrix turns out not to be
    positive definite and ``ridge`` is set, ``1e-10 * trace(G) / (nL)`` is
    added to the diagonal and the solve retried once; the event is appended
    to ``events`` when a list is given.
    """
    v = np.asarray(v, dtype=float)
    nL = G.n * G.L
    if v.shape != (nL,):
        raise ValueError(f"rhs of shape {v.shape} does not match Gram size {nL}")
    if method == "auto":
        if G.L == 1:
            method = "levinson"
        elif nL <= cholesky_max:
            method = "cholesky"
        else:
            method = "cg"
    if cg_max_iter is None:
        cg_max_iter = 10 * nL
    try:
        return _solve_once(G, v, method, cg_tol, cg_max_iter)
    except (NotPositiveDefiniteError, DivergenceError) as exc:
        if not ridge:
            raise
        lam = 1e-10 * G.trace() / nL
        if not lam > 0:
            lam = 1e-10
        msg = f"{method} solve failed ({exc}); retrying with ridge {lam:.3e}"
        log.info(msg)
        if events is not None:
            events.append(msg)
        return _solve_once(G.with_ridge(lam), v, method, cg_tol, cg_max_iter)
