"""Wavelet-like cascades of two-channel circulant filter stages.

Stage ``k`` (1-based) acts on the leading ``p_k = p / 2**(k-1)`` coordinates:
a length-``p_k`` input ``[a; d]`` is mapped to ``g (*) up(a) + h (*) up(d)``,
where ``up`` places its argument on the even positions and ``(*)`` is circular
convolution.  The remaining coordinates pass through unchanged.  The
dictionary is ``W diag(d)`` with ``W = W_1 W_2 ... W_m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .report import FitReport, frobenius2, should_stop
from .solvers import toeplitz_col_from_weights
from .sparse import SparseCode, omp_batch, project_topk

__all__ = [
    "WaveletConfigError",
    "WaveletStage",
    "WaveletDict",
    "haar_filters",
    "d4_filters",
    "wavelet_apply",
    "stage_ls_update",
    "check_wavelet_config",
    "wdla_fit",
]


class WaveletConfigError(ValueError):
    """Invalid combination of signal size, stage count and filter length."""


def haar_filters():
    r = 1.0 / np.sqrt(2.0)
    return np.array([r, r]), np.array([r, -r])


def d4_filters():
    s3 = np.sqrt(3.0)
    scale = 4.0 * np.sqrt(2.0)
    g = np.array([1 + s3, 3 + s3, 3 - s3, 1 - s3]) / scale
    h = np.array([1 - s3, -(3 - s3), 3 + s3, -(1 + s3)]) / scale
    return g, h


@dataclass
class WaveletStage:
    """Low/high filters of one stage, supported on the first ``n`` taps."""

    g: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.g = np.asarray(self.g, dtype=float).ravel()
        self.h = np.asarray(self.h, dtype=float).ravel()
        if self.g.shape != self.h.shape:
            raise WaveletConfigError("g and h must have the same support length")

    @property
    def n(self):
        return self.g.size

    @classmethod
    def identity(cls, n):
        """Filters ``e_1, e_2``: the stage just interleaves its two halves."""
        if n < 2:
            raise WaveletConfigError("identity stages need filters with n >= 2 taps")
        g = np.zeros(n)
        h = np.zeros(n)
        g[0] = h[1] = 1.0
        return cls(g, h)

    def matrix(self, size):
        """Dense ``[G S, H S]`` of shape ``size x size``."""
        half = size // 2
        C = np.zeros((size, size))
        rows = (2 * np.arange(half)[None, :] + np.arange(self.n)[:, None]) % size
        cols = np.arange(half)[None, :].repeat(self.n, axis=0)
        np.add.at(C, (rows, cols), self.g[:, None])
        np.add.at(C, (rows, cols + half), self.h[:, None])
        return C

    def apply(self, Z):
        """``[G S, H S] @ Z`` for ``Z`` of shape ``(size, N)``."""
        size = Z.shape[0]
        half = size // 2
        out = np.zeros_like(Z)
        a, d = Z[:half], Z[half:]
        even = 2 * np.arange(half)
        for j in range(self.n):
            out[(even + j) % size] += self.g[j] * a + self.h[j] * d
        return out


def check_wavelet_config(p, m, n, init=None):
    """Raise :class:`WaveletConfigError` unless ``(p, m, n, init)`` is admissible."""
    if m < 1:
        raise WaveletConfigError(f"need at least one stage, got m={m}")
    if p % (2**m):
        raise WaveletConfigError(f"2**m = {2**m} must divide the signal size p={p}")
    if not 2 <= n <= p // 2 ** (m - 1):
        raise WaveletConfigError(f"filter length n={n} must lie in [2, p/2**(m-1) = {p // 2 ** (m - 1)}]")
    levels = int(np.log2(p)) if p & (p - 1) == 0 else None
    if init == "haar" and not (n == 2 and m == levels):
        raise WaveletConfigError(f"haar init requires n=2 and m=log2(p), got n={n}, m={m}, p={p}")
    if init == "d4" and not (n == 4 and levels is not None and m == levels - 1):
        raise WaveletConfigError(f"d4 init requires n=4 and m=log2(p)-1, got n={n}, m={m}, p={p}")


@dataclass
class WaveletDict:
    """Cascade ``W = W_1 ... W_m`` with column scaling ``norm_diag``."""

    stages: list
    p: int
    norm_diag: np.ndarray | None = None
    _W: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.stages = [s if isinstance(s, WaveletStage) else WaveletStage(*s) for s in self.stages]
        check_wavelet_config(self.p, self.m, self.n)
        if any(s.n != self.n for s in self.stages):
            raise WaveletConfigError("all stages must share the filter length n")
        if self.norm_diag is None:
            self.norm_diag = np.ones(self.p)
        self.norm_diag = np.asarray(self.norm_diag, dtype=float)

    @property
    def m(self):
        return len(self.stages)

    @property
    def n(self):
        return self.stages[0].n

    @property
    def sizes(self):
        return [self.p // 2**k for k in range(self.m)]

    @property
    def dof(self):
        """Free filter coefficients, ``2 n m``."""
        return sum(s.g.size + s.h.size for s in self.stages)

    def params(self):
        return np.concatenate([np.concatenate([s.g, s.h]) for s in self.stages])

    def stage_operator(self, k):
        """Dense ``W_k`` (``p x p``), ``k`` 1-based."""
        size = self.sizes[k - 1]
        Wk = np.eye(self.p)
        Wk[:size, :size] = self.stages[k - 1].matrix(size)
        return Wk

    def transform(self):
        """Dense ``W`` (without the column scaling)."""
        if self._W is None:
            W = np.eye(self.p)
            for k in range(1, self.m + 1):
                W = W @ self.stage_operator(k)
            self._W = W
        return self._W

    def matrix(self):
        """Dense dictionary ``W diag(norm_diag)``."""
        return self.transform() * self.norm_diag[None, :]

    def normalized(self):
        """Copy whose dictionary has unit-norm columns."""
        norms = np.linalg.norm(self.transform(), axis=0)
        if np.any(norms == 0):
            raise np.linalg.LinAlgError("cascade has a zero column")
        return WaveletDict(self.stages, self.p, 1.0 / norms, self._W)

    def with_stage(self, k, g, h):
        stages = list(self.stages)
        stages[k - 1] = WaveletStage(g, h)
        return WaveletDict(stages, self.p, self.norm_diag.copy())


def wavelet_apply(wd, X, counter=None):
    """``W diag(d) X`` by applying the stages ``m, m-1, ..., 1``.

    ``counter['multiplies']`` (if a dict is given) accumulates the number of
    scalar multiplications, ``n * p_k`` per column and stage plus the scaling.
    """
    X = np.asarray(X, dtype=float)
    vec = X.ndim == 1
    Z = (X[:, None] if vec else X) * wd.norm_diag[:, None]
    if Z.shape[0] != wd.p:
        raise ValueError(f"input has {Z.shape[0]} rows, cascade expects {wd.p}")
    N = Z.shape[1]
    mults = wd.p * N
    for stage, size in zip(reversed(wd.stages), reversed(wd.sizes)):
        Z = Z.copy()
        Z[:size] = stage.apply(Z[:size])
        mults += stage.n * size * N
    if counter is not None:
        counter["multiplies"] = counter.get("multiplies", 0) + mults
    return Z[:, 0] if vec else Z


def _upsample(Z1):
    """Halves ``a`` and ``d`` of ``Z1`` placed on even positions: ``(2, P, N)``."""
    P, N = Z1.shape
    half = P // 2
    U = np.zeros((2, P, N))
    U[0, 0::2] = Z1[:half]
    U[1, 0::2] = Z1[half:]
    return U


def _gram_fourier(U, V, n):
    """Gram/rhs when the outer cascade is the identity (Toeplitz blocks)."""
    Ut = np.fft.fft(U, axis=1, norm="ortho")
    Vt = np.fft.fft(V, axis=0, norm="ortho")
    G = np.zeros((2 * n, 2 * n))
    rhs = np.zeros(2 * n)
    for a in range(2):
        z = np.einsum("kj,kj->k", Ut[a].conj(), Vt)
        rhs[a * n : (a + 1) * n] = toeplitz_col_from_weights(z, n)
        for b in range(2):
            w = np.einsum("kj,kj->k", Ut[a].conj(), Ut[b])
            col = toeplitz_col_from_weights(w, n)
            row = toeplitz_col_from_weights(w.conj(), n)
            G[a * n : (a + 1) * n, b * n : (b + 1) * n] = scipy.linalg.toeplitz(col, row)
    scale = np.sqrt(U.shape[1])
    return scale * G, scale * rhs


def _gram_general(U, V, M, n):
    """Gram ``<P^i U_a, M P^j U_b>`` and rhs ``<P^i U_a, V>`` for any ``M``."""
    P = U.shape[1]
    G = np.zeros((2 * n, 2 * n))
    rhs = np.zeros(2 * n)
    r = np.arange(P)
    for a in range(2):
        E = V @ U[a].T
        for i in range(n):
            rhs[a * n + i] = E[r, (r - i) % P].sum()
        for b in range(2):
            K = U[a] @ U[b].T
            for i in range(n):
                for j in range(n):
                    G[a * n + i, b * n + j] = np.sum(M * np.roll(K, (i, j), axis=(0, 1)))
    return G, rhs


def _solve_spd(G, rhs, theta0, events):
    try:
        return scipy.linalg.cho_solve(scipy.linalg.cho_factor(G), rhs)
    except np.linalg.LinAlgError:
        # ridge on the step, so taps the data cannot see keep their values
        lam = 1e-10 * max(np.trace(G) / G.shape[0], 1e-300)
        if events is not None:
            events.append(f"wdla: singular stage Gram, ridge {lam:.3e} added")
        step = scipy.linalg.solve(G + lam * np.eye(G.shape[0]), rhs - G @ theta0, assume_a="sym")
        return theta0 + step


def stage_ls_update(wd, k, Y, X, events=None):
    """Least-squares filters ``(g_k, h_k)`` with every other stage fixed.

    ``k`` is 1-based.  Minimizes ``||Y - W_A W_k W_B diag(d) X||_F^2`` over the
    ``2n`` supported filter taps.
    """
    if not 1 <= k <= wd.m:
        raise ValueError(f"stage index k={k} outside 1..{wd.m}")
    Y = np.asarray(Y, dtype=float)
    X = np.asarray(X, dtype=float)
    if Y.shape[0] != wd.p or X.shape != (wd.p, Y.shape[1]):
        raise ValueError("Y and X must both be p x N")
    P = wd.sizes[k - 1]
    n = wd.n
    Xbar = X * wd.norm_diag[:, None]
    for stage, size in zip(reversed(wd.stages[k:]), reversed(wd.sizes[k:])):
        Xbar[:size] = stage.apply(Xbar[:size])
    WA = np.eye(wd.p)
    for j in range(1, k):
        WA = WA @ wd.stage_operator(j)
    WA1, WA2 = WA[:, :P], WA[:, P:]
    Ybar = Y - WA2 @ Xbar[P:]
    U = _upsample(Xbar[:P])
    if k == 1:
        G, rhs = _gram_fourier(U, Ybar, n)
    else:
        G, rhs = _gram_general(U, WA1.T @ Ybar, WA1.T @ WA1, n)
    stage = wd.stages[k - 1]
    theta = _solve_spd(G, rhs, np.concatenate([stage.g, stage.h]), events)
    return theta[:n], theta[n:]


def _stages_for(init, m, n, rng):
    if init in ("svd", None):
        return [WaveletStage.identity(n) for _ in range(m)]
    if init == "haar":
        return [WaveletStage(*haar_filters()) for _ in range(m)]
    if init == "d4":
        return [WaveletStage(*d4_filters()) for _ in range(m)]
    if init == "random":
        stages = []
        for _ in range(m):
            g, h = rng.standard_normal((2, n))
            stages.append(WaveletStage(g / np.linalg.norm(g), h / np.linalg.norm(h)))
        return stages
    if isinstance(init, str):
        raise WaveletConfigError(f"unknown init {init!r}")
    return [s if isinstance(s, WaveletStage) else WaveletStage(*s) for s in init]


def wdla_fit(Y, m, n, s, K, init="svd", seed=0, early_stop=True, tol=1e-10, patience=3):
    """Learn an ``m``-stage cascade with ``n``-tap filters for ``p x N`` data.

    ``init`` is ``'svd'`` (interleaving identity stages and codes from the
    ``s`` largest projections on the left singular vectors), ``'haar'``,
    ``'d4'``, ``'random'`` or a list of ``(g, h)`` pairs.  Each iteration
    refits the stages in order ``k = 1..m``, renormalizes the columns, folds
    the scaling into the code and re-codes with OMP.
    Returns ``(WaveletDict, SparseCode, FitReport)``.
    """
    Y = np.asarray(Y, dtype=float)
    p, N = Y.shape
    check_wavelet_config(p, m, n, init if isinstance(init, str) else None)
    if not 1 <= s <= p:
        raise WaveletConfigError(f"sparsity s={s} must lie in [1, p={p}]")
    if K < 1:
        raise ValueError(f"number of iterations K must be >= 1, got {K}")
    rng = np.random.default_rng(seed)
    wd = WaveletDict(_stages_for(init, m, n, rng), p).normalized()
    report = FitReport(data_energy=frobenius2(Y))

    with report.timed("coding"):
        if init in ("svd", None):
            U = np.linalg.svd(Y, full_matrices=False)[0]
            X = np.zeros((p, N))
            X[: U.shape[1]] = project_topk(U.T @ Y, s).toarray()
        else:
            X = omp_batch(wd.matrix(), Y, s).toarray()
    report.objective.append(frobenius2(Y - wd.matrix() @ X))

    for _ in range(K):
        with report.timed("dictionary"):
            report.dict_before.append(report.objective[-1])
            for k in range(1, m + 1):
                g, h = stage_ls_update(wd, k, Y, X, report.events)
                wd = wd.with_stage(k, g, h)
            try:
                new = wd.normalized()
            except np.linalg.LinAlgError:
                report.events.append("wdla: zero column after update, scaling kept")
                new = wd
            X = X * (wd.norm_diag / new.norm_diag)[:, None]
            wd = new
            D = wd.matrix()
            report.dict_after.append(frobenius2(Y - D @ X))
        with report.timed("coding"):
            X = omp_batch(D, Y, s).toarray()
        report.objective.append(frobenius2(Y - D @ X))
        if early_stop and should_stop(report.objective, report.data_energy, tol, patience):
            report.stopped_early = True
            break
    return wd, SparseCode.from_dense(X, s), report
