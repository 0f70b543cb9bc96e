"""FFT-backed circulant algebra.

All transforms use the unitary convention: ``F^H F = I`` so that
``fft_columns(c) = FFT(c) / sqrt(n)``.  The eigenvalues of ``circ(c)`` are
``sigma = sqrt(n) * F c``, which coincides with the unnormalized FFT of ``c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Spectrum",
    "CirculantOperator",
    "fft_columns",
    "ifft_columns",
    "circulant_apply",
    "circulant_matrix",
    "shift_vector",
    "embed_conv",
    "hermitian_mirror",
]


def _as_2d(M):
    M = np.asarray(M)
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError(f"expected a vector or matrix, got shape {M.shape}")
    if M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"empty matrix of shape {M.shape}")
    return M


def fft_columns(M):
    """Unitary FFT of every column of ``M`` (n x N) -> complex n x N."""
    M = _as_2d(M)
    return np.fft.fft(M, axis=0, norm="ortho")


def ifft_columns(M, real=True):
    """Unitary inverse FFT of every column.

    With ``real=True`` the imaginary part is dropped; callers that need to
    check it should pass ``real=False``.
    """
    M = _as_2d(M)
    out = np.fft.ifft(M, axis=0, norm="ortho")
    return out.real if real else out


def hermitian_mirror(values):
    """Overwrite bins n-k with conj(bin k) along axis 0 (k = 1..n//2).

    Bin 0 and, for even n, bin n/2 are forced real.
    """
    v = np.array(values, dtype=complex, copy=True)
    n = v.shape[0]
    half = n // 2
    v[0] = v[0].real
    if n % 2 == 0:
        v[half] = v[half].real
        k = np.arange(1, half)
    else:
        k = np.arange(1, half + 1)
    v[n - k] = np.conj(v[k])
    return v


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues of a real circulant, full length ``n``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("spectrum must be a non-empty vector")
        object.__setattr__(self, "values", v)

    @property
    def size(self):
        return self.values.size

    @classmethod
    def from_generator(cls, c):
        return cls(np.fft.fft(np.asarray(c, dtype=float)))

    def generator(self, check=True):
        """Real first column ``c`` with ``circ(c) = F^H diag(values) F``."""
        c = np.fft.ifft(self.values)
        if check:
            scale = max(np.abs(c).max(), 1.0)
            if np.abs(c.imag).max() > 1e-10 * scale:
                raise ValueError("spectrum is not conjugate symmetric")
        return c.real

    def is_conjugate_symmetric(self, tol=1e-10):
        v = self.values
        mirrored = np.conj(v[(-np.arange(v.size)) % v.size])
        return bool(np.allclose(v, mirrored, rtol=0, atol=tol * max(1.0, np.abs(v).max())))

    def norm(self):
        """l2 norm of the generator (``||sigma|| / sqrt(n)``)."""
        return float(np.linalg.norm(self.values) / np.sqrt(self.size))

    def normalized(self):
        """Return ``(unit-generator spectrum, scale)``; scale = old generator norm."""
        scale = self.norm()
        if scale == 0.0:
            return self, 0.0
        return Spectrum(self.values / scale), scale


@dataclass(frozen=True)
class CirculantOperator:
    """``circ(c)``: every column is a cyclic down-shift of the previous one."""

    first_column: np.ndarray
    _spectrum: Spectrum | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        c = np.asarray(self.first_column, dtype=float)
        if c.ndim != 1 or c.size < 1:
            raise ValueError("generator must be a non-empty vector")
        object.__setattr__(self, "first_column", c)

    @property
    def size(self):
        return self.first_column.size

    @property
    def spectrum(self):
        if self._spectrum is None:
            object.__setattr__(self, "_spectrum", Spectrum.from_generator(self.first_column))
        return self._spectrum

    def dense(self):
        return circulant_matrix(self.first_column)

    def __matmul__(self, M):
        return circulant_apply(self, M)


def circulant_apply(op, M):
    """Compute ``circ(c) @ M`` as ``F^H diag(sigma) F M`` in O(nN log n)."""
    if not isinstance(op, CirculantOperator):
        op = CirculantOperator(op)
    M = np.asarray(M, dtype=float)
    vec = M.ndim == 1
    M2 = _as_2d(M)
    if M2.shape[0] != op.size:
        raise ValueError(f"operator of size {op.size} cannot act on {M2.shape[0]} rows")
    out = np.fft.ifft(op.spectrum.values[:, None] * np.fft.fft(M2, axis=0), axis=0).real
    return out[:, 0] if vec else out


def circulant_matrix(c):
    """Dense ``circ(c)`` built column by column (reference construction)."""
    c = np.asarray(c, dtype=float)
    n = c.size
    return c[(np.arange(n)[:, None] - np.arange(n)[None, :]) % n]


def shift_vector(x, q):
    """Cyclic down-shift by ``q`` positions, i.e. ``P^q x``."""
    return np.roll(np.asarray(x), int(q))


def embed_conv(c, m):
    """Circulant of size ``p = n + m - 1`` whose action on zero-padded inputs
    of length ``m`` is the full linear convolution with ``c``."""
    c = np.asarray(c, dtype=float)
    if c.ndim != 1 or c.size < 1:
        raise ValueError("kernel must be a non-empty vector")
    if m < 1:
        raise ValueError(f"input length m must be >= 1, got {m}")
    p = c.size + m - 1
    gen = np.zeros(p)
    gen[: c.size] = c
    return CirculantOperator(gen)
