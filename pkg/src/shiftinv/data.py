"""Datasets: synthetic shift-invariant signals, ECG segments, image patches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SyntheticSpec",
    "GroundTruth",
    "gen_synthetic",
    "remove_dc",
    "ecg_segments",
    "synthetic_ecg",
    "image_patches",
    "patches_to_image",
    "procedural_images",
]


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic union-of-shifted-kernels dataset.

    Every column mixes ``s`` distinct kernels out of ``L``, each shifted by
    one of the first ``q`` cyclic shifts and scaled by a coefficient drawn
    uniformly from ``coeff_range``.
    """

    n: int = 20
    N: int = 2000
    L: int = 45
    s: int = 4
    q: int = 3
    coeff_range: tuple = (-10.0, 10.0)
    snr_db: float | None = None
    seed: int = 0
    noise_scope: str = "dataset"

    def validate(self):
        for name in ("n", "N", "L", "s", "q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.q > self.n:
            raise ValueError(f"q={self.q} shifts exceed signal length n={self.n}")
        if self.s > self.L:
            raise ValueError(f"s={self.s} distinct kernels requested from only L={self.L}")
        lo, hi = self.coeff_range
        if not lo < hi:
            raise ValueError("coeff_range must be an increasing interval")
        if self.noise_scope not in ("dataset", "column"):
            raise ValueError("noise_scope must be 'dataset' or 'column'")
        return self


@dataclass
class GroundTruth:
    """Generating kernels and, per column, the (kernel, shift, coefficient) triples."""

    kernels: np.ndarray
    kernel_index: np.ndarray
    shifts: np.ndarray
    coefs: np.ndarray
    noise: np.ndarray

    def clean_signals(self):
        L, n = self.kernels.shape
        N = self.kernel_index.shape[0]
        Y = np.zeros((n, N))
        for t in range(self.kernel_index.shape[1]):
            atoms = self.kernels[self.kernel_index[:, t]]
            rows = (np.arange(n)[None, :] - self.shifts[:, t][:, None]) % n
            Y += (self.coefs[:, t][:, None] * np.take_along_axis(atoms, rows, axis=1)).T
        return Y

    def code_matrix(self):
        """Sparse code over the union of ``L`` circulants (``nL x N``)."""
        L, n = self.kernels.shape
        N = self.kernel_index.shape[0]
        X = np.zeros((n * L, N))
        rows = self.kernel_index * n + self.shifts
        np.add.at(X, (rows, np.broadcast_to(np.arange(N)[:, None], rows.shape)), self.coefs)
        return X


def gen_synthetic(spec):
    """Draw ``Y = sum alpha P^q c + noise`` and its ground truth (deterministic in ``spec.seed``)."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n, N, L, s, q = spec.n, spec.N, spec.L, spec.s, spec.q
    kernels = rng.standard_normal((L, n))
    kernels /= np.linalg.norm(kernels, axis=1, keepdims=True)
    kernel_index = np.argsort(rng.random((N, L)), axis=1)[:, :s]
    shifts = rng.integers(0, q, size=(N, s))
    lo, hi = spec.coeff_range
    coefs = rng.uniform(lo, hi, size=(N, s))
    truth = GroundTruth(kernels, kernel_index, shifts, coefs, np.zeros((n, N)))
    clean = truth.clean_signals()
    if spec.snr_db is not None:
        noise = rng.standard_normal((n, N))
        target = 10.0 ** (-spec.snr_db / 10.0)
        if spec.noise_scope == "dataset":
            noise *= np.sqrt(target * np.sum(clean**2) / np.sum(noise**2))
        else:
            noise *= np.sqrt(target * np.sum(clean**2, axis=0) / np.sum(noise**2, axis=0))
        truth.noise = noise
    return clean + truth.noise, truth


def remove_dc(Y):
    """Subtract column means; returns ``(centered, means)``."""
    Y = np.asarray(Y, dtype=float)
    means = Y.mean(axis=0)
    return Y - means, means


def ecg_segments(signal, p):
    """Cut a 1-D signal into ``floor(len / p)`` centered, non-overlapping columns."""
    x = np.asarray(signal, dtype=float).ravel()
    if p < 1:
        raise ValueError("segment length must be positive")
    if x.size < p:
        raise ValueError(f"signal of length {x.size} is shorter than one segment ({p})")
    N = x.size // p
    Y = x[: N * p].reshape(N, p).T
    return remove_dc(Y)[0]


def synthetic_ecg(n_samples, fs=128.0, seed=0, noise=0.01):
    """ECG-like test signal: P-QRS-T beats with jittered RR intervals, mild
    baseline wander and white noise.  Used when no recorded ECG is supplied."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_samples)
    x = 0.03 * np.sin(2 * np.pi * 0.2 * t / fs + rng.uniform(0, 2 * np.pi))
    # (offset in samples, amplitude, width in samples)
    waves = [(-18, 0.12, 2.5), (-2, -0.12, 1.0), (0, 1.0, 1.2), (3, -0.25, 1.2), (24, 0.25, 4.0)]
    rr = 0.83 * fs
    pos = rng.uniform(0, rr)
    while pos < n_samples + 40:
        amp = 1.0 + 0.05 * rng.standard_normal()
        for off, a, w in waves:
            center = pos + off
            lo, hi = int(max(center - 6 * w, 0)), int(min(center + 6 * w + 1, n_samples))
            if lo < hi:
                seg = t[lo:hi]
                x[lo:hi] += amp * a * np.exp(-0.5 * ((seg - center) / w) ** 2)
        pos += rr * (1.0 + 0.05 * rng.standard_normal())
    return x + noise * rng.standard_normal(n_samples)


def _crop(img, patch):
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ValueError("expected a 2-D grayscale image")
    if patch < 1 or patch > min(img.shape):
        raise ValueError(f"patch size {patch} does not fit image of shape {img.shape}")
    H = img.shape[0] - img.shape[0] % patch
    W = img.shape[1] - img.shape[1] % patch
    return img[:H, :W]


def image_patches(img, patch, return_means=False):
    """Non-overlapping ``patch x patch`` blocks as centered columns.

    Each block is vectorized column-major; blocks are ordered row by row
    over the block grid.  Images are cropped to a multiple of ``patch``.
    """
    img = _crop(img, patch)
    H, W = img.shape
    blocks = img.reshape(H // patch, patch, W // patch, patch).transpose(0, 2, 3, 1)
    Y = blocks.reshape(-1, patch * patch).T
    Y, means = remove_dc(Y)
    return (Y, means) if return_means else Y


def patches_to_image(Y, means, shape, patch):
    """Inverse of :func:`image_patches` for the cropped image of ``shape``."""
    H = shape[0] - shape[0] % patch
    W = shape[1] - shape[1] % patch
    cols = (np.asarray(Y) + np.asarray(means)[None, :]).T
    blocks = cols.reshape(H // patch, W // patch, patch, patch).transpose(0, 3, 1, 2)
    return blocks.reshape(H, W)


def procedural_images(size=256, seed=0):
    """A small deterministic grayscale corpus (uint8) of piecewise-smooth
    scenes and textures, used when no image directory is supplied."""
    rng = np.random.default_rng(seed)
    y, x = np.mgrid[0:size, 0:size] / size
    images = []

    scene = 90 + 60 * x + 30 * y
    for _ in range(12):
        cx, cy, r = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0.05, 0.2)
        scene = np.where((x - cx) ** 2 + (y - cy) ** 2 < r * r, rng.uniform(20, 235), scene)
    images.append(scene)

    tex = 128 + 40 * np.sin(2 * np.pi * (6 * x + 2 * y)) + 30 * np.sin(2 * np.pi * 11 * y * (1 + 0.3 * x))
    images.append(tex)

    blocks = np.full((size, size), 128.0)
    for _ in range(20):
        x0, y0 = rng.integers(0, size, 2)
        w, h = rng.integers(size // 16, size // 3, 2)
        blocks[y0 : y0 + h, x0 : x0 + w] = rng.uniform(30, 225) + 20 * x[y0 : y0 + h, x0 : x0 + w]
    images.append(blocks)

    f = np.fft.fftfreq(size)
    fx, fy = np.meshgrid(f, f)
    amp = 1.0 / np.maximum(np.hypot(fx, fy), 1.0 / size) ** 1.6
    phase = np.exp(2j * np.pi * rng.random((size, size)))
    cloud = np.fft.ifft2(amp * phase).real
    cloud = (cloud - cloud.min()) / (cloud.max() - cloud.min())
    images.append(20 + 215 * cloud)

    return [np.clip(np.round(im), 0, 255).astype(np.uint8) for im in images]
