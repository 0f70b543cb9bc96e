"""Matrix, image and signal file formats.

SIMX layout: ``b"SIMX"``, u32 rows, u32 cols (little endian), then
``rows * cols`` little-endian float64 values in column-major order.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "write_simx",
    "read_simx",
    "write_csv_matrix",
    "read_csv_matrix",
    "read_pgm",
    "write_pgm",
    "load_signal",
    "load_images",
]

_MAGIC = b"SIMX"


def write_simx(path, M):
    M = np.asarray(M, dtype="<f8")
    if M.ndim == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ValueError("SIMX stores matrices or vectors only")
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", rows, cols))
        fh.write(np.asfortranarray(M).tobytes(order="F"))


def read_simx(path):
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a SIMX file")
    rows, cols = struct.unpack("<II", data[4:12])
    payload = data[12:]
    if len(payload) != 8 * rows * cols:
        raise ValueError(f"{path}: expected {rows}x{cols} payload, got {len(payload)} bytes")
    return np.frombuffer(payload, dtype="<f8").reshape((rows, cols), order="F").astype(float)


def write_csv_matrix(path, M):
    """Headerless CSV, one matrix row per line, '.' decimal separator."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        for row in M:
            writer.writerow([repr(float(v)) for v in row])


def read_csv_matrix(path):
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ValueError(f"{path}: ragged CSV rows")
    return np.array(rows)


def _pgm_tokens(data, count, pos):
    tokens = []
    while len(tokens) < count:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    return tokens, pos + 1


def read_pgm(path):
    """Read a binary (P5) PGM image as a float array."""
    data = Path(path).read_bytes()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: only binary P5 PGM is supported")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    size = w * h * np.dtype(dtype).itemsize
    pixels = np.frombuffer(data[pos : pos + size], dtype=dtype)
    if pixels.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return pixels.reshape(h, w).astype(float)


def write_pgm(path, img):
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError("PGM images are 2-D")
    pix = np.clip(np.round(img), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (pix.shape[1], pix.shape[0]))
        fh.write(pix.tobytes())


def load_signal(path):
    """1-D signal from a single-column CSV or a SIMX vector."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    M = read_simx(path) if head == _MAGIC else read_csv_matrix(path)
    if min(M.shape) != 1:
        raise ValueError(f"{path}: expected a single column, got shape {M.shape}")
    return M.ravel()


def load_images(directory):
    paths = sorted(Path(directory).glob("*.pgm"))
    if not paths:
        raise FileNotFoundError(f"no .pgm images in {directory}")
    return [read_pgm(p) for p in paths]
