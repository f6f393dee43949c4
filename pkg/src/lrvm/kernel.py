"""Gaussian kernel, train-by-train Gram table and index lookups.

All kernel values go through :func:`cross_kernel`, so the Gram table, a
submatrix lookup and a direct recomputation on the same rows agree bit for
bit.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class KernelConfig:
    gamma: float

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class GramTable:
    values: np.ndarray
    gamma: float

    @property
    def source_count(self) -> int:
        return self.values.shape[0]


def _check_gamma(gamma):
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")


def cross_kernel(x, X_rows, gamma: float) -> np.ndarray:
    """Kernel values ``exp(-gamma * |x - row|^2)`` for every row of ``X_rows``."""
    _check_gamma(gamma)
    x = np.asarray(x, dtype=float)
    X_rows = np.asarray(X_rows, dtype=float)
    if X_rows.ndim == 1:
        X_rows = X_rows.reshape(-1, x.shape[0]) if X_rows.size == 0 else X_rows[None, :]
    if X_rows.shape[0] == 0:
        return np.empty(0)
    if X_rows.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {x.shape[0]} vs {X_rows.shape[1]}")
    diff = x - X_rows
    return np.exp(-gamma * np.sum(diff * diff, axis=1))


def gaussian_kernel(x, z, gamma: float) -> float:
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    if x.shape != z.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {z.shape}")
    return float(cross_kernel(x, z[None, :], gamma)[0])


def build_gram(X, gamma: float) -> GramTable:
    """Dense Gram table; each unordered pair is evaluated once and mirrored."""
    _check_gamma(gamma)
    X = np.asarray(X, dtype=float)
    N = X.shape[0]
    K = np.empty((N, N))
    for i in range(N):
        row = cross_kernel(X[i], X[i:], gamma)
        K[i, i:] = row
        K[i:, i] = row
    K.setflags(write=False)
    return GramTable(values=K, gamma=float(gamma))


def _check_index(idx, n: int) -> np.ndarray:
    idx = np.asarray(idx, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"index out of range for table of size {n}")
    if len(np.unique(idx)) != idx.size:
        raise ValueError("duplicate index in selection")
    return idx


def submatrix(table: GramTable, idx) -> np.ndarray:
    """The k-by-k block ``values[idx][:, idx]`` of the table."""
    idx = _check_index(idx, table.source_count)
    return table.values[np.ix_(idx, idx)]


_HEADER = struct.Struct("<Qd")


def save_gram(table: GramTable, path) -> None:
    """Binary cache: little-endian uint64 N, float64 gamma, then row-major float64 values."""
    with Path(path).open("wb") as fh:
        fh.write(_HEADER.pack(table.source_count, table.gamma))
        fh.write(np.ascontiguousarray(table.values, dtype="<f8").tobytes())


def load_gram(path) -> GramTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated Gram cache")
    n, gamma = _HEADER.unpack_from(raw)
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * n:
        raise ValueError(f"{path}: expected {n}x{n} values, found {len(body) // 8}")
    values = np.frombuffer(body, dtype="<f8").reshape(n, n).astype(float)
    values.setflags(write=False)
    return GramTable(values=values, gamma=gamma)
