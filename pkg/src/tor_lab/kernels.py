"""Kernels over sparse vectors, the augmented kernel of the extended binary
problem, and an LRU cache of Gram rows for the solvers.

Augmented points are always ordered sample-major: point ``(i, k)`` sits at
position ``i * (K - 1) + (k - 1)``.
"""
from __future__ import annotations

import math
import os
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .data import OrdinalDataset, SparseVector, to_csr
from .errors import DomainError

KERNELS = ("linear", "perceptron", "cosine")
DEFAULT_CACHE_BYTES = 256 * 1024 * 1024
CACHE_ENV = "TOR_LAB_CACHE_BYTES"


def default_cache_bytes() -> int:
    raw = os.environ.get(CACHE_ENV)
    if raw is None:
        return DEFAULT_CACHE_BYTES
    try:
        value = int(float(raw))
    except ValueError:
        raise DomainError(f"{CACHE_ENV}={raw!r} is not a byte count") from None
    if value < 0:
        raise DomainError(f"{CACHE_ENV} must be non-negative")
    return value


@dataclass(frozen=True)
class KernelKind:
    """Kernel selection.

    ``perceptron`` is ``delta_p - ||x - x'||``; ``precompute`` asks the Gram
    cache to hold the whole base Gram matrix when it fits the byte budget.
    """

    variant: str = "linear"
    delta_p: float = 0.0
    precompute: bool = True

    def __post_init__(self):
        if self.variant not in KERNELS:
            raise DomainError(f"unknown kernel {self.variant!r}; expected one of {KERNELS}")
        if not math.isfinite(self.delta_p):
            raise DomainError("delta_p must be finite")

    def to_dict(self) -> dict:
        return {"variant": self.variant, "delta_p": self.delta_p, "precompute": self.precompute}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelKind":
        return cls(d["variant"], float(d.get("delta_p", 0.0)), bool(d.get("precompute", True)))


def _sq_distance(x: SparseVector, z: SparseVector) -> float:
    union = np.union1d(x.indices, z.indices)
    diff = np.zeros(union.size)
    diff[np.searchsorted(union, x.indices)] += x.values
    diff[np.searchsorted(union, z.indices)] -= z.values
    return float(np.dot(diff, diff))


def kernel_eval(kind: KernelKind, x: SparseVector, z: SparseVector) -> float:
    if x.dim != z.dim:
        raise DomainError(f"dimension mismatch: {x.dim} != {z.dim}")
    if kind.variant == "linear":
        return x.dot(z)
    if kind.variant == "perceptron":
        return kind.delta_p - math.sqrt(_sq_distance(x, z))
    nx, nz = x.norm(), z.norm()
    if nx == 0.0 or nz == 0.0:
        raise DomainError("cosine kernel is undefined for a zero vector")
    return x.dot(z) / (nx * nz)


def augmented_kernel(kind: KernelKind, xi: SparseVector, k: int, xj: SparseVector, k2: int) -> float:
    """Kernel between ``(xi, e_k)`` and ``(xj, e_k2)``."""
    return kernel_eval(kind, xi, xj) + (1.0 if k == k2 else 0.0)


def cross_gram(kind: KernelKind, A: sp.csr_matrix, B: sp.csr_matrix,
               same: bool = False) -> np.ndarray:
    """Dense base-kernel matrix between the rows of ``A`` and ``B``.

    ``same=True`` declares ``A is B`` so the perceptron diagonal is exact.
    """
    if A.shape[1] != B.shape[1]:
        raise DomainError(f"dimension mismatch: {A.shape[1]} != {B.shape[1]}")
    dots = np.asarray((A @ B.T).todense(), dtype=np.float64)
    if kind.variant == "linear":
        return dots
    na = np.asarray(A.multiply(A).sum(axis=1)).ravel()
    nb = na if same else np.asarray(B.multiply(B).sum(axis=1)).ravel()
    if kind.variant == "cosine":
        if np.any(na == 0) or np.any(nb == 0):
            raise DomainError("cosine kernel is undefined for a zero vector")
        return dots / np.sqrt(na)[:, None] / np.sqrt(nb)[None, :]
    sq = np.maximum(na[:, None] + nb[None, :] - 2.0 * dots, 0.0)
    if same:
        np.fill_diagonal(sq, 0.0)
    return kind.delta_p - np.sqrt(sq)


class GramCache:
    """Base-kernel rows over a fixed sample list, with augmented-row views.

    Rows are computed on demand and kept under a strict LRU policy bounded by
    ``budget_bytes``. When ``kind.precompute`` is set and the full matrix fits
    the budget it is built once up front instead.
    """

    def __init__(self, kind: KernelKind, X: sp.csr_matrix, budget_bytes: int | None = None):
        self.kind = kind
        self.X = sp.csr_matrix(X, dtype=np.float64)
        self.N = self.X.shape[0]
        self.budget = default_cache_bytes() if budget_bytes is None else int(budget_bytes)
        self._lock = threading.Lock()
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0
        sq = np.asarray(self.X.multiply(self.X).sum(axis=1)).ravel()
        if kind.variant == "cosine" and np.any(sq == 0):
            raise DomainError("cosine kernel is undefined for a zero vector")
        self._sq = sq
        if kind.variant == "linear":
            self.diag = sq.copy()
        elif kind.variant == "cosine":
            self.diag = np.ones(self.N)
        else:
            self.diag = np.full(self.N, kind.delta_p)
        self.full: np.ndarray | None = None
        if kind.precompute and self.N * self.N * 8 <= self.budget:
            self.full = cross_gram(kind, self.X, self.X, same=True)

    @classmethod
    def from_vectors(cls, kind: KernelKind, vectors: Sequence[SparseVector],
                     budget_bytes: int | None = None) -> "GramCache":
        return cls(kind, to_csr(vectors), budget_bytes)

    @classmethod
    def from_dataset(cls, kind: KernelKind, dataset: OrdinalDataset,
                     budget_bytes: int | None = None) -> "GramCache":
        """Samples ordered labeled first, then unlabeled."""
        vectors = dataset.vectors + list(dataset.unlabeled)
        return cls(kind, to_csr(vectors, dataset.dim), budget_bytes)

    def _compute_row(self, i: int) -> np.ndarray:
        row = cross_gram(self.kind, self.X[i], self.X).ravel()
        row[i] = self.diag[i]
        return row

    def row(self, i: int) -> np.ndarray:
        """Base-kernel row of sample ``i`` against all samples (read-only)."""
        if self.full is not None:
            self.hits += 1
            return self.full[i]
        with self._lock:
            cached = self._rows.get(i)
            if cached is not None:
                self._rows.move_to_end(i)
                self.hits += 1
                return cached
        row = self._compute_row(i)
        row.flags.writeable = False
        with self._lock:
            self.misses += 1
            self._rows[i] = row
            self._rows.move_to_end(i)
            row_bytes = row.nbytes
            while len(self._rows) > 1 and len(self._rows) * row_bytes > self.budget:
                self._rows.popitem(last=False)
        return row

    def __contains__(self, i: int) -> bool:
        return self.full is not None or i in self._rows

    def gram_row(self, point: tuple[int, int], K: int) -> np.ndarray:
        """Augmented Gram row of point ``(i, k)`` over all ``N*(K-1)`` points."""
        i, k = point
        if not 0 <= i < self.N or not 1 <= k <= K - 1:
            raise DomainError(f"augmented point {point} out of range")
        out = np.repeat(self.row(i), K - 1)
        out[k - 1::K - 1] += 1.0
        return out

    def matvec(self, c: np.ndarray) -> np.ndarray:
        """``G @ c`` over the base kernel, where ``G`` is the full Gram matrix."""
        c = np.asarray(c, dtype=np.float64)
        if self.full is not None:
            return self.full @ c
        if self.kind.variant == "linear":
            return self.X @ (self.X.T @ c)
        if self.kind.variant == "cosine":
            inv = 1.0 / np.sqrt(self._sq)
            return inv * (self.X @ (self.X.T @ (inv * c)))
        out = np.zeros(self.N)
        for j in np.flatnonzero(c):
            out += c[j] * self.row(int(j))
        return out

    def quad(self, c: np.ndarray) -> float:
        """``c @ G @ c``."""
        return float(np.dot(c, self.matvec(c)))


def gram_row(kind: KernelKind, dataset: OrdinalDataset, point: tuple[int, int],
             cache: GramCache | None = None) -> np.ndarray:
    if cache is None:
        cache = GramCache.from_dataset(kind, dataset)
    return cache.gram_row(point, dataset.K)
