"""Core data types, the extended binary encoding, libsvm-style I/O and the
synthetic cluster-assumption generator.

Feature indices are stored 0-based in memory and written 1-based on disk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import IO, Iterable, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, ParseError

BAND_WIDTH = 2000
BASE_RATE = 0.01


class SparseVector:
    """Immutable sparse feature vector.

    Args:
        indices: 0-based feature indices, strictly increasing.
        values: matching non-zero values.
        dim: total dimensionality; every index must be ``< dim``.
    """

    __slots__ = ("indices", "values", "dim")

    def __init__(self, indices, values, dim: int):
        idx = np.asarray(indices, dtype=np.int64).ravel()
        val = np.asarray(values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise DomainError("indices and values differ in length")
        if dim < 0:
            raise DomainError(f"negative dimensionality {dim}")
        if idx.size:
            if np.any(np.diff(idx) <= 0):
                raise DomainError("indices must be strictly increasing")
            if idx[0] < 0 or idx[-1] >= dim:
                raise DomainError(f"index out of range for dim={dim}")
            if not np.all(np.isfinite(val)):
                raise DomainError("non-finite feature value")
            keep = val != 0.0
            if not keep.all():
                idx, val = idx[keep], val[keep]
        idx.flags.writeable = False
        val.flags.writeable = False
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)
        object.__setattr__(self, "dim", int(dim))

    def __setattr__(self, name, value):
        raise AttributeError("SparseVector is immutable")

    @classmethod
    def from_dense(cls, x) -> "SparseVector":
        x = np.asarray(x, dtype=np.float64).ravel()
        nz = np.flatnonzero(x)
        return cls(nz, x[nz], x.size)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]], dim: int) -> "SparseVector":
        pairs = list(pairs)
        if not pairs:
            return cls([], [], dim)
        idx, val = zip(*pairs)
        return cls(idx, val, dim)

    @property
    def nnz(self) -> int:
        return int(self.indices.size)

    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.indices, self.values)]

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.dim)
        out[self.indices] = self.values
        return out

    def with_dim(self, dim: int) -> "SparseVector":
        return SparseVector(self.indices, self.values, dim)

    def dot(self, other: "SparseVector") -> float:
        if self.dim != other.dim:
            raise DomainError(f"dimension mismatch: {self.dim} != {other.dim}")
        _, ia, ib = np.intersect1d(self.indices, other.indices,
                                   assume_unique=True, return_indices=True)
        return float(np.dot(self.values[ia], other.values[ib]))

    def sq_norm(self) -> float:
        return float(np.dot(self.values, self.values))

    def norm(self) -> float:
        return math.sqrt(self.sq_norm())

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return (self.dim == other.dim
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash((self.dim, self.indices.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"SparseVector(dim={self.dim}, entries={self.entries()})"


def to_csr(vectors: Sequence[SparseVector], dim: int | None = None) -> sp.csr_matrix:
    """Stack sparse vectors into a CSR matrix with one row per vector."""
    if dim is None:
        dim = vectors[0].dim if vectors else 0
    indptr = np.zeros(len(vectors) + 1, dtype=np.int64)
    for r, v in enumerate(vectors):
        if v.dim != dim:
            raise DomainError(f"dimension mismatch: {v.dim} != {dim}")
        indptr[r + 1] = indptr[r] + v.nnz
    if vectors:
        indices = np.concatenate([v.indices for v in vectors])
        data = np.concatenate([v.values for v in vectors])
    else:
        indices = np.zeros(0, dtype=np.int64)
        data = np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))


def from_csr(mat) -> list[SparseVector]:
    mat = sp.csr_matrix(mat)
    mat.sort_indices()
    dim = mat.shape[1]
    return [SparseVector(mat.indices[mat.indptr[r]:mat.indptr[r + 1]],
                         mat.data[mat.indptr[r]:mat.indptr[r + 1]], dim)
            for r in range(mat.shape[0])]


@dataclass
class OrdinalDataset:
    """Labeled samples with ordinal labels in ``1..K`` plus unlabeled samples."""

    labeled: list[tuple[SparseVector, int]]
    unlabeled: list[SparseVector]
    K: int
    dim: int

    def __post_init__(self):
        if self.K < 2:
            raise DomainError(f"need at least two classes, got K={self.K}")
        for x, y in self.labeled:
            if not 1 <= y <= self.K:
                raise DomainError(f"label {y} outside 1..{self.K}")
            if x.dim != self.dim:
                raise DomainError(f"dimension mismatch: {x.dim} != {self.dim}")
        for x in self.unlabeled:
            if x.dim != self.dim:
                raise DomainError(f"dimension mismatch: {x.dim} != {self.dim}")

    @property
    def n(self) -> int:
        return len(self.labeled)

    @property
    def u(self) -> int:
        return len(self.unlabeled)

    @property
    def vectors(self) -> list[SparseVector]:
        return [x for x, _ in self.labeled]

    @property
    def labels(self) -> np.ndarray:
        return np.array([y for _, y in self.labeled], dtype=np.int64)


@dataclass(frozen=True)
class AugmentedPoint:
    """One copy ``(x_base, e_k)`` of a sample in the extended binary problem."""

    base: int
    k: int
    binary_label: int | None = None


@dataclass(frozen=True)
class ClassRatios:
    ratios: tuple[float, ...]
    counts: tuple[int, ...] = ()

    def __post_init__(self):
        r = np.asarray(self.ratios)
        if np.any(r < 0) or np.any(r > 1) or abs(r.sum() - 1.0) > 1e-12:
            raise DomainError(f"invalid class ratios {self.ratios}")

    @classmethod
    def from_labels(cls, labels, K: int) -> "ClassRatios":
        labels = np.asarray(labels, dtype=np.int64)
        if labels.size == 0:
            raise DomainError("cannot compute class ratios of an empty label set")
        counts = np.bincount(labels, minlength=K + 1)[1:K + 1]
        return cls(tuple(float(c) / labels.size for c in counts),
                   tuple(int(c) for c in counts))


@dataclass(frozen=True)
class SynthConfig:
    K: int = 5
    p: float = 0.0
    n_samples: int = 2500
    seed: int = 0

    def __post_init__(self):
        if self.K < 2:
            raise DomainError(f"need at least two classes, got K={self.K}")
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")
        if self.n_samples < 1:
            raise DomainError("n_samples must be positive")

    @property
    def dim(self) -> int:
        return BAND_WIDTH * (self.K + 2)


def encode_extended(y: int, K: int) -> list[int]:
    """Binary labels ``1 - 2*[y <= k]`` for ``k = 1..K-1``."""
    if K < 2:
        raise DomainError(f"need at least two classes, got K={K}")
    if not 1 <= y <= K:
        raise DomainError(f"label {y} outside 1..{K}")
    return [1 - 2 * int(y <= k) for k in range(1, K)]


def extended_labels(labels, K: int) -> np.ndarray:
    """Vectorised :func:`encode_extended`; shape ``(len(labels), K-1)``."""
    labels = np.asarray(labels, dtype=np.int64)
    ks = np.arange(1, K)
    return np.where(labels[:, None] <= ks[None, :], -1, 1).astype(np.int64)


def quantize_targets(values: Sequence[float], K: int) -> list[int]:
    """Equal-frequency binning of real targets into ordinal labels ``1..K``.

    The sorted values are cut into K contiguous groups; the first ``N mod K``
    groups hold one extra element. Ties keep input order.
    """
    vals = np.asarray(values, dtype=np.float64)
    if K < 2:
        raise DomainError(f"need at least two classes, got K={K}")
    if vals.size < K:
        raise DomainError(f"{vals.size} values cannot fill {K} classes")
    order = np.argsort(vals, kind="stable")
    base, extra = divmod(vals.size, K)
    sizes = [base + (1 if g < extra else 0) for g in range(K)]
    labels = np.empty(vals.size, dtype=np.int64)
    labels[order] = np.repeat(np.arange(1, K + 1), sizes)
    return labels.tolist()


def _band_mask(y: int, K: int) -> np.ndarray:
    # half-open [2000(y-1), 2000(y+2)) over 1-based d, clipped to [1, D]
    D = BAND_WIDTH * (K + 2)
    lo = max(BAND_WIDTH * (y - 1), 1)
    hi = min(BAND_WIDTH * (y + 2), D + 1)
    mask = np.zeros(D, dtype=bool)
    mask[lo - 1:hi - 1] = True
    return mask


def gen_synthetic(cfg: SynthConfig) -> OrdinalDataset:
    """Sparse ordinal data whose class bands overlap more as ``p`` grows.

    Each sample draws its class uniformly; features inside the class band are
    active with rate 0.01, features outside with rate ``0.01 * p``. Active
    values are uniform on [0, 1) and every vector is scaled to unit length.
    All samples come back labeled.
    """
    rng = np.random.default_rng(cfg.seed)
    K, D = cfg.K, cfg.dim
    rates = {y: np.where(_band_mask(y, K), BASE_RATE, BASE_RATE * cfg.p)
             for y in range(1, K + 1)}
    labeled = []
    for _ in range(cfg.n_samples):
        y = int(rng.integers(1, K + 1))
        while True:
            idx = np.flatnonzero(rng.random(D) < rates[y])
            if idx.size:
                break
        val = rng.random(idx.size)
        # rand() may return exactly 0.0; such a draw contributes nothing
        keep = val > 0
        idx, val = idx[keep], val[keep]
        if not idx.size:
            continue
        val = val / np.linalg.norm(val)
        labeled.append((SparseVector(idx, val, D), y))
    while len(labeled) < cfg.n_samples:  # pragma: no cover - needs rand() == 0
        labeled.extend(gen_synthetic(SynthConfig(K, cfg.p, 1, int(rng.integers(2**31)))).labeled)
    return OrdinalDataset(labeled=labeled, unlabeled=[], K=K, dim=D)


class LibsvmData(NamedTuple):
    vectors: list[SparseVector]
    labels: list[int]
    dim: int


def parse_libsvm(stream: IO[str] | Iterable[str], dim: int | None = None) -> LibsvmData:
    """Parse ``label idx:val ...`` lines with 1-based strictly increasing indices.

    Label 0 marks an unlabeled row. Blank lines and lines starting with ``#``
    are skipped. ``dim`` overrides the inferred dimensionality (the largest
    index seen).
    """
    rows = []
    max_index = 0
    for lineno, raw in enumerate(stream, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        try:
            label_f = float(tokens[0])
        except ValueError:
            raise ParseError(f"bad label {tokens[0]!r}", lineno) from None
        if not label_f.is_integer():
            raise ParseError(f"ordinal label must be an integer, got {tokens[0]!r}", lineno)
        idx, val = [], []
        prev = 0
        for tok in tokens[1:]:
            key, sep, value = tok.partition(":")
            if not sep:
                raise ParseError(f"expected idx:val, got {tok!r}", lineno)
            try:
                i = int(key)
                v = float(value)
            except ValueError:
                raise ParseError(f"bad feature token {tok!r}", lineno) from None
            if i < 1:
                raise ParseError(f"feature index {i} is not positive", lineno)
            if i <= prev:
                raise ParseError(f"feature indices must increase ({prev} then {i})", lineno)
            if not math.isfinite(v):
                raise ParseError(f"non-finite feature value {tok!r}", lineno)
            prev = i
            idx.append(i - 1)
            val.append(v)
        max_index = max(max_index, prev)
        rows.append((int(label_f), idx, val, lineno))
    if dim is None:
        dim = max_index
    elif dim < max_index:
        raise ParseError(f"feature index {max_index} exceeds dim={dim}")
    vectors = [SparseVector(i, v, dim) for _, i, v, _ in rows]
    return LibsvmData(vectors, [r[0] for r in rows], dim)


def write_libsvm(stream: IO[str], vectors: Sequence[SparseVector], labels: Sequence[int]) -> None:
    if len(vectors) != len(labels):
        raise DomainError("vectors and labels differ in length")
    for x, y in zip(vectors, labels):
        feats = " ".join(f"{i + 1}:{v!r}" for i, v in zip(x.indices.tolist(), x.values.tolist()))
        stream.write(f"{int(y)} {feats}".rstrip() + "\n")


def load_dataset(labeled_path, K: int, unlabeled_path=None, dim: int | None = None) -> OrdinalDataset:
    """Read a labeled file (and optionally an unlabeled one) into a dataset."""
    with open(labeled_path, encoding="utf-8") as fh:
        lab = parse_libsvm(fh, dim)
    unl = LibsvmData([], [], lab.dim)
    if unlabeled_path is not None:
        with open(unlabeled_path, encoding="utf-8") as fh:
            unl = parse_libsvm(fh, dim)
    D = dim if dim is not None else max(lab.dim, unl.dim)
    labeled, unlabeled = [], []
    for x, y in zip(lab.vectors, lab.labels):
        if y == 0:
            unlabeled.append(x.with_dim(D))
        else:
            labeled.append((x.with_dim(D), y))
    unlabeled.extend(x.with_dim(D) for x in unl.vectors)
    return OrdinalDataset(labeled=labeled, unlabeled=unlabeled, K=K, dim=D)
