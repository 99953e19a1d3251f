"""Stratified k-fold selection of C1 over a log10 grid."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..ordreg import TrainConfig, as_csr, predict_many, train_supervised
from .metrics import mean_zero_one

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(range(-3, 6))


@dataclass
class CVResult:
    c1: float
    exponents: tuple[float, ...]
    fold_errors: np.ndarray  # (grid point, fold)
    folds: int
    warnings: list[str] = field(default_factory=list)

    @property
    def mean_errors(self) -> np.ndarray:
        return self.fold_errors.mean(axis=1)


def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold id per sample. Each class is shuffled and dealt round-robin, the
    deal continuing across classes so fold sizes differ by at most one."""
    labels = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(seed)
    out = np.empty(labels.size, dtype=np.int64)
    pos = 0
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        out[idx] = (pos + np.arange(idx.size)) % folds
        pos += idx.size
    return out


def cross_validate_c1(cfg: TrainConfig, X, labels, K: int, grid=DEFAULT_GRID,
                      folds: int = 5, seed: int = 0) -> CVResult:
    """Pick the C1 with the lowest mean zero-one error across folds; ties go to
    the smaller C1."""
    X = as_csr(X)
    labels = np.asarray(labels, dtype=np.int64)
    grid = tuple(float(g) for g in grid)
    if not grid:
        raise DomainError("empty C1 grid")
    if X.shape[0] != labels.size:
        raise DomainError(f"{X.shape[0]} samples but {labels.size} labels")
    warnings = []
    n = labels.size
    if folds < 2:
        raise DomainError("need at least two folds")
    if n < folds:
        if n < 2:
            raise DomainError("cross-validation needs at least two labeled samples")
        log.warning("only %d labeled samples; reducing to %d folds", n, n)
        warnings.append(f"folds-reduced:{folds}->{n}")
        folds = n
    fold_of = stratified_folds(labels, folds, seed)
    errors = np.zeros((len(grid), folds))
    for f in range(folds):
        test = fold_of == f
        train = ~test
        for g, e in enumerate(grid):
            model = train_supervised(cfg.with_c1(10.0 ** e), X[train], labels[train], K)
            errors[g, f] = mean_zero_one(predict_many(model, X[test]), labels[test])
    means = errors.mean(axis=1)
    best = min(range(len(grid)), key=lambda g: (means[g], grid[g]))
    return CVResult(10.0 ** grid[best], grid, errors, folds, warnings)
