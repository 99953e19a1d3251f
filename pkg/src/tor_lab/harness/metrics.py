"""Error measures on ordinal predictions."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError


def _pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred, dtype=np.int64).ravel()
    truth = np.asarray(truth, dtype=np.int64).ravel()
    if pred.size != truth.size:
        raise DomainError(f"{pred.size} predictions for {truth.size} labels")
    if pred.size == 0:
        raise DomainError("cannot score an empty prediction set")
    return pred, truth


def mean_zero_one(pred, truth) -> float:
    """Fraction of positions where ``pred != truth``."""
    pred, truth = _pair(pred, truth)
    return float(np.count_nonzero(pred != truth)) / pred.size


def mean_absolute(pred, truth) -> float:
    """Mean rank distance ``|pred - truth|``."""
    pred, truth = _pair(pred, truth)
    return float(np.abs(pred - truth).sum()) / pred.size
