"""Binary margin losses, the superimposed ordinal loss and swap gains."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np

from .data import encode_extended
from .errors import DomainError


class LossKind(str, Enum):
    HINGE = "hinge"
    SQUARE_HINGE = "square_hinge"
    LOGISTIC = "logistic"
    SQUARE = "square"
    LAPLACIAN = "laplacian"

    @classmethod
    def parse(cls, name) -> "LossKind":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).replace("-", "_").lower())
        except ValueError:
            choices = ", ".join(k.value.replace("_", "-") for k in cls)
            raise DomainError(f"unknown loss {name!r}; expected one of {choices}") from None


def _check_finite(a):
    if not np.all(np.isfinite(a)):
        raise DomainError("loss argument must be finite")


def binary_loss_array(kind: LossKind, y, a) -> np.ndarray:
    """Elementwise binary loss for labels ``y`` in {-1, +1} at scores ``a``."""
    kind = LossKind.parse(kind)
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    _check_finite(a)
    m = y * a
    if kind is LossKind.HINGE:
        return np.maximum(0.0, 1.0 - m)
    if kind is LossKind.SQUARE_HINGE:
        return np.maximum(0.0, 1.0 - m) ** 2
    if kind is LossKind.LOGISTIC:
        # softplus(-m); logaddexp stays finite for large |m|
        return np.logaddexp(0.0, -m)
    if kind is LossKind.SQUARE:
        return (a - y) ** 2
    return np.abs(a - y)


def binary_loss_grad(kind: LossKind, y, a) -> np.ndarray:
    """A subgradient of :func:`binary_loss_array` with respect to ``a``."""
    kind = LossKind.parse(kind)
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    m = y * a
    if kind is LossKind.HINGE:
        return np.where(m < 1.0, -y, 0.0)
    if kind is LossKind.SQUARE_HINGE:
        return -2.0 * y * np.maximum(0.0, 1.0 - m)
    if kind is LossKind.LOGISTIC:
        return -y / (1.0 + np.exp(np.clip(m, -700, 700)))
    if kind is LossKind.SQUARE:
        return 2.0 * (a - y)
    return np.sign(a - y)


def binary_loss(kind: LossKind, y: int, a: float) -> float:
    if y not in (-1, 1):
        raise DomainError(f"binary label must be -1 or +1, got {y}")
    return float(binary_loss_array(kind, y, a))


def ordinal_loss(kind: LossKind, y: int, h: float, theta, b: float = 0.0) -> float:
    """Sum over the K-1 boundaries of the binary loss at ``h - theta_k - b``."""
    theta = np.asarray(theta, dtype=np.float64)
    K = theta.size + 1
    ys = np.asarray(encode_extended(y, K))
    return float(binary_loss_array(kind, ys, h - theta - b).sum())


def ordinal_loss_array(kind: LossKind, labels, h, theta, b: float = 0.0) -> np.ndarray:
    """Vectorised :func:`ordinal_loss` over samples."""
    theta = np.asarray(theta, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    h = np.asarray(h, dtype=np.float64)
    ks = np.arange(1, theta.size + 1)
    ys = np.where(labels[:, None] <= ks[None, :], -1.0, 1.0)
    g = h[:, None] - theta[None, :] - b
    return binary_loss_array(kind, ys, g).sum(axis=1)


def boundary_swap_delta(kind: LossKind, g_up, g_down):
    """Loss change at boundary k when one sample moves k -> k+1 (score ``g_up``)
    and another moves k+1 -> k (score ``g_down``).

    Adjacent classes differ only in the boundary-k binary label, so every
    other term cancels exactly.
    """
    up = binary_loss_array(kind, 1, g_up) - binary_loss_array(kind, -1, g_up)
    down = binary_loss_array(kind, -1, g_down) - binary_loss_array(kind, 1, g_down)
    return up, down


def swap_gain(kind: LossKind, y_i: int, y_j: int, h_i: float, h_j: float,
              theta, b: float = 0.0) -> float:
    """Change in the summed ordinal loss when ``y_i -> y_i + 1`` and
    ``y_j -> y_j - 1``. Negative values mean the swap lowers the loss."""
    if y_i != y_j - 1:
        raise DomainError(f"labels {y_i} and {y_j} are not adjacent (need y_i = y_j - 1)")
    theta = np.asarray(theta, dtype=np.float64)
    if not 1 <= y_i <= theta.size:
        raise DomainError(f"label {y_i} has no upper neighbour for K={theta.size + 1}")
    t = theta[y_i - 1] + b
    up, down = boundary_swap_delta(kind, h_i - t, h_j - t)
    return float(up + down)


@dataclass(frozen=True)
class Thresholds:
    values: tuple[float, ...]

    def is_ordered(self, tol: float = 1e-6) -> bool:
        return bool(np.all(np.diff(np.asarray(self.values)) >= -tol))


def predict_from_scores(h, theta, b: float = 0.0):
    """``1 + #{k : h - theta_k - b > 0}``, scalar or vectorised."""
    theta = np.asarray(theta, dtype=np.float64)
    h_arr = np.asarray(h, dtype=np.float64)
    out = 1 + (h_arr[..., None] - theta - b > 0).sum(axis=-1)
    return int(out) if out.ndim == 0 else out.astype(np.int64)


@dataclass
class AxiomReport:
    passed: bool
    trials: int
    counterexample: dict | None = None

    def __bool__(self):
        return self.passed


LossLike = LossKind | str | Callable[[float, float], float]


def _as_callable(kind: LossLike) -> Callable[[float, float], float]:
    if callable(kind) and not isinstance(kind, (LossKind, str)):
        return kind
    k = LossKind.parse(kind)
    return lambda y, a: float(binary_loss_array(k, y, a))


def check_def3(kind: LossLike, trials: int = 1000, seed: int = 0) -> AxiomReport:
    """Check ``l_1(-a) > l_1(a)`` for a > 0 and ``l_y(a) = l_{-y}(-a)``.

    ``kind`` may also be a plain callable ``loss(y, a)``. Margins are drawn
    from [1e-3, 20] so float rounding cannot hide a strict inequality.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    loss = _as_callable(kind)
    rng = np.random.default_rng(seed)
    for t in range(trials):
        a = float(rng.uniform(1e-3, 20.0))
        if not loss(1, -a) > loss(1, a):
            return AxiomReport(False, t + 1, {"property": 1, "a": a,
                                              "l1(-a)": loss(1, -a), "l1(a)": loss(1, a)})
        y = int(rng.choice([-1, 1]))
        s = float(rng.uniform(-20.0, 20.0))
        if loss(y, s) != loss(-y, -s):
            return AxiomReport(False, t + 1, {"property": 2, "y": y, "a": s,
                                              "l_y(a)": loss(y, s), "l_-y(-a)": loss(-y, -s)})
    return AxiomReport(True, trials)


def check_def1(kind: LossKind, trials: int = 10_000, seed: int = 0) -> AxiomReport:
    """Check the adjacent-class ordering of the superimposed ordinal loss.

    For random K, ordered thresholds, bias, score ``h`` and adjacent labels
    ``y_i = y_j - 1`` at the same score: if the predicted label is below
    ``y_j`` the lower class must lose less, and if it is above ``y_i`` the
    lower class must lose more.
    """
    rng = np.random.default_rng(seed)
    for t in range(trials):
        K = int(rng.integers(2, 8))
        theta = np.cumsum(rng.uniform(0.05, 3.0, size=K - 1)) + rng.normal(0, 3)
        b = float(rng.normal(0, 1))
        h = float(rng.uniform(theta[0] + b - 4, theta[-1] + b + 4))
        y_j = int(rng.integers(2, K + 1))
        y_i = y_j - 1
        f = predict_from_scores(h, theta, b)
        li = ordinal_loss(kind, y_i, h, theta, b)
        lj = ordinal_loss(kind, y_j, h, theta, b)
        ok = li < lj if f < y_j else li > lj
        if not ok:
            return AxiomReport(False, t + 1, {"K": K, "theta": theta.tolist(), "b": b, "h": h,
                                              "y_i": y_i, "y_j": y_j, "f": f,
                                              "loss_i": li, "loss_j": lj})
    return AxiomReport(True, trials)
