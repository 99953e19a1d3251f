"""Stochastic subgradient trainer for the extended binary problem, linear
kernel, any loss of the binary family.

Minimises ``1/2|w|^2 + 1/2|theta|^2 + sum_a cost_a * loss(y_a, w.x_a - theta_k - b)``
with step ``step_scale / (lam * t)``, ``lam = 1 / (max cost * #instances)``.
An epoch whose end point raises the full objective is rolled back and the
step scale halved, so the per-epoch objective trace never increases.

SGD alone converges slowly in the unregularised bias, so the result is then
polished with full-batch L-BFGS: directly for the smooth losses and through
a Huber-smoothed continuation for hinge and laplacian. The polished point is
kept only if it lowers the exact objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize

from ..data import extended_labels
from ..errors import ConfigError, DomainError
from ..losses import LossKind, binary_loss_array, binary_loss_grad
from ._backend import get_backend

SMOOTHING = (1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
LOSS_CODES = {LossKind.HINGE: 0, LossKind.SQUARE_HINGE: 1, LossKind.LOGISTIC: 2,
              LossKind.SQUARE: 3, LossKind.LAPLACIAN: 4}


@dataclass
class PrimalSolution:
    weight: np.ndarray  # (w, -theta)
    b: float
    objective: float
    epochs: int
    n_thresholds: int
    trace: list[float] = field(default_factory=list)
    step_scale: float = 1.0

    @property
    def w(self) -> np.ndarray:
        return self.weight[:self.weight.size - self.n_thresholds]

    @property
    def theta(self) -> np.ndarray:
        return -self.weight[self.weight.size - self.n_thresholds:]


def primal_objective_linear(loss: LossKind, X: sp.csr_matrix, labels, costs, K: int,
                            w: np.ndarray, theta: np.ndarray, b: float) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    ys = extended_labels(labels, K).astype(np.float64)
    costs = np.broadcast_to(np.asarray(costs, dtype=np.float64), labels.shape)
    h = X @ w
    g = h[:, None] - theta[None, :] - b
    per_sample = binary_loss_array(loss, ys, g).sum(axis=1)
    return float(0.5 * np.dot(w, w) + 0.5 * np.dot(theta, theta)
                 + np.dot(costs, per_sample))


def _smoothed(loss: LossKind, y: np.ndarray, a: np.ndarray, mu: float | None):
    """Loss value and derivative in ``a``; ``mu`` Huber-smooths the kinks."""
    if mu is None or loss not in (LossKind.HINGE, LossKind.LAPLACIAN):
        return binary_loss_array(loss, y, a), binary_loss_grad(loss, y, a)
    if loss is LossKind.HINGE:
        z = 1.0 - y * a
        val = np.where(z <= 0, 0.0, np.where(z < mu, z * z / (2 * mu), z - mu / 2))
        return val, -y * np.clip(z / mu, 0.0, 1.0)
    r = a - y
    val = np.where(np.abs(r) <= mu, r * r / (2 * mu), np.abs(r) - mu / 2)
    return val, np.clip(r / mu, -1.0, 1.0)


def _polish(loss, X, ys, costs, w, theta, b, max_iter=500):
    p = w.size
    m = theta.size
    live = costs > 0
    Xl, Yl, cl = X[live], ys[live], costs[live]

    def unpack(z):
        return z[:p], z[p:p + m], z[p + m]

    def run(z0, mu):
        def fg(z):
            w_, th, b_ = unpack(z)
            G = np.asarray(Xl @ w_).ravel()[:, None] - th[None, :] - b_
            val, dG = _smoothed(loss, Yl, G, mu)
            dG = dG * cl[:, None]
            f = 0.5 * np.dot(w_, w_) + 0.5 * np.dot(th, th) + float(np.dot(cl, val.sum(axis=1)))
            gw = w_ + np.asarray(Xl.T @ dG.sum(axis=1)).ravel()
            return f, np.concatenate([gw, th - dG.sum(axis=0), [-dG.sum()]])
        with np.errstate(over="ignore", invalid="ignore"):
            res = minimize(fg, z0, jac=True, method="L-BFGS-B",
                           options={"maxiter": max_iter, "gtol": 1e-10, "ftol": 1e-15})
        return res.x

    z = np.concatenate([w, theta, [b]])
    if loss in (LossKind.HINGE, LossKind.LAPLACIAN):
        for mu in SMOOTHING:
            z = run(z, mu)
    else:
        z = run(z, None)
    return unpack(z)


def solve_primal(loss: LossKind, X, labels, costs, K: int, epochs: int = 50,
                 step_scale: float = 1.0, seed: int = 0, init=None,
                 kernel: str = "linear", backend: str | None = None,
                 polish: bool = True) -> PrimalSolution:
    """Train ``(w, theta, b)`` by SGD over the augmented instances.

    Args:
        loss: binary loss family member.
        X: CSR matrix, one row per sample.
        labels: ordinal label per sample in ``1..K``.
        costs: per-sample loss weight (C1 for labeled, C2 for unlabeled rows).
        init: optional ``(w, theta, b)`` warm start.
    """
    if kernel != "linear":
        raise ConfigError(f"the primal trainer supports only the linear kernel, not {kernel!r}")
    loss = LossKind.parse(loss)
    impl = get_backend(backend)
    X = sp.csr_matrix(X, dtype=np.float64)
    X.sort_indices()
    n, p = X.shape
    labels = np.asarray(labels, dtype=np.int64)
    costs = np.broadcast_to(np.asarray(costs, dtype=np.float64), (n,)).copy()
    if labels.size != n:
        raise DomainError(f"{labels.size} labels for {n} samples")
    if np.any(costs < 0):
        raise DomainError("costs must be non-negative")
    if epochs < 0:
        raise DomainError("epochs must be non-negative")

    if init is None:
        w = np.zeros(p)
        theta = np.zeros(K - 1)
        b = 0.0
    else:
        w = np.array(init[0], dtype=np.float64)
        theta = np.array(init[1], dtype=np.float64)
        b = float(init[2])

    def objective(w_, th_, b_):
        return primal_objective_linear(loss, X, labels, costs, K, w_, th_, b_)

    sample = np.repeat(np.arange(n), K - 1)
    kidx = np.tile(np.arange(K - 1), n)
    y = extended_labels(labels, K).ravel().astype(np.float64) if n else np.zeros(0)
    cost_aug = np.repeat(costs, K - 1)
    live = np.flatnonzero(cost_aug > 0)

    def done(obj, ran, trace, scale):
        return PrimalSolution(np.concatenate([w, -theta]), b, obj, ran, K - 1, trace, scale)

    if live.size == 0:
        w[:] = 0.0
        theta[:] = 0.0
        b = 0.0
        return done(0.0, 0, [0.0], step_scale)

    c_max = float(cost_aug[live].max())
    lam = 1.0 / (c_max * live.size)
    weight = np.ascontiguousarray(cost_aug / c_max)
    indptr = X.indptr.astype(np.int32)
    indices = X.indices.astype(np.int32)
    data = X.data
    rng = np.random.default_rng(seed)
    t = 0
    best = objective(w, theta, b)
    trace = [best]
    for _ in range(epochs):
        order = np.ascontiguousarray(rng.permutation(live), dtype=np.int64)
        v = w.copy()
        th = theta.copy()
        scale, b_new, t = impl.sgd_epoch(indptr, indices, data, order, sample, kidx, y, weight,
                                         v, 1.0, th, b, t, lam, step_scale, LOSS_CODES[loss])
        w_new = v * scale
        if np.all(np.isfinite(w_new)) and np.all(np.isfinite(th)) and np.isfinite(b_new):
            with np.errstate(over="ignore", invalid="ignore"):
                obj = objective(w_new, th, b_new)
            if not np.isfinite(obj):
                obj = np.inf
        else:
            obj = np.inf
        if obj <= best:
            w, theta, b, best = w_new, th, float(b_new), obj
        else:
            step_scale *= 0.5
        trace.append(best)
    if polish:
        ys = extended_labels(labels, K).astype(np.float64)
        w_p, th_p, b_p = _polish(loss, X, ys, costs, w, theta, b)
        if np.all(np.isfinite(w_p)) and np.all(np.isfinite(th_p)) and np.isfinite(b_p):
            with np.errstate(over="ignore", invalid="ignore"):
                obj = objective(w_p, th_p, float(b_p))
            if obj < best:
                w, theta, b, best = w_p, th_p, float(b_p), obj
                trace.append(best)
    return done(best, epochs, trace, step_scale)
