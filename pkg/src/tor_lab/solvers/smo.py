"""SMO for the dual of the extended binary hinge problem.

    max  sum(a) - 1/2 sum_ab a_a a_b y_a y_b (K(x_sa, x_sb) + [k_a == k_b])
    s.t. 0 <= a_a <= box_a,  sum(a_a y_a) = 0

The decision value of augmented point ``(i, k)`` is ``h(x_i) - theta_k - b``
with ``h = sum_j c_j K(x_j, .)``, ``c_j = sum_k a_jk y_jk`` and
``theta_k = -sum_j a_jk y_jk``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..data import AugmentedPoint, extended_labels
from ..errors import DomainError
from ..kernels import GramCache
from ._backend import get_backend

DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITER = 10_000_000


@dataclass
class ExtendedProblem:
    """Augmented points over the samples of ``gram``.

    ``sample`` and ``kidx`` (1-based boundary) locate each point; ``y`` holds
    its binary label and ``box`` its upper bound.
    """

    gram: GramCache
    sample: np.ndarray
    kidx: np.ndarray
    y: np.ndarray
    box: np.ndarray
    K: int

    def __post_init__(self):
        self.sample = np.ascontiguousarray(self.sample, dtype=np.int64)
        self.kidx = np.ascontiguousarray(self.kidx, dtype=np.int64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64)
        self.box = np.ascontiguousarray(self.box, dtype=np.float64)
        m = self.sample.size
        if not (self.kidx.size == self.y.size == self.box.size == m):
            raise DomainError("augmented point arrays differ in length")
        if np.any(self.box < 0) or not np.all(np.isfinite(self.box)):
            raise DomainError("box bounds must be finite and non-negative")
        if not np.all(np.abs(self.y) == 1):
            raise DomainError("every augmented point needs a binary label")
        if m and (self.kidx.min() < 1 or self.kidx.max() > self.K - 1):
            raise DomainError("boundary index out of range")
        if m and (self.sample.min() < 0 or self.sample.max() >= self.gram.N):
            raise DomainError("sample index out of range")

    @classmethod
    def from_labels(cls, gram: GramCache, labels, costs, K: int) -> "ExtendedProblem":
        """Every sample of ``gram`` duplicated K-1 times, sample-major."""
        labels = np.asarray(labels, dtype=np.int64)
        costs = np.broadcast_to(np.asarray(costs, dtype=np.float64), labels.shape)
        if labels.size != gram.N:
            raise DomainError(f"{labels.size} labels for {gram.N} samples")
        if np.any(labels < 1) or np.any(labels > K):
            raise DomainError(f"labels must lie in 1..{K}")
        N = labels.size
        return cls(gram,
                   sample=np.repeat(np.arange(N), K - 1),
                   kidx=np.tile(np.arange(1, K), N),
                   y=extended_labels(labels, K).ravel().astype(np.float64),
                   box=np.repeat(costs, K - 1),
                   K=K)

    @classmethod
    def from_points(cls, gram: GramCache, points: Sequence[AugmentedPoint], box, K: int):
        return cls(gram,
                   sample=[p.base for p in points],
                   kidx=[p.k for p in points],
                   y=[p.binary_label for p in points],
                   box=box, K=K)

    @property
    def size(self) -> int:
        return int(self.sample.size)

    def sample_coef(self, alpha: np.ndarray) -> np.ndarray:
        """``c_j = sum_k a_jk y_jk`` per sample."""
        return np.bincount(self.sample, weights=alpha * self.y, minlength=self.gram.N)

    def thresholds(self, alpha: np.ndarray) -> np.ndarray:
        return -np.bincount(self.kidx - 1, weights=alpha * self.y, minlength=self.K - 1)

    def scores(self, alpha: np.ndarray) -> np.ndarray:
        """``h(x_i) - theta_k`` for every augmented point (bias excluded)."""
        h = self.gram.matvec(self.sample_coef(alpha))
        return h[self.sample] - self.thresholds(alpha)[self.kidx - 1]

    def gradient(self, alpha: np.ndarray) -> np.ndarray:
        """``Q a - 1``."""
        return self.y * self.scores(alpha) - 1.0

    def dual_objective(self, alpha: np.ndarray) -> float:
        grad = self.gradient(alpha)
        return float(alpha.sum() - 0.5 * np.dot(alpha, grad + 1.0))

    def primal_objective(self, alpha: np.ndarray, b: float) -> float:
        """``1/2|w|^2 + 1/2|theta|^2 + sum box * hinge`` at the dual's primal point."""
        c = self.sample_coef(alpha)
        theta = self.thresholds(alpha)
        slack = np.maximum(0.0, 1.0 - self.y * (self.scores(alpha) - b))
        return float(0.5 * self.gram.quad(c) + 0.5 * np.dot(theta, theta)
                     + np.dot(self.box, slack))


@dataclass
class SolveDiagnostics:
    kkt_violation: float
    iterations: int
    slacks: np.ndarray
    converged: bool
    bias_gap: float = 0.0

    def to_dict(self) -> dict:
        return {"kkt_violation": self.kkt_violation, "iterations": self.iterations,
                "converged": self.converged, "bias_gap": self.bias_gap,
                "total_slack": float(np.sum(self.slacks))}


@dataclass
class DualSolution:
    alphas: np.ndarray
    b: float
    objective: float
    diagnostics: SolveDiagnostics
    coef: np.ndarray = field(repr=False, default=None)
    theta: np.ndarray = None
    w_sq: float = 0.0
    primal: float = 0.0


def _equality_tol(alpha: np.ndarray) -> float:
    return 1e-8 * max(1.0, float(np.sum(np.abs(alpha))))


def _bias(problem: ExtendedProblem, alpha: np.ndarray, grad: np.ndarray) -> tuple[float, float]:
    """Offset from free points, else the midpoint of the feasible KKT interval."""
    y, box = problem.y, problem.box
    active = box > 0
    yg = y * grad
    free = active & (alpha > 0) & (alpha < box)
    if free.any():
        return float(np.mean(yg[free])), 0.0
    at_lo = active & (alpha <= 0)
    at_hi = active & (alpha >= box)
    upper = (at_lo & (y > 0)) | (at_hi & (y < 0))
    lower = (at_lo & (y < 0)) | (at_hi & (y > 0))
    ub = float(yg[upper].min()) if upper.any() else None
    lb = float(yg[lower].max()) if lower.any() else None
    if ub is None and lb is None:
        return 0.0, 0.0
    if ub is None:
        return lb, 0.0
    if lb is None:
        return ub, 0.0
    return 0.5 * (ub + lb), max(0.0, lb - ub)


def _violations(problem: ExtendedProblem, alpha: np.ndarray, margin: np.ndarray) -> np.ndarray:
    box = problem.box
    active = box > 0
    eps = 1e-12 * np.maximum(box, 1.0)
    at_lo = alpha <= eps
    at_hi = alpha >= box - eps
    viol = np.abs(margin - 1.0)
    viol = np.where(at_lo, np.maximum(0.0, 1.0 - margin), viol)
    viol = np.where(at_hi & ~at_lo, np.maximum(0.0, margin - 1.0), viol)
    return np.where(active, viol, 0.0)


def kkt_report(sol: DualSolution, problem: ExtendedProblem) -> float:
    """Largest per-point KKT violation of ``sol`` given its bias."""
    if problem.size == 0:
        return 0.0
    margin = problem.y * (problem.scores(sol.alphas) - sol.b)
    return float(_violations(problem, sol.alphas, margin).max())


def solve_smo(problem: ExtendedProblem, warm_start: np.ndarray | None = None,
              tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
              backend: str | None = None) -> DualSolution:
    """Maximise the dual to KKT tolerance ``tol`` by maximal-violating-pair SMO.

    Hitting ``max_iter`` pair updates returns the current feasible point with
    ``converged=False``.
    """
    if tol <= 0:
        raise DomainError("tol must be positive")
    impl = get_backend(backend)
    m = problem.size
    if warm_start is None:
        alpha = np.zeros(m)
    else:
        alpha = np.array(warm_start, dtype=np.float64)
        if alpha.shape != (m,):
            raise DomainError(f"warm start has shape {alpha.shape}, expected ({m},)")
        slack = 1e-12 * np.maximum(problem.box, 1.0)
        if np.any(alpha < -slack) or np.any(alpha > problem.box + slack):
            raise DomainError("warm start violates the box constraints")
        if abs(float(np.dot(alpha, problem.y))) > _equality_tol(alpha):
            raise DomainError("warm start violates the equality constraint")
        alpha = np.clip(alpha, 0.0, problem.box)

    gram = problem.gram
    iterations = 0
    converged = False
    grad = problem.gradient(alpha)
    for _ in range(8):
        left = max_iter - iterations
        it, converged, _gap = impl.smo_loop(gram.row, gram.diag, problem.sample, problem.kidx,
                                            problem.y, problem.box, alpha, grad, tol, left)
        iterations += int(it)
        grad = problem.gradient(alpha)  # drop accumulated rounding
        if not converged or iterations >= max_iter:
            break
        gap = _pair_gap(problem, alpha, grad)
        if gap < tol:
            break
        converged = False

    b, bias_gap = _bias(problem, alpha, grad)
    coef = problem.sample_coef(alpha)
    theta = problem.thresholds(alpha)
    quad = float(np.dot(alpha, grad + 1.0))
    objective = float(alpha.sum() - 0.5 * quad)
    # y * score = grad + 1
    margin = (grad + 1.0) - problem.y * b
    slacks = np.maximum(0.0, 1.0 - margin)
    viol = _violations(problem, alpha, margin)
    kkt = float(viol.max()) if m else 0.0
    diag = SolveDiagnostics(kkt_violation=kkt, iterations=iterations, slacks=slacks,
                            converged=bool(converged), bias_gap=bias_gap)
    w_sq = gram.quad(coef)
    primal = float(0.5 * w_sq + 0.5 * np.dot(theta, theta) + np.dot(problem.box, slacks))
    return DualSolution(alphas=alpha, b=b, objective=objective, diagnostics=diag,
                        coef=coef, theta=theta, w_sq=w_sq, primal=primal)


def _pair_gap(problem: ExtendedProblem, alpha: np.ndarray, grad: np.ndarray) -> float:
    y, box = problem.y, problem.box
    v = -y * grad
    pos = y > 0
    up = np.where(pos, alpha < box, alpha > 0)
    low = np.where(pos, alpha > 0, alpha < box)
    if not up.any() or not low.any():
        return -np.inf
    return float(v[up].max() - v[low].min())
