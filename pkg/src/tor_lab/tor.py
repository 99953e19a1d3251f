"""Transductive ordinal regression by pairwise label swapping.

Unlabeled samples get pseudo-labels from a supervised fit and the labeled
class ratios. Training then alternates between solving for the model with
labels fixed and swapping one misclassified pair per adjacent class
boundary, while the unlabeled cost C2 grows geometrically towards C1.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from typing import IO, Iterator

import numpy as np
import scipy.sparse as sp

from .data import ClassRatios
from .errors import DomainError
from .kernels import GramCache
from .losses import LossKind, boundary_swap_delta, ordinal_loss_array, predict_from_scores
from .ordreg import Fit, OrdinalModel, TrainConfig, as_csr, check_labels, fit_extended

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("stage", "c2", "iteration", "objective", "swap_i", "swap_j", "k", "gain")


@dataclass(frozen=True)
class C2Schedule:
    initial: float = 1e-5
    multiplier: float = 2.0
    ceiling: float = 1.0

    def __post_init__(self):
        if not self.initial > 0:
            raise DomainError("C2 initial value must be positive")
        if not self.multiplier > 1:
            raise DomainError("C2 multiplier must exceed 1")

    @classmethod
    def from_config(cls, cfg: TrainConfig) -> "C2Schedule":
        return cls(cfg.c2_init, cfg.c2_mult, cfg.c1)

    def __iter__(self) -> Iterator[float]:
        c2 = self.initial
        while c2 < self.ceiling:
            yield c2
            c2 *= self.multiplier


@dataclass
class InitResult:
    labels: np.ndarray
    model: OrdinalModel
    scores: np.ndarray
    allocation: tuple[int, ...]
    warnings: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class SwapEvent:
    """Sample ``i`` moves from class k to k+1 and ``j`` from k+1 to k."""

    i: int
    j: int
    k: int
    gain: float
    snapshot: int = -1


@dataclass(frozen=True)
class ModelSnapshot:
    """Enough of a fitted model to recompute every training score."""

    thresholds: np.ndarray
    b: float
    coef: np.ndarray | None = None
    weight: np.ndarray | None = None
    labels: np.ndarray | None = None  # unlabeled pseudo-labels at solve time


@dataclass
class StageRecord:
    c2: float
    objectives: list[float] = field(default_factory=list)
    swaps: list[list[SwapEvent]] = field(default_factory=list)
    snapshots: list[int] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)

    @property
    def n_swaps(self) -> int:
        return sum(len(s) for s in self.swaps)


@dataclass
class TransductionTrace:
    init_labels: np.ndarray
    init_allocation: tuple[int, ...]
    stages: list[StageRecord] = field(default_factory=list)
    snapshots: list[ModelSnapshot] = field(default_factory=list)
    solves: int = 0
    iterations: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def events(self) -> list[SwapEvent]:
        return [e for st in self.stages for it in st.swaps for e in it]

    @property
    def flags(self) -> list[str]:
        return [f for st in self.stages for f in st.flags]

    def rows(self) -> list[tuple]:
        out = []
        for s, st in enumerate(self.stages):
            for it, obj in enumerate(st.objectives):
                evs = st.swaps[it] if it < len(st.swaps) else []
                if not evs:
                    out.append((s, st.c2, it, obj, "", "", "", ""))
                for e in evs:
                    out.append((s, st.c2, it, obj, e.i, e.j, e.k, e.gain))
        return out

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for row in self.rows():
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def allocate(counts, u: int) -> tuple[int, ...]:
    """Class sizes for ``u`` pseudo-labels: ``floor(ratio_k * u)`` for k < K,
    the remainder to class K."""
    counts = np.asarray(counts, dtype=np.int64)
    n = int(counts.sum())
    sizes = [int(c) * u // n for c in counts[:-1]]
    sizes.append(u - sum(sizes))
    return tuple(sizes)


def assign_by_rank(scores: np.ndarray, sizes) -> np.ndarray:
    order = np.argsort(scores, kind="stable")
    labels = np.empty(scores.size, dtype=np.int64)
    labels[order] = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    return labels


def init_pseudo_labels(cfg: TrainConfig, X_lab, labels, X_unl, K: int,
                       model: OrdinalModel | None = None) -> InitResult:
    """Rank the unlabeled samples by a supervised score and hand out labels in
    the labeled class proportions. ``model`` reuses an existing supervised fit."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise DomainError("pseudo-label initialisation needs labeled samples")
    X_lab = as_csr(X_lab)
    X_unl = as_csr(X_unl, X_lab.shape[1])
    u = X_unl.shape[0]
    if u < 1:
        raise DomainError("pseudo-label initialisation needs unlabeled samples")
    warnings = check_labels(labels, K)
    ratios = ClassRatios.from_labels(labels, K)
    if model is None:
        model = fit_extended(cfg, X_lab, labels, cfg.c1, K).model
    scores = model.scores(X_unl)
    sizes = allocate(ratios.counts, u)
    if max(ratios.ratios) == 1.0:
        warnings.append("degenerate-allocation")
        log.warning("all labeled samples share one class; allocation %s", sizes)
    return InitResult(assign_by_rank(scores, sizes), model, scores, sizes, warnings)


def find_swap_scores(k: int, pseudo: np.ndarray, h: np.ndarray, theta, b: float,
                     loss: LossKind) -> SwapEvent | None:
    """Best swap across boundary ``k`` given unlabeled scores ``h``.

    Candidates are ``i`` labeled k but predicted above k, and ``j`` labeled
    k+1 but predicted below k+1. The loss change separates into a term per
    sample, so the best pair combines the best ``i`` with the best ``j``
    (lowest index on ties). Pairs that would not lower the loss are refused.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if not 1 <= k <= theta.size:
        raise DomainError(f"boundary {k} out of range for K={theta.size + 1}")
    f = predict_from_scores(h, theta, b)
    I = np.flatnonzero((pseudo == k) & (f > k))
    J = np.flatnonzero((pseudo == k + 1) & (f < k + 1))
    if I.size == 0 or J.size == 0:
        return None
    t = theta[k - 1] + b
    up, _ = boundary_swap_delta(loss, h[I] - t, 0.0)
    _, down = boundary_swap_delta(loss, 0.0, h[J] - t)
    a = int(np.argmin(up))
    c = int(np.argmin(down))
    gain = float(up[a] + down[c])
    if not gain < 0:
        log.debug("boundary %d: best pair has gain %r, not swapping", k, gain)
        return None
    return SwapEvent(int(I[a]), int(J[c]), k, gain)


def find_swap(k: int, pseudo, model: OrdinalModel, unlabeled, loss: LossKind) -> SwapEvent | None:
    pseudo = np.asarray(pseudo, dtype=np.int64)
    return find_swap_scores(k, pseudo, model.scores(unlabeled), model.thresholds, model.b,
                            LossKind.parse(loss))


def objective_from_scores(h: np.ndarray, w_sq: float, theta, b: float, labels,
                          costs, loss: LossKind) -> float:
    """``1/2|w|^2 + 1/2|theta|^2 + sum_i cost_i * ordinal_loss_i``."""
    theta = np.asarray(theta, dtype=np.float64)
    losses = ordinal_loss_array(loss, labels, h, theta, b)
    return float(0.5 * w_sq + 0.5 * np.dot(theta, theta)
                 + np.dot(np.asarray(costs, dtype=np.float64), losses))


def objective(model: OrdinalModel, X_lab, labels, X_unl, pseudo, c1: float, c2: float,
              loss: LossKind) -> float:
    X_lab = as_csr(X_lab, model.dim)
    parts_h = [model.scores(X_lab)]
    parts_y = [np.asarray(labels, dtype=np.int64)]
    costs = [np.full(X_lab.shape[0], float(c1))]
    if pseudo is not None and len(pseudo):
        X_unl = as_csr(X_unl, model.dim)
        parts_h.append(model.scores(X_unl))
        parts_y.append(np.asarray(pseudo, dtype=np.int64))
        costs.append(np.full(X_unl.shape[0], float(c2)))
    return objective_from_scores(np.concatenate(parts_h), model.w_sq, model.thresholds,
                                 model.b, np.concatenate(parts_y), np.concatenate(costs),
                                 LossKind.parse(loss))


def _fit_objective(fit: Fit, labels_all, costs, loss) -> float:
    m = fit.model
    return objective_from_scores(fit.h, m.w_sq, m.thresholds, m.b, labels_all, costs, loss)


def _snapshot(fit: Fit, pseudo: np.ndarray) -> ModelSnapshot:
    m = fit.model
    if m.form == "primal":
        return ModelSnapshot(m.thresholds.copy(), m.b, weight=m.weight.copy(),
                             labels=pseudo.copy())
    coef = np.zeros(fit.h.size)
    coef[m.support_index] = m.coef
    return ModelSnapshot(m.thresholds.copy(), m.b, coef=coef, labels=pseudo.copy())


def train_transductive(cfg: TrainConfig, X_lab, labels, X_unl, K: int,
                       init: InitResult | None = None, keep_snapshots: bool = True):
    """Run the annealed swap loop. Returns ``(model, pseudo_labels, trace)``.

    ``model`` is the fit from the last solve (the supervised model if no C2
    stage runs) and ``pseudo_labels`` the final unlabeled labels.
    """
    labels = np.asarray(labels, dtype=np.int64)
    X_lab = as_csr(X_lab)
    X_unl = as_csr(X_unl, X_lab.shape[1])
    if init is None:
        init = init_pseudo_labels(cfg, X_lab, labels, X_unl, K)
    n, u = X_lab.shape[0], X_unl.shape[0]
    pseudo = init.labels.copy()
    trace = TransductionTrace(init_labels=init.labels.copy(), init_allocation=init.allocation,
                              warnings=list(init.warnings))
    model = init.model
    schedule = C2Schedule.from_config(cfg)
    loss = cfg.loss
    X_all = sp.vstack([X_lab, X_unl], format="csr")
    smo = cfg.resolved_solver == "smo"
    gram = GramCache(cfg.kernel, X_all, cfg.cache_bytes) if smo else None
    warm = None
    swap_cap = u * u
    m1 = K - 1

    for stage_no, c2 in enumerate(schedule):
        stage = StageRecord(c2)
        trace.stages.append(stage)
        costs = np.concatenate([np.full(n, cfg.c1), np.full(u, c2)])
        target = None  # objective of the previous model under the current labels
        prev_fit = None
        while True:
            labels_all = np.concatenate([labels, pseudo])
            fit = fit_extended(cfg, X_all, labels_all, costs, K, gram=gram, warm=warm)
            trace.solves += 1
            trace.iterations += fit.iterations
            obj = _fit_objective(fit, labels_all, costs, loss)
            if target is not None and obj > target:
                fit, obj = _recover(cfg, fit, obj, target, prev_fit, X_all, labels_all, costs,
                                    K, gram, stage, smo)
            if "solver-not-converged" in fit.model.flags:
                stage.flags.append("solver-not-converged")
                log.warning("stage %d (C2=%g): inner solver did not converge", stage_no, c2)
                model = fit.model
                break
            model = fit.model
            stage.objectives.append(obj)
            if keep_snapshots:
                trace.snapshots.append(_snapshot(fit, pseudo))
                stage.snapshots.append(len(trace.snapshots) - 1)
            warm = fit.alphas.copy() if smo else fit.primal
            h_u = fit.h[n:]
            events = []
            for k in range(1, K):
                ev = find_swap_scores(k, pseudo, h_u, model.thresholds, model.b, loss)
                if ev is None:
                    continue
                ev = replace(ev, snapshot=len(trace.snapshots) - 1 if keep_snapshots else -1)
                pseudo[ev.i], pseudo[ev.j] = k + 1, k
                if smo:
                    a, c = (n + ev.i) * m1 + k - 1, (n + ev.j) * m1 + k - 1
                    warm[a], warm[c] = warm[c], warm[a]
                events.append(ev)
            stage.swaps.append(events)
            if not events:
                break
            if stage.n_swaps >= swap_cap:
                stage.flags.append("swap-cap")
                log.warning("stage %d hit the swap cap of %d", stage_no, swap_cap)
                break
            prev_fit = fit
            target = _fit_objective(fit, np.concatenate([labels, pseudo]), costs, loss)
    return model, pseudo, trace


def _recover(cfg, fit, obj, target, prev_fit, X_all, labels_all, costs, K, gram, stage, smo):
    """Re-solve more tightly when a warm-started solve lands above the
    objective already reached by the previous model under the new labels."""
    if smo:
        tol = cfg.tol
        while obj > target and tol > 1e-10:
            tol /= 10.0
            tighter = replace(cfg, tol=tol)
            fit = fit_extended(tighter, X_all, labels_all, costs, K, gram=gram, warm=fit.alphas)
            obj = _fit_objective(fit, labels_all, costs, cfg.loss)
        if obj > target:
            stage.flags.append("objective-increase")
        return fit, obj
    # primal: keep the previous model, which already reaches the target
    kept = Fit(prev_fit.model, prev_fit.h, primal=prev_fit.primal, iterations=0)
    return kept, _fit_objective(kept, labels_all, costs, cfg.loss)


def snapshot_scorer(cfg: TrainConfig, X_lab, X_unl):
    """Scores-of-all-samples function for :func:`validate_events`."""
    X_lab = as_csr(X_lab)
    X_all = sp.vstack([X_lab, as_csr(X_unl, X_lab.shape[1])], format="csr")
    gram = GramCache(cfg.kernel, X_all, cfg.cache_bytes) if cfg.resolved_solver == "smo" else None

    def scores(snap: ModelSnapshot) -> np.ndarray:
        if snap.weight is not None:
            return np.asarray(X_all @ snap.weight).ravel()
        return gram.matvec(snap.coef)
    return scores


def validate_events(trace: TransductionTrace, X_all_scores_fn, n: int, K: int) -> list[str]:
    """Re-check every swap against its stored pre-swap model.

    ``X_all_scores_fn(snapshot)`` must return the scores of all training
    samples (labeled first) for a snapshot. Returns a list of problems.
    """
    problems = []
    for st in trace.stages:
        for it, events in enumerate(st.swaps):
            if not events:
                continue
            snap_id = events[0].snapshot
            snap = trace.snapshots[snap_id]
            h = X_all_scores_fn(snap)[n:]
            f = predict_from_scores(h, snap.thresholds, snap.b)
            pseudo = snap.labels.copy()
            for e in events:
                if pseudo[e.i] != e.k or pseudo[e.j] != e.k + 1:
                    problems.append(f"event {e}: labels {pseudo[e.i]}, {pseudo[e.j]}")
                if not (f[e.i] > e.k and f[e.j] < e.k + 1):
                    problems.append(f"event {e}: predictions {f[e.i]}, {f[e.j]}")
                if not e.gain < 0:
                    problems.append(f"event {e}: non-negative gain")
                pseudo[e.i], pseudo[e.j] = e.k + 1, e.k
    return problems
