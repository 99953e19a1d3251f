"""Supervised ordinal regression through the extended binary reduction.

A model scores a sample with ``h(x)`` and predicts
``1 + #{k : h(x) - theta_k - b > 0}``.
"""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .data import SparseVector, from_csr, parse_libsvm, to_csr, write_libsvm
from .errors import ConfigError, DomainError, ParseError, TorLabError
from .kernels import GramCache, KernelKind, cross_gram
from .losses import LossKind, predict_from_scores
from .solvers import ExtendedProblem, solve_primal, solve_smo

log = logging.getLogger(__name__)

MODEL_FORMAT = "tor-lab-model"
MODEL_VERSION = 1
THETA_TOL = 1e-6


@dataclass(frozen=True)
class TrainConfig:
    c1: float = 1.0
    loss: LossKind = LossKind.HINGE
    kernel: KernelKind = field(default_factory=KernelKind)
    solver: str = "auto"
    tol: float = 1e-3
    max_iter: int = 10_000_000
    epochs: int = 50
    step_scale: float = 1.0
    seed: int = 0
    c2_init: float = 1e-5
    c2_mult: float = 2.0
    backend: str | None = None
    cache_bytes: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "loss", LossKind.parse(self.loss))
        if not self.c1 > 0:
            raise ConfigError(f"C1 must be positive, got {self.c1}")
        if self.solver not in ("auto", "smo", "primal"):
            raise ConfigError(f"unknown solver {self.solver!r}")
        if self.solver == "smo" and self.loss is not LossKind.HINGE:
            raise ConfigError("the SMO solver handles only the hinge loss")
        if self.resolved_solver == "primal" and self.kernel.variant != "linear":
            raise ConfigError(f"loss {self.loss.value!r} needs the linear kernel "
                              f"(primal trainer), got {self.kernel.variant!r}")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if not self.c2_init > 0:
            raise ConfigError("C2 initial value must be positive")
        if not self.c2_mult > 1:
            raise ConfigError("C2 multiplier must exceed 1")

    @property
    def resolved_solver(self) -> str:
        if self.solver != "auto":
            return self.solver
        return "smo" if self.loss is LossKind.HINGE else "primal"

    def with_c1(self, c1: float) -> "TrainConfig":
        return replace(self, c1=c1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.value
        d["kernel"] = self.kernel.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["kernel"] = KernelKind.from_dict(d["kernel"])
        return cls(**d)


@dataclass(frozen=True, eq=False)
class OrdinalModel:
    """Trained threshold model in dual (kernel expansion) or primal form."""

    K: int
    kernel: KernelKind
    thresholds: np.ndarray
    b: float
    dim: int
    form: str
    coef: np.ndarray | None = None
    support: sp.csr_matrix | None = None
    support_index: np.ndarray | None = None
    weight: np.ndarray | None = None
    w_sq: float = 0.0
    config: TrainConfig | None = None
    converged: bool = True
    flags: tuple[str, ...] = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def ordered(self) -> bool:
        return bool(np.all(np.diff(self.thresholds) >= -THETA_TOL))

    def scores(self, X) -> np.ndarray:
        """``h(x)`` for every row of ``X``."""
        X = as_csr(X, self.dim)
        if X.shape[1] != self.dim:
            raise DomainError(f"dimension mismatch: {X.shape[1]} != {self.dim}")
        if self.form == "primal":
            return np.asarray(X @ self.weight, dtype=np.float64).ravel()
        if self.coef is None or self.coef.size == 0:
            return np.zeros(X.shape[0])
        return cross_gram(self.kernel, X, self.support) @ self.coef


def as_csr(X, dim: int | None = None) -> sp.csr_matrix:
    if isinstance(X, SparseVector):
        X = [X]
    if sp.issparse(X):
        return sp.csr_matrix(X, dtype=np.float64)
    if isinstance(X, (list, tuple)):
        if X and not isinstance(X[0], SparseVector):
            raise DomainError("expected SparseVector rows")
        if X and dim is not None and X[0].dim != dim:
            raise DomainError(f"dimension mismatch: {X[0].dim} != {dim}")
        return to_csr(list(X), dim if not X else None)
    return sp.csr_matrix(np.atleast_2d(np.asarray(X, dtype=np.float64)))


@dataclass
class Fit:
    """Raw training result over a fixed sample set (labeled and unlabeled)."""

    model: OrdinalModel
    h: np.ndarray  # scores of every training sample
    alphas: np.ndarray | None = None
    primal: tuple | None = None  # (w, theta, b) for warm starts
    iterations: int = 0


def fit_extended(cfg: TrainConfig, X: sp.csr_matrix, labels, costs, K: int,
                 gram: GramCache | None = None, warm=None) -> Fit:
    """Solve the extended binary problem for fixed labels and per-sample costs."""
    labels = np.asarray(labels, dtype=np.int64)
    costs = np.broadcast_to(np.asarray(costs, dtype=np.float64), labels.shape)
    dim = X.shape[1]
    flags = []
    if cfg.resolved_solver == "smo":
        if gram is None:
            gram = GramCache(cfg.kernel, X, cfg.cache_bytes)
        problem = ExtendedProblem.from_labels(gram, labels, costs, K)
        sol = solve_smo(problem, warm_start=warm, tol=cfg.tol, max_iter=cfg.max_iter,
                        backend=cfg.backend)
        # the exact optimum has ordered thresholds; a loose tolerance may not
        tol = cfg.tol
        while np.any(np.diff(sol.theta) < -THETA_TOL) and tol > 1e-10:
            tol /= 10.0
            sol = solve_smo(problem, warm_start=sol.alphas, tol=tol, max_iter=cfg.max_iter,
                            backend=cfg.backend)
        support = np.flatnonzero(sol.coef)
        h = gram.matvec(sol.coef)
        converged = sol.diagnostics.converged
        if not converged:
            flags.append("solver-not-converged")
        model = OrdinalModel(K=K, kernel=cfg.kernel, thresholds=sol.theta, b=sol.b, dim=dim,
                             form="dual", coef=sol.coef[support], support=X[support],
                             support_index=support, w_sq=sol.w_sq, config=cfg,
                             converged=converged,
                             diagnostics={**sol.diagnostics.to_dict(),
                                          "dual_objective": sol.objective,
                                          "primal_objective": sol.primal})
        fit = Fit(model, h, alphas=sol.alphas, iterations=sol.diagnostics.iterations)
    else:
        sol = solve_primal(cfg.loss, X, labels, costs, K, epochs=cfg.epochs,
                           step_scale=cfg.step_scale, seed=cfg.seed, init=warm,
                           kernel=cfg.kernel.variant, backend=cfg.backend)
        w = sol.w
        model = OrdinalModel(K=K, kernel=cfg.kernel, thresholds=sol.theta, b=sol.b, dim=dim,
                             form="primal", weight=w, w_sq=float(np.dot(w, w)), config=cfg,
                             diagnostics={"epochs": sol.epochs, "objective": sol.objective,
                                          "step_scale": sol.step_scale})
        fit = Fit(model, np.asarray(X @ w).ravel(), primal=(w, sol.theta, sol.b),
                  iterations=sol.epochs)
    if not model.ordered:
        flags.append("thresholds-not-ordered")
        log.warning("trained thresholds are not ordered: %s", model.thresholds)
    if flags:
        fit.model = replace(model, flags=model.flags + tuple(flags),
                            converged=model.converged and "thresholds-not-ordered" not in flags)
    return fit


def check_labels(labels, K: int) -> list[str]:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise DomainError("need at least one labeled sample")
    if np.any(labels < 1) or np.any(labels > K):
        raise DomainError(f"labels must lie in 1..{K}")
    missing = sorted(set(range(1, K + 1)) - set(labels.tolist()))
    if missing:
        log.warning("classes %s have no labeled samples", missing)
        return [f"empty-class:{m}" for m in missing]
    return []


def train_supervised(cfg: TrainConfig, X, labels, K: int) -> OrdinalModel:
    """Fit on labeled data only (every augmented point gets box C1)."""
    X = as_csr(X)
    labels = np.asarray(labels, dtype=np.int64)
    if X.shape[0] != labels.size:
        raise DomainError(f"{X.shape[0]} samples but {labels.size} labels")
    warn = check_labels(labels, K)
    fit = fit_extended(cfg, X, labels, cfg.c1, K)
    if warn:
        return replace(fit.model, flags=fit.model.flags + tuple(warn))
    return fit.model


def decision_values(model: OrdinalModel, x) -> tuple[float, np.ndarray]:
    """``(h(x), g)`` with ``g_k = h(x) - theta_k - b``."""
    h = float(model.scores(x)[0])
    return h, h - model.thresholds - model.b


def predict(model: OrdinalModel, x) -> int:
    h, _ = decision_values(model, x)
    return predict_from_scores(h, model.thresholds, model.b)


def predict_many(model: OrdinalModel, X) -> np.ndarray:
    return predict_from_scores(model.scores(X), model.thresholds, model.b)


def save_model(model: OrdinalModel, path) -> None:
    """Write a JSON record; dual models also get a bundled ``.sv`` libsvm file
    holding their support vectors, referenced by row index."""
    path = Path(path)
    record = {
        "format": MODEL_FORMAT, "version": MODEL_VERSION, "K": model.K, "dim": model.dim,
        "kernel": model.kernel.to_dict(), "thresholds": model.thresholds.tolist(),
        "b": model.b, "form": model.form, "w_sq": model.w_sq,
        "converged": model.converged, "flags": list(model.flags),
        "config": model.config.to_dict() if model.config else None,
    }
    if model.form == "primal":
        record["weight"] = model.weight.tolist()
    else:
        sv_path = path.with_name(path.name + ".sv")
        record["support_file"] = sv_path.name
        record["coef"] = model.coef.tolist()
        record["support_rows"] = list(range(model.coef.size))
        with open(sv_path, "w", encoding="utf-8") as fh:
            write_libsvm(fh, from_csr(model.support), [0] * model.coef.size)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=1)


def load_model(path) -> OrdinalModel:
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            record = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a model file ({exc})") from None
    except OSError as exc:
        raise TorLabError(f"{path}: {exc.strerror or exc}") from None
    if record.get("format") != MODEL_FORMAT:
        raise ParseError(f"{path}: not a model file")
    if record.get("version") != MODEL_VERSION:
        raise ParseError(f"{path}: unsupported model version {record.get('version')}")
    kernel = KernelKind.from_dict(record["kernel"])
    common = dict(K=record["K"], kernel=kernel, thresholds=np.asarray(record["thresholds"]),
                  b=float(record["b"]), dim=int(record["dim"]), form=record["form"],
                  w_sq=float(record["w_sq"]), converged=record["converged"],
                  flags=tuple(record["flags"]),
                  config=TrainConfig.from_dict(record["config"]) if record["config"] else None)
    if record["form"] == "primal":
        return OrdinalModel(weight=np.asarray(record["weight"], dtype=np.float64), **common)
    sv_path = path.with_name(record["support_file"])
    try:
        with open(sv_path, encoding="utf-8") as fh:
            sv = parse_libsvm(fh, dim=common["dim"])
    except OSError as exc:
        raise TorLabError(f"{sv_path}: {exc.strerror or exc}") from None
    rows = np.asarray(record["support_rows"], dtype=np.int64)
    support = to_csr(sv.vectors, common["dim"])[rows] if rows.size else sp.csr_matrix((0, common["dim"]))
    return OrdinalModel(coef=np.asarray(record["coef"], dtype=np.float64), support=support,
                        support_index=rows, **common)
