"""Experiment protocol: split, select C1, train each method, score on the
unlabeled part."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from ..data import SynthConfig, gen_synthetic, parse_libsvm, to_csr
from ..errors import ConfigError, ParseError, TorLabError
from ..ordreg import TrainConfig, predict_many
from ..tor import init_pseudo_labels, train_transductive
from .cv import DEFAULT_GRID, cross_validate_c1
from .metrics import mean_absolute, mean_zero_one

log = logging.getLogger(__name__)

METHODS = ("supervised", "supervised-ratio", "transductive")
REPORT_COLUMNS = ("kind", "dataset", "seed", "n", "method", "c1", "zero_one", "mae",
                  "wall_time", "iterations", "flags", "error")


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run.

    ``source`` is a :class:`SynthConfig` (regenerated with each run seed) or
    the path of a fully labeled libsvm file. For each seed the samples are
    shuffled; the first ``max(sizes)`` form the labeled pool and the rest the
    unlabeled set, so every size of a seed shares one unlabeled set.
    ``fixed_c1`` skips cross-validation.
    """

    source: SynthConfig | str | Path
    K: int
    sizes: tuple[int, ...] = (100, 150, 200, 250, 300, 350, 400)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    folds: int = 5
    grid: tuple[float, ...] = DEFAULT_GRID
    methods: tuple[str, ...] = ("supervised", "transductive")
    config: TrainConfig = field(default_factory=TrainConfig)
    dataset_id: str | None = None
    fixed_c1: float | None = None

    def __post_init__(self):
        if not self.grid and self.fixed_c1 is None:
            raise ConfigError("empty C1 grid")
        if not self.sizes or min(self.sizes) < 1:
            raise ConfigError("labeled sizes must be positive")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}")
        if self.K < 2:
            raise ConfigError("K must be at least 2")
        if isinstance(self.source, SynthConfig):
            if self.source.K != self.K:
                raise ConfigError(f"plan K={self.K} but generator K={self.source.K}")
            if max(self.sizes) >= self.source.n_samples:
                raise ConfigError("labeled sizes leave no unlabeled samples")

    @property
    def name(self) -> str:
        if self.dataset_id:
            return self.dataset_id
        if isinstance(self.source, SynthConfig):
            return f"synth-K{self.source.K}-p{self.source.p:g}"
        return Path(self.source).stem

    def to_dict(self) -> dict:
        src = (dict(kind="synthetic", K=self.source.K, p=self.source.p,
                    n_samples=self.source.n_samples)
               if isinstance(self.source, SynthConfig) else dict(kind="file", path=str(self.source)))
        return dict(source=src, K=self.K, sizes=list(self.sizes), seeds=list(self.seeds),
                    folds=self.folds, grid=list(self.grid), methods=list(self.methods),
                    config=self.config.to_dict(), dataset=self.name, fixed_c1=self.fixed_c1)


@dataclass
class ReportRow:
    dataset: str
    seed: int | None
    n: int
    method: str
    c1: float
    zero_one: float
    mae: float
    wall_time: float
    iterations: int
    flags: str = ""
    error: str = ""
    kind: str = "run"

    def values(self) -> tuple:
        return (self.kind, self.dataset, self.seed, self.n, self.method, self.c1,
                self.zero_one, self.mae, self.wall_time, self.iterations, self.flags,
                self.error)

    def key(self) -> tuple:
        """Row identity without the wall time."""
        v = self.values()
        return v[:8] + v[9:]


@dataclass
class EvalReport:
    rows: list[ReportRow] = field(default_factory=list)
    plans: list[dict] = field(default_factory=list)

    def aggregate(self) -> list[ReportRow]:
        """Mean and (population) standard deviation over seeds per
        ``(dataset, n, method)``, skipping failed rows."""
        groups: dict[tuple, list[ReportRow]] = {}
        for r in self.rows:
            if r.kind == "run" and not r.error:
                groups.setdefault((r.dataset, r.n, r.method), []).append(r)
        out = []
        for (ds, n, method), rs in groups.items():
            for kind, fn in (("mean", np.mean), ("std", np.std)):
                out.append(ReportRow(ds, None, n, method,
                                     c1=float(fn([r.c1 for r in rs])),
                                     zero_one=float(fn([r.zero_one for r in rs])),
                                     mae=float(fn([r.mae for r in rs])),
                                     wall_time=float(fn([r.wall_time for r in rs])),
                                     iterations=int(round(float(fn([r.iterations for r in rs])))),
                                     kind=kind))
        return out

    def mean(self, metric: str, method: str, dataset: str | None = None,
             n: int | None = None) -> float:
        vals = [getattr(r, metric) for r in self.rows
                if r.kind == "run" and not r.error and r.method == method
                and (dataset is None or r.dataset == dataset) and (n is None or r.n == n)]
        return float(np.mean(vals)) if vals else float("nan")

    def extend(self, other: "EvalReport") -> None:
        self.rows.extend(other.rows)
        self.plans.extend(other.plans)


def load_source(plan: ExperimentPlan, seed: int) -> tuple[sp.csr_matrix, np.ndarray]:
    if isinstance(plan.source, SynthConfig):
        ds = gen_synthetic(replace(plan.source, seed=seed))
        return to_csr(ds.vectors, ds.dim), ds.labels
    path = Path(plan.source)
    try:
        with open(path, encoding="utf-8") as fh:
            data = parse_libsvm(fh)
    except OSError as exc:
        raise TorLabError(f"{path}: {exc.strerror or exc}") from None
    labels = np.asarray(data.labels, dtype=np.int64)
    if np.any(labels < 1) or np.any(labels > plan.K):
        raise ParseError(f"{path}: labels must lie in 1..{plan.K} for an experiment")
    return to_csr(data.vectors, data.dim), labels


def split(n_total: int, pool: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """``(pool indices, unlabeled indices)`` for one seed."""
    perm = np.random.default_rng(seed).permutation(n_total)
    return perm[:pool], perm[pool:]


def _failed(plan: ExperimentPlan, seed: int, n: int, msg: str) -> list[ReportRow]:
    nan = float("nan")
    return [ReportRow(plan.name, seed, n, m, nan, nan, nan, 0.0, 0, error=msg)
            for m in plan.methods]


def run_experiment(plan: ExperimentPlan) -> EvalReport:
    report = EvalReport(plans=[plan.to_dict()])
    cfg = plan.config
    for seed in plan.seeds:
        try:
            X, y = load_source(plan, seed)
        except TorLabError as exc:
            log.error("seed %d: %s", seed, exc)
            for n in plan.sizes:
                report.rows.extend(_failed(plan, seed, n, str(exc)))
            continue
        pool, unl = split(y.size, max(plan.sizes), seed)
        if unl.size == 0:
            for n in plan.sizes:
                report.rows.extend(_failed(plan, seed, n, "no unlabeled samples left"))
            continue
        X_unl, y_unl = X[unl], y[unl]
        for n in plan.sizes:
            lab = pool[:n]
            X_lab, y_lab = X[lab], y[lab]
            try:
                t0 = time.perf_counter()
                if plan.fixed_c1 is not None:
                    c1 = float(plan.fixed_c1)
                else:
                    c1 = cross_validate_c1(cfg, X_lab, y_lab, plan.K, plan.grid,
                                           plan.folds, seed).c1
                cv_time = time.perf_counter() - t0
                report.rows.extend(_run_methods(plan, cfg.with_c1(c1), seed, n, X_lab, y_lab,
                                                X_unl, y_unl, cv_time))
            except TorLabError as exc:
                log.error("seed %d, n=%d: %s", seed, n, exc)
                report.rows.extend(_failed(plan, seed, n, str(exc)))
    return report


def _run_methods(plan, cfg, seed, n, X_lab, y_lab, X_unl, y_unl, cv_time):
    K = plan.K
    rows = []
    t0 = time.perf_counter()
    init = init_pseudo_labels(cfg, X_lab, y_lab, X_unl, K)
    t_init = time.perf_counter() - t0 + cv_time
    sup_iters = int(init.model.diagnostics.get("iterations", init.model.diagnostics.get("epochs", 0)))

    def row(method, pred, wall, iters):
        return ReportRow(plan.name, seed, n, method, cfg.c1, mean_zero_one(pred, y_unl),
                         mean_absolute(pred, y_unl), wall, iters)

    for method in plan.methods:
        if method == "supervised":
            rows.append(row(method, predict_many(init.model, X_unl), t_init, sup_iters))
        elif method == "supervised-ratio":
            rows.append(row(method, init.labels, t_init, sup_iters))
        else:
            t1 = time.perf_counter()
            _, pseudo, trace = train_transductive(cfg, X_lab, y_lab, X_unl, K, init=init,
                                                  keep_snapshots=False)
            r = row(method, pseudo, t_init + time.perf_counter() - t1,
                    sup_iters + trace.iterations)
            if trace.flags:
                r.flags = ";".join(sorted(set(trace.flags)))
            rows.append(r)
    return rows


def p_sweep_plans(ps, K: int = 5, n_samples: int = 2500, labeled: int = 200,
                  seeds=(0, 1, 2, 3, 4), methods=METHODS, config: TrainConfig | None = None,
                  **kw) -> list[ExperimentPlan]:
    """One plan per cluster-assumption strength ``p``."""
    return [ExperimentPlan(SynthConfig(K=K, p=float(p), n_samples=n_samples), K=K,
                           sizes=(labeled,), seeds=tuple(seeds), methods=tuple(methods),
                           config=config or TrainConfig(), **kw)
            for p in ps]
