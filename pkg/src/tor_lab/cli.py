"""``tor-lab`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .data import SynthConfig, gen_synthetic, load_dataset, parse_libsvm, to_csr, write_libsvm
from .errors import ConfigError, TorLabError
from .harness import (METHODS, check_rows, cross_validate_c1, emit_report, mean_absolute,
                      mean_zero_one, p_sweep_plans, run_experiment)
from .harness.experiment import EvalReport, ExperimentPlan
from .kernels import CACHE_ENV, KERNELS, KernelKind
from .losses import LossKind
from .ordreg import TrainConfig, load_model, predict_many, save_model, train_supervised
from .solvers import get_backend
from .tor import train_transductive

log = logging.getLogger("tor_lab")

LOSS_CHOICES = ["hinge", "square-hinge", "logistic", "square", "laplacian"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("training")
    g.add_argument("--c1", type=float, default=1.0, help="labeled-data cost C1")
    g.add_argument("--c2-init", type=float, default=1e-5, help="first unlabeled cost C2")
    g.add_argument("--c2-mult", type=float, default=2.0, help="C2 growth factor per stage")
    g.add_argument("--loss", choices=LOSS_CHOICES, default="hinge")
    g.add_argument("--kernel", choices=list(KERNELS), default="linear")
    g.add_argument("--delta-p", type=float, default=0.0, help="perceptron kernel offset")
    g.add_argument("--tol", type=float, default=1e-3, help="SMO KKT tolerance")
    g.add_argument("--max-iter", type=int, default=10_000_000, help="SMO pair-update cap")
    g.add_argument("--epochs", type=int, default=50, help="primal trainer epochs")
    g.add_argument("--solver", choices=["auto", "smo", "primal"], default="auto")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--backend", choices=["python", "cython"], default=None,
                   help="solver inner-loop implementation")
    g.add_argument("--cache-bytes", type=int, default=None,
                   help=f"kernel cache budget (default ${CACHE_ENV} or 256 MiB)")


def _config(args) -> TrainConfig:
    if args.backend is not None:
        get_backend(args.backend)
    return TrainConfig(c1=args.c1, loss=LossKind.parse(args.loss),
                       kernel=KernelKind(args.kernel, delta_p=args.delta_p),
                       solver=args.solver, tol=args.tol, max_iter=args.max_iter,
                       epochs=args.epochs, seed=args.seed, c2_init=args.c2_init,
                       c2_mult=args.c2_mult, backend=args.backend, cache_bytes=args.cache_bytes)


def _load(path, K, unlabeled=None, dim=None):
    try:
        return load_dataset(path, K, unlabeled, dim)
    except OSError as exc:
        raise TorLabError(f"{exc.filename}: {exc.strerror}") from None


def _write_lines(path, values) -> None:
    text = "".join(f"{v}\n" for v in values)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise TorLabError(f"{path}: {exc.strerror}") from None


def cmd_train(args) -> int:
    cfg = _config(args)
    ds = _load(args.data, args.K, args.unlabeled)
    if ds.n == 0:
        raise ConfigError("the training file has no labeled samples")
    X_lab = to_csr(ds.vectors, ds.dim)
    if args.mode == "supervised":
        model = train_supervised(cfg, X_lab, ds.labels, args.K)
        pseudo = None
    else:
        if ds.u == 0:
            raise ConfigError("transductive mode needs unlabeled samples "
                              "(label 0 lines or --unlabeled)")
        X_unl = to_csr(ds.unlabeled, ds.dim)
        model, pseudo, trace = train_transductive(cfg, X_lab, ds.labels, X_unl, args.K,
                                                  keep_snapshots=False)
        if args.trace:
            try:
                with open(args.trace, "w", newline="", encoding="utf-8") as fh:
                    trace.write_csv(fh)
            except OSError as exc:
                raise TorLabError(f"{args.trace}: {exc.strerror}") from None
        if args.pseudo:
            _write_lines(args.pseudo, pseudo.tolist())
        for flag in sorted(set(trace.flags)):
            log.warning("transduction flag: %s", flag)
    try:
        save_model(model, args.model)
    except OSError as exc:
        raise TorLabError(f"{args.model}: {exc.strerror}") from None
    summary = {"mode": args.mode, "K": args.K, "labeled": ds.n, "unlabeled": ds.u,
               "thresholds": model.thresholds.tolist(), "b": model.b,
               "flags": list(model.flags), "model": str(args.model)}
    if pseudo is not None:
        summary["pseudo_counts"] = np.bincount(pseudo, minlength=args.K + 1)[1:].tolist()
    print(json.dumps(summary))
    if "solver-not-converged" in model.flags:
        return 4
    return 0


def cmd_predict(args) -> int:
    model = load_model(args.model)
    try:
        with open(args.data, encoding="utf-8") as fh:
            data = parse_libsvm(fh, dim=model.dim)
    except OSError as exc:
        raise TorLabError(f"{exc.filename}: {exc.strerror}") from None
    X = to_csr([v.with_dim(model.dim) for v in data.vectors], model.dim)
    pred = predict_many(model, X) if X.shape[0] else np.zeros(0, dtype=np.int64)
    _write_lines(args.output, pred.tolist())
    truth = np.asarray(data.labels, dtype=np.int64)
    known = truth > 0
    if known.any():
        print(json.dumps({"scored": int(known.sum()),
                          "zero_one": mean_zero_one(pred[known], truth[known]),
                          "mae": mean_absolute(pred[known], truth[known])}), file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    ds = gen_synthetic(SynthConfig(K=args.K, p=args.p, n_samples=args.n_samples, seed=args.seed))
    if args.output in (None, "-"):
        write_libsvm(sys.stdout, ds.vectors, ds.labels.tolist())
        return 0
    try:
        with open(args.output, "w", encoding="utf-8") as fh:
            write_libsvm(fh, ds.vectors, ds.labels.tolist())
    except OSError as exc:
        raise TorLabError(f"{args.output}: {exc.strerror}") from None
    return 0


def _grid(text: str) -> tuple[float, ...]:
    """``-3:5`` (inclusive integer range) or a comma list of exponents."""
    try:
        if ":" in text:
            lo, hi = text.split(":")
            return tuple(float(e) for e in range(int(lo), int(hi) + 1))
        return tuple(float(e) for e in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def cmd_cv(args) -> int:
    cfg = _config(args)
    ds = _load(args.data, args.K)
    res = cross_validate_c1(cfg, to_csr(ds.vectors, ds.dim), ds.labels, args.K,
                            grid=args.grid, folds=args.folds, seed=args.seed)
    for e, err in zip(res.exponents, res.mean_errors):
        print(f"log10(C1)={e:g}\tzero_one={err:.6f}")
    print(json.dumps({"c1": res.c1, "folds": res.folds, "warnings": res.warnings}))
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    seeds = tuple(range(args.seeds))
    methods = tuple(args.methods)
    common = dict(seeds=seeds, methods=methods, config=cfg, folds=args.folds, grid=args.grid,
                  fixed_c1=args.c1 if args.fixed_c1 else None)
    if args.data:
        plans = [ExperimentPlan(args.data, K=args.K, sizes=tuple(args.sizes), **common)]
    else:
        plans = p_sweep_plans(args.p, K=args.K, n_samples=args.n_samples,
                              labeled=args.sizes[0], **common)
        if len(args.sizes) > 1:
            plans = [ExperimentPlan(pl.source, K=args.K, sizes=tuple(args.sizes), **common)
                     for pl in plans]
    report = EvalReport()
    for plan in plans:
        report.extend(run_experiment(plan))
    for row in report.aggregate():
        if row.kind == "mean":
            print(f"{row.dataset}\tn={row.n}\t{row.method}\tzero_one={row.zero_one:.4f}"
                  f"\tmae={row.mae:.4f}")
    problems = check_rows(report.rows)
    for p in problems:
        log.error("report check: %s", p)
    if args.output:
        emit_report(report, args.output)
    failed = [r for r in report.rows if r.error]
    return 1 if failed or problems else 0


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tor-lab", description="Transductive ordinal regression toolkit")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="fit a model")
    p.add_argument("--data", required=True, help="libsvm file; label 0 marks unlabeled rows")
    p.add_argument("--unlabeled", help="extra file of unlabeled rows")
    p.add_argument("--K", type=int, required=True, help="number of ordinal classes")
    p.add_argument("--mode", choices=["supervised", "transductive"], default="supervised")
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--trace", help="transduction trace CSV")
    p.add_argument("--pseudo", help="final pseudo-labels, one per line")
    _add_train_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="label samples with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--output", help="prediction file (default stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("synth", help="generate the cluster-assumption data set")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--p", type=float, default=0.0, help="out-of-band feature rate factor")
    p.add_argument("--n-samples", type=int, default=2500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="libsvm output (default stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cv", help="select C1 by stratified cross-validation")
    p.add_argument("--data", required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", type=_grid, default=tuple(float(e) for e in range(-3, 6)),
                   help="log10 C1 exponents, 'lo:hi' or comma list")
    _add_train_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("bench", help="run the evaluation protocol and write a report")
    p.add_argument("--data", help="fully labeled libsvm file (default: synthetic p-sweep)")
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--p", type=float, nargs="+", default=[0.0, 0.1, 0.3, 0.6, 0.9])
    p.add_argument("--n-samples", type=int, default=2500)
    p.add_argument("--sizes", type=int, nargs="+", default=[200])
    p.add_argument("--seeds", type=int, default=5, help="number of seeds, 0..N-1")
    p.add_argument("--methods", nargs="+", choices=list(METHODS), default=list(METHODS))
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--grid", type=_grid, default=tuple(float(e) for e in range(-3, 6)))
    p.add_argument("--fixed-c1", action="store_true", help="use --c1 instead of CV")
    p.add_argument("--output", help="report CSV (metadata goes to <output>.meta.json)")
    _add_train_flags(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(format="tor-lab: %(levelname)s: %(message)s", level=logging.WARNING)
    try:
        args = build_parser().parse_args(argv)
        if args.verbose:
            logging.getLogger().setLevel(logging.INFO)
        return args.func(args)
    except TorLabError as exc:
        print(f"tor-lab: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
