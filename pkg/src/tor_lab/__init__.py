"""Ordinal regression by extended binary reduction, with a transductive
pseudo-labeling loop for unlabeled data."""
from ._version import __version__
from .data import (ClassRatios, OrdinalDataset, SparseVector, SynthConfig, gen_synthetic,
                   load_dataset, parse_libsvm, quantize_targets, to_csr, write_libsvm)
from .errors import ConfigError, DomainError, ParseError, SolverError, TorLabError
from .kernels import GramCache, KernelKind
from .losses import LossKind, ordinal_loss, swap_gain
from .ordreg import (OrdinalModel, TrainConfig, load_model, predict, predict_many, save_model,
                     train_supervised)
from .tor import (C2Schedule, TransductionTrace, find_swap, init_pseudo_labels, objective,
                  train_transductive)

__all__ = [
    "__version__", "ClassRatios", "OrdinalDataset", "SparseVector", "SynthConfig",
    "gen_synthetic", "load_dataset", "parse_libsvm", "quantize_targets", "to_csr",
    "write_libsvm", "ConfigError", "DomainError", "ParseError", "SolverError", "TorLabError",
    "GramCache", "KernelKind", "LossKind", "ordinal_loss", "swap_gain", "OrdinalModel",
    "TrainConfig", "load_model", "predict", "predict_many", "save_model", "train_supervised",
    "C2Schedule", "TransductionTrace", "find_swap", "init_pseudo_labels", "objective",
    "train_transductive",
]
