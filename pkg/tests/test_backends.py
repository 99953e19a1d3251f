import os
import subprocess
import sys

import numpy as np
import pytest
import scipy.sparse as sp

from tor_lab.kernels import GramCache, KernelKind
from tor_lab.losses import LossKind
from tor_lab.solvers import BACKENDS, DEFAULT_BACKEND, ExtendedProblem, get_backend, solve_primal, solve_smo
from tor_lab.errors import ConfigError

needs_ext = pytest.mark.skipif("cython" not in BACKENDS, reason="compiled extension not built")


def test_python_always_available():
    assert "python" in BACKENDS
    assert get_backend("python") is BACKENDS["python"]
    assert get_backend() is BACKENDS[DEFAULT_BACKEND]
    with pytest.raises(ConfigError):
        get_backend("fortran")


def test_env_forces_pure_python():
    env = dict(os.environ, TOR_LAB_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c",
                          "from tor_lab.solvers import DEFAULT_BACKEND; print(DEFAULT_BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
@pytest.mark.parametrize("variant", ["linear", "perceptron"])
def test_smo_backends_identical(variant):
    rng = np.random.default_rng(0)
    X = sp.csr_matrix(rng.normal(size=(40, 6)))
    gram = GramCache(KernelKind(variant), X)
    prob = ExtendedProblem.from_labels(gram, rng.integers(1, 5, 40), rng.choice([0.1, 1, 10], 40), 4)
    a = solve_smo(prob, backend="python")
    b = solve_smo(prob, backend="cython")
    assert a.diagnostics.iterations == b.diagnostics.iterations
    assert np.array_equal(a.alphas, b.alphas)
    assert a.objective == b.objective


@needs_ext
@pytest.mark.parametrize("loss", list(LossKind))
def test_sgd_backends_identical(loss):
    rng = np.random.default_rng(1)
    X = sp.csr_matrix(rng.normal(size=(30, 5)) * (rng.random((30, 5)) < 0.5))
    y = rng.integers(1, 4, 30)
    a = solve_primal(loss, X, y, 1.0, 3, epochs=5, backend="python", polish=False)
    b = solve_primal(loss, X, y, 1.0, 3, epochs=5, backend="cython", polish=False)
    assert np.allclose(a.weight, b.weight, rtol=1e-12, atol=1e-12)
    assert a.trace == pytest.approx(b.trace, rel=1e-12)
