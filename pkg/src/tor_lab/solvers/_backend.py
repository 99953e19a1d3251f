"""Pick the compiled inner loops when available, else the NumPy fallback.

Set ``TOR_LAB_PURE_PYTHON=1`` to force the fallback.
"""
import os

from ..errors import ConfigError
from . import _kernels_py

try:
    from . import _smo_ext
except ImportError:  # extension not built
    _smo_ext = None

BACKENDS = {"python": _kernels_py}
if _smo_ext is not None:
    BACKENDS["cython"] = _smo_ext

if os.environ.get("TOR_LAB_PURE_PYTHON", "").strip() not in ("", "0") or _smo_ext is None:
    DEFAULT = "python"
else:
    DEFAULT = "cython"


def get_backend(name=None):
    name = DEFAULT if name is None else name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ConfigError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
