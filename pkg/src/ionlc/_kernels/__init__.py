"""Kernel backend selection.

Two interchangeable implementations of the hot numerical loops live here:
``numba_backend`` (JIT-compiled, default) and ``numpy_backend`` (pure
vectorized numpy, no compilation step). The environment variable
IONLC_KERNELS picks one:

    IONLC_KERNELS=numba   force the compiled backend
    IONLC_KERNELS=numpy   force the fallback
    IONLC_KERNELS=auto    numba if importable, else numpy (default)

The variable is consulted on every get_kernels() call, so tests can flip
backends without reloading the package. Both backends export rk45_linear,
rk45_lindblad, sor_sweep, sor_solve and laplace_residual with identical
signatures and step-control arithmetic.
"""

import os

_CACHE = {}


def _load(name):
    if name not in _CACHE:
        if name == "numba":
            from . import numba_backend as mod
        elif name == "numpy":
            from . import numpy_backend as mod
        else:
            raise ValueError(
                f"unknown kernel backend {name!r}: expected 'numba', 'numpy' or 'auto'"
            )
        _CACHE[name] = mod
    return _CACHE[name]


def backend_name(name=None):
    """Resolve the requested (or environment-selected) backend name."""
    if name is None:
        name = os.environ.get("IONLC_KERNELS", "auto")
    name = name.lower()
    if name == "auto":
        try:
            _load("numba")
            return "numba"
        except ImportError:
            return "numpy"
    if name not in ("numba", "numpy"):
        raise ValueError(
            f"unknown kernel backend {name!r}: expected 'numba', 'numpy' or 'auto'"
        )
    return name


def get_kernels(name=None):
    """Return the module implementing the kernel API for ``name``."""
    return _load(backend_name(name))
