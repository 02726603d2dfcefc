"""Backend selection for the hot image kernels.

Two interchangeable implementations exist: numba-compiled loops
(``_kernels_numba``) and vectorized plain numpy (``_kernels_numpy``).
The environment variable ``VDP_BACKEND`` picks one:

* unset       -- numba when importable, numpy otherwise
* ``numba``   -- require numba; ImportError if it is missing
* ``numpy``   -- force the pure-numpy path

``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _kernels_numpy

BACKEND_ENV = "VDP_BACKEND"


def _select():
    choice = os.environ.get(BACKEND_ENV, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"{BACKEND_ENV} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy", _kernels_numpy
    try:
        from . import _kernels_numba
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", _kernels_numpy
    return "numba", _kernels_numba


BACKEND, _impl = _select()

laplacian_response = _impl.laplacian_response
ssim_mean = _impl.ssim_mean
