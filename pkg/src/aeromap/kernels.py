"""Hot-loop kernels, compiled when the extension is built.

The Cython module ``_ckernels`` is preferred; the numpy module
``_kernels_py`` is used when it is missing or when the environment variable
``AEROMAP_PURE_PYTHON`` is set to a non-empty value other than ``0``.
``BACKEND`` names the active implementation.

Only the Gauss-Seidel sweep defaults to the compiled code. The quadratic
forms and the Gram matrix are matrix products where numpy's BLAS path is
faster than the compiled loops at all but the smallest sizes (see
``benchmarks/bench_kernels.py``); pass ``backend="cython"`` to force them.
"""

import os

import numpy as np

from . import _kernels_py

_force_py = os.environ.get("AEROMAP_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_py:
        raise ImportError("pure Python backend requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _kernels_py
    BACKEND = "python"


def quad_forms(S, K, backend=None):
    """``Re(s_n* K s_n)`` for every column ``s_n`` of ``S`` (``K`` Hermitian)."""
    impl = _select(backend or "python")
    return impl.quad_forms(np.ascontiguousarray(S, dtype=complex),
                           np.ascontiguousarray(K, dtype=complex))


def gram_abs2(S, backend=None):
    """``|s_n* s_n'|^2`` for all column pairs; exactly symmetric."""
    impl = _select(backend or "python")
    return impl.gram_abs2(np.ascontiguousarray(S, dtype=complex))


def gs_solve(A, b, x0, max_sweeps, tol, stagnation_tol=1e-15, backend=None):
    """Projected Gauss-Seidel; returns ``(x, sweeps, residuals, status)``."""
    impl = _select(backend)
    x = np.array(x0, dtype=float)
    sweeps, res, status = impl.gs_solve(
        np.ascontiguousarray(A, dtype=float), np.ascontiguousarray(b, dtype=float),
        x, int(max_sweeps), float(tol), float(stagnation_tol))
    return x, sweeps, np.asarray(res), status


def _select(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        if _impl is _kernels_py:
            from . import _ckernels  # raises ImportError if not built
            return _ckernels
        return _impl
    raise ValueError(f"unknown backend {backend!r}")
