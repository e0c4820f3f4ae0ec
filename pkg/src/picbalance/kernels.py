"""Backend selection for the hot PIC kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback. Set ``PICBALANCE_PURE_PYTHON=1`` to force the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("PICBALANCE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def deposit_cic(x, y, q, nx, ny, hx, hy, impl=None):
    impl = impl or _impl
    return impl.deposit_cic(_f64(x), _f64(y), _f64(q), int(nx), int(ny), float(hx), float(hy))


def gather_cic(x, y, ex, ey, hx, hy, impl=None):
    impl = impl or _impl
    return impl.gather_cic(_f64(x), _f64(y), _f64(ex), _f64(ey), float(hx), float(hy))


def jacobi_solve(rho, phi, hx, hy, tol, max_iter, omega, impl=None):
    """Iterate in place on ``phi`` (must be C-contiguous float64)."""
    impl = impl or _impl
    return impl.jacobi_solve(_f64(rho), phi, float(hx), float(hy), float(tol), int(max_iter), float(omega))


def touched_elements(x, y, rank, nx, ny, hx, hy, cx, cy, gy, n_ranks, impl=None):
    """Per-rank mask of grid elements containing any node of a particle's CIC stencil."""
    impl = impl or _impl
    return impl.touched_elements(_f64(x), _f64(y), np.ascontiguousarray(rank, dtype=np.int_),
                                 int(nx), int(ny), float(hx), float(hy), int(cx), int(cy), int(gy), int(n_ranks))
