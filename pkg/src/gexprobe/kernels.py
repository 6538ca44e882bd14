"""Backend selection for the gamma/GEX hot loops.

The compiled extension is preferred. ``GEXPROBE_KERNEL=python`` forces the
numpy fallback, and ``GEXPROBE_KERNEL=cython`` makes a missing extension an
import error rather than a silent fallback.
"""
import os

import numpy as np

from gexprobe import _kernels_py

_requested = os.environ.get("GEXPROBE_KERNEL", "auto").lower()

try:
    from gexprobe import _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None
    if _requested == "cython":
        raise

if _requested == "python" or _kernels_ext is None:
    _impl = _kernels_py
    BACKEND = "python"
else:
    _impl = _kernels_ext
    BACKEND = "cython"


def available_backends():
    names = ["python"]
    if _kernels_ext is not None:
        names.append("cython")
    return names


def get_backend(name):
    """Return the kernel module named ``name`` ("python" or "cython")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _kernels_ext is None:
            raise ImportError("gexprobe._kernels_ext is not built")
        return _kernels_ext
    raise ValueError(f"unknown kernel backend {name!r}")


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def gamma_array(spot, strikes, tte, iv, rate=0.0):
    return _impl.gamma_array(float(spot), _f64(strikes), _f64(tte), _f64(iv), float(rate))


def net_gex(spot, strikes, tte, iv, weights, rate=0.0):
    return _impl.net_gex(float(spot), _f64(strikes), _f64(tte), _f64(iv), _f64(weights), float(rate))


def gex_curve(grid, strikes, tte, iv, weights, rate=0.0):
    return _impl.gex_curve(_f64(grid), _f64(strikes), _f64(tte), _f64(iv), _f64(weights), float(rate))
