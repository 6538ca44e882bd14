"""Pure numpy implementation of the gamma/GEX kernels.

Same signatures as the compiled ``_kernels_ext`` module. Used when the
extension is not built, or when ``GEXPROBE_KERNEL=python`` is set.
"""
import numpy as np

INV_SQRT_2PI = 0.39894228040143267794
SENTINEL_TTE = 1.0 / (252.0 * 6.5)

# bounds the (grid x contracts) scratch matrix in gex_curve
_CHUNK_CELLS = 1 << 20


def _gamma(spot, strikes, tte, iv, rate):
    spot = np.asarray(spot, dtype=np.float64)
    expired = tte <= 0.0
    t = np.where(expired, SENTINEL_TTE, tte)
    vol_t = iv * np.sqrt(t)
    d1 = (np.log(spot / strikes) + (rate + 0.5 * iv * iv) * t) / vol_t
    g = INV_SQRT_2PI * np.exp(-0.5 * d1 * d1) / (spot * vol_t)
    return np.where(expired & (spot != strikes), 0.0, g)


def gamma_array(spot, strikes, tte, iv, rate=0.0):
    return _gamma(float(spot), strikes, tte, iv, rate)


def net_gex(spot, strikes, tte, iv, weights, rate=0.0):
    """Dollar GEX at ``spot``; ``weights`` are signed open interest."""
    g = _gamma(float(spot), strikes, tte, iv, rate)
    return float(np.sum(weights * g)) * 100.0 * spot * spot


def gex_curve(grid, strikes, tte, iv, weights, rate=0.0):
    grid = np.asarray(grid, dtype=np.float64)
    out = np.empty(grid.shape[0], dtype=np.float64)
    n = max(strikes.shape[0], 1)
    step = max(1, _CHUNK_CELLS // n)
    for lo in range(0, grid.shape[0], step):
        s = grid[lo:lo + step, None]
        g = _gamma(s, strikes[None, :], tte[None, :], iv[None, :], rate)
        out[lo:lo + step] = (g * weights[None, :]).sum(axis=1) * 100.0 * s[:, 0] ** 2
    return out
