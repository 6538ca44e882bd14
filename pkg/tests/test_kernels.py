import numpy as np
import pytest

import oracles
from gexprobe import _kernels_py, kernels

BACKENDS = kernels.available_backends()


def _inputs(seed, n=200):
    rng = np.random.default_rng(seed)
    strikes = rng.uniform(80, 120, n)
    tte = rng.uniform(0, 0.5, n)
    tte[::7] = 0.0
    iv = rng.uniform(0.1, 0.6, n)
    w = rng.integers(-5000, 5000, n).astype(float)
    return strikes, tte, iv, w


@pytest.mark.parametrize("name", BACKENDS)
def test_gamma_array_matches_scalar_oracle(name):
    k = kernels.get_backend(name)
    strikes, tte, iv, _ = _inputs(1)
    got = k.gamma_array(100.0, strikes, np.where(tte == 0, oracles.ONE_HOUR, tte), iv, 0.0)
    ref = [oracles.gamma(100.0, s, t, v) for s, t, v in zip(strikes, tte, iv)]
    np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("name", BACKENDS)
def test_curve_backends_agree(name):
    k = kernels.get_backend(name)
    strikes, tte, iv, w = _inputs(2)
    tte = np.where(tte == 0, oracles.ONE_HOUR, tte)
    grid = np.linspace(90, 110, 81)
    ref = _kernels_py.gex_curve(grid, strikes, tte, iv, w, 0.0)
    np.testing.assert_allclose(k.gex_curve(grid, strikes, tte, iv, w, 0.0), ref, rtol=1e-10,
                               atol=1e-12 * np.abs(ref).max())


@pytest.mark.parametrize("name", BACKENDS)
def test_net_gex_equals_curve_point(name):
    k = kernels.get_backend(name)
    strikes, tte, iv, w = _inputs(3)
    tte = np.where(tte == 0, oracles.ONE_HOUR, tte)
    one = k.net_gex(101.5, strikes, tte, iv, w, 0.0)
    curve = k.gex_curve(np.array([101.5]), strikes, tte, iv, w, 0.0)[0]
    assert one == pytest.approx(curve, rel=1e-10)


def test_curve_is_deterministic(backend):
    strikes, tte, iv, w = _inputs(4)
    tte = np.where(tte == 0, oracles.ONE_HOUR, tte)
    grid = np.linspace(90, 110, 10_001)
    a = kernels.gex_curve(grid, strikes, tte, iv, w)
    b = kernels.gex_curve(grid, strikes, tte, iv, w)
    assert a.tobytes() == b.tobytes()


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


def test_selected_backend_is_listed():
    assert kernels.BACKEND in BACKENDS
