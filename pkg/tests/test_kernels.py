import numpy as np
import pytest

from phgcy import _pykernels, kernels

try:
    from phgcy import _ckernels
except ImportError:  # pragma: no cover
    _ckernels = None


def sample(n=400):
    t = np.linspace(-3, 2, n)
    return t, t[1] - t[0], np.exp(np.sin(3 * t)) + t**3


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "numpy")


@pytest.mark.skipif(_ckernels is None, reason="extension not built")
def test_compiled_matches_fallback():
    _, h, f = sample()
    for name in ("stencil_derivatives", "interval_integrals", "cumulative_integral"):
        a = getattr(_pykernels, name)(f, h)
        b = getattr(_ckernels, name)(f, h)
        for x, y in zip(np.atleast_2d(a), np.atleast_2d(b)):
            np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-13)


def test_orders_of_accuracy():
    errs_d, errs_i = [], []
    for n in (100, 200):
        t = np.linspace(0, 2, n)
        h = t[1] - t[0]
        f = np.exp(t)
        d1, _ = kernels.stencil_derivatives(f, h)
        errs_d.append(np.abs(d1 - f).max())
        errs_i.append(np.abs(kernels.cumulative_integral(f, h) - (f - 1)).max())
    assert np.log2(errs_d[0] / errs_d[1]) > 3.5
    assert np.log2(errs_i[0] / errs_i[1]) > 5.5


def test_polynomial_exactness():
    t = np.linspace(0, 1, 11)
    h = t[1] - t[0]
    f = 3 * t**5 - t**2 + 1
    np.testing.assert_allclose(kernels.cumulative_integral(f, h), t**6 / 2 - t**3 / 3 + t, atol=1e-14)
    d1, d2 = kernels.stencil_derivatives(t**4, h)
    np.testing.assert_allclose(d1, 4 * t**3, atol=1e-12)
    np.testing.assert_allclose(d2, 12 * t**2, atol=1e-10)


def test_short_input_rejected():
    with pytest.raises(ValueError):
        kernels.cumulative_integral(np.ones(4), 0.1)
