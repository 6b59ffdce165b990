"""Reference numpy implementations of the grid kernels."""

import numpy as np

# interior interval rule from the 6-point Lagrange interpolant on i-2..i+3
_W_MID = np.array([11.0, -93.0, 802.0, 802.0, -93.0, 11.0]) / 1440.0
# first and second intervals, one-sided on points 0..5
_W_0 = np.array([475.0, 1427.0, -798.0, 482.0, -173.0, 27.0]) / 1440.0
_W_1 = np.array([-27.0, 637.0, 1022.0, -258.0, 77.0, -11.0]) / 1440.0


def stencil_derivatives(f, h):
    """First and second derivatives of uniformly sampled ``f`` (4th order, one-sided at the ends)."""
    f = np.ascontiguousarray(f, dtype=float)
    n = f.size
    if n < 6:
        raise ValueError("need at least 6 samples")
    d1 = np.empty(n)
    d2 = np.empty(n)
    d1[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d2[2:-2] = (-f[:-4] + 16 * f[1:-3] - 30 * f[2:-2] + 16 * f[3:-1] - f[4:]) / (12 * h * h)
    a = f[:6]
    d1[0] = (-25 * a[0] + 48 * a[1] - 36 * a[2] + 16 * a[3] - 3 * a[4]) / (12 * h)
    d1[1] = (-3 * a[0] - 10 * a[1] + 18 * a[2] - 6 * a[3] + a[4]) / (12 * h)
    d2[0] = (45 * a[0] - 154 * a[1] + 214 * a[2] - 156 * a[3] + 61 * a[4] - 10 * a[5]) / (12 * h * h)
    d2[1] = (10 * a[0] - 15 * a[1] - 4 * a[2] + 14 * a[3] - 6 * a[4] + a[5]) / (12 * h * h)
    b = f[-6:][::-1]
    d1[-1] = -(-25 * b[0] + 48 * b[1] - 36 * b[2] + 16 * b[3] - 3 * b[4]) / (12 * h)
    d1[-2] = -(-3 * b[0] - 10 * b[1] + 18 * b[2] - 6 * b[3] + b[4]) / (12 * h)
    d2[-1] = (45 * b[0] - 154 * b[1] + 214 * b[2] - 156 * b[3] + 61 * b[4] - 10 * b[5]) / (12 * h * h)
    d2[-2] = (10 * b[0] - 15 * b[1] - 4 * b[2] + 14 * b[3] - 6 * b[4] + b[5]) / (12 * h * h)
    return d1, d2


def interval_integrals(f, h):
    """Integral of ``f`` over each grid interval, 6th-order accurate."""
    f = np.ascontiguousarray(f, dtype=float)
    n = f.size
    if n < 6:
        raise ValueError("need at least 6 samples")
    out = np.empty(n - 1)
    if n > 6:
        out[2:-2] = (
            _W_MID[0] * f[:-5] + _W_MID[1] * f[1:-4] + _W_MID[2] * f[2:-3]
            + _W_MID[3] * f[3:-2] + _W_MID[4] * f[4:-1] + _W_MID[5] * f[5:]
        )[: n - 5]
    out[0] = _W_0 @ f[:6]
    out[1] = _W_1 @ f[:6]
    r = f[-6:][::-1]
    out[-1] = _W_0 @ r
    out[-2] = _W_1 @ r
    return out * h


def cumulative_integral(f, h):
    """Running integral from the first sample, same length as ``f``."""
    seg = interval_integrals(f, h)
    out = np.empty(seg.size + 1)
    out[0] = 0.0
    np.cumsum(seg, out=out[1:])
    return out
