"""Time the compiled grid kernels against the numpy fallback.

Run ``python benchmarks/bench_kernels.py [n]``.
"""

import sys
import timeit

import numpy as np

from phgcy import _pykernels

try:
    from phgcy import _ckernels
except ImportError:
    _ckernels = None


def main(n=20001, repeat=20):
    t = np.linspace(-10, 10, n)
    f = np.exp(-t * t) + np.sin(t)
    h = t[1] - t[0]
    impls = {"numpy": _pykernels}
    if _ckernels is not None:
        impls["cython"] = _ckernels
    print(f"{'kernel':<24}{'backend':<10}{'us/call':>12}")
    for name in ("stencil_derivatives", "interval_integrals", "cumulative_integral"):
        for label, mod in impls.items():
            fn = getattr(mod, name)
            sec = min(timeit.repeat(lambda: fn(f, h), number=repeat, repeat=3)) / repeat
            print(f"{name:<24}{label:<10}{sec * 1e6:>12.1f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 20001)
