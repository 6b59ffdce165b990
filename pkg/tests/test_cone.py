import math
import random
from fractions import Fraction as Fr

import numpy as np
import pytest

from phgcy.cone import (
    ConeError, IndicialWeightError, QuadraticRoot, apply_cone_laplacian,
    cone_laplacian_term, formal_solve_cone, harmonic_space, indicial_roots, round_sphere_spectrum,
    spectrum_from_json,
)
from phgcy.log_series import LogSeries, ModeVector


def test_indicial_examples():
    assert indicial_roots(0, 4) == (0, -2)
    assert indicial_roots(5, 6) == (1, -5)
    assert indicial_roots(2, 3) == (1, -2)
    with pytest.raises(ConeError):
        indicial_roots(1, 2)


def test_irrational_roots_keep_data():
    ap, am = indicial_roots(1, 4)
    assert isinstance(ap, QuadraticRoot) and ap.lam == 1 and ap.m == 4
    assert ap.value == pytest.approx(-1 + math.sqrt(2))
    assert ap.value + am.value == pytest.approx(-2)
    assert ap != Fr(-1 + 1414, 1000)


def test_root_algebra_table():
    for m in (3, 4, 6, 8):
        spec = round_sphere_spectrum(m, 6)
        for lab, (ap, am) in spec.root_table().items():
            assert ap + am == -(m - 2)
            assert ap * am == -spec.lam(lab)
            assert ap >= am


def test_laplacian_term_examples():
    assert cone_laplacian_term(2, 0, 0, 4)[0] == 8
    assert cone_laplacian_term(0, 1, 0, 4)[1] == 2
    ap, _ = indicial_roots(12, 6)
    assert cone_laplacian_term(ap, 0, 12, 6)[0] == 0


def fd_laplacian(a, k, lam, m, r, h=1e-3):
    f = lambda x: x**a * np.log(x) ** k
    d1 = (f(r - 2 * h) - 8 * f(r - h) + 8 * f(r + h) - f(r + 2 * h)) / (12 * h)
    d2 = (-f(r - 2 * h) + 16 * f(r - h) - 30 * f(r) + 16 * f(r + h) - f(r + 2 * h)) / (12 * h * h)
    return d2 + (m - 1) / r * d1 - lam / r**2 * f(r)


def test_laplacian_term_oracle():
    rng = random.Random(5)
    for _ in range(40):
        a = Fr(rng.randint(-12, 12), rng.choice([1, 2, 3]))
        k = rng.randint(0, 3)
        m = rng.randint(3, 9)
        lam = Fr(rng.randint(0, 40))
        c = cone_laplacian_term(a, k, lam, m)
        for r in (0.5, 0.9, 1.7, 2.0):
            L = math.log(r)
            exact = r ** float(a - 2) * sum(float(ci) * L ** (k - i) for i, ci in enumerate(c) if k - i >= 0)
            num = fd_laplacian(float(a), k, float(lam), m, r)
            assert abs(num - exact) <= 1e-6 * max(1.0, abs(exact))


def test_formal_solve_examples():
    u = formal_solve_cone(LogSeries({(0, 0): 1}, 4), 4)
    assert u == LogSeries({(2, 0): Fr(1, 8)}, 6)
    rep = []
    u = formal_solve_cone(LogSeries({(-2, 0): 1}, 4), 4, report=rep)
    assert u == LogSeries({(0, 1): Fr(1, 2)}, 6)
    assert len(rep) == 1 and rep[0].exponent == 0
    assert formal_solve_cone(LogSeries({}, 4), 4).is_zero()


def test_weight_on_root_raises():
    with pytest.raises(IndicialWeightError):
        formal_solve_cone(LogSeries({(0, 0): 1}, 4), 4, weight_window=(-2, 1))


def test_soundness_random_modes():
    rng = random.Random(2)
    spec = round_sphere_spectrum(6, 4)
    for _ in range(20):
        terms = {}
        for _ in range(4):
            z = Fr(rng.randint(-10, 6), rng.choice([1, 2]))
            terms[(z, rng.randint(0, 2))] = ModeVector({f"j{rng.randint(0, 4)}": Fr(rng.randint(1, 9), rng.randint(1, 4))})
        f = LogSeries(terms, 6)
        u = formal_solve_cone(f, 6, spec)
        assert apply_cone_laplacian(u, 6, spec) - f == LogSeries({}, 6)


def test_harmonic_space():
    spec = round_sphere_spectrum(6, 3)
    assert [(l, a) for l, _, a in harmonic_space(6, spec, 1.5)] == [("j0", 0), ("j1", 1)]
    assert [(l, a) for l, _, a in harmonic_space(6, spec, 0.5)] == [("j0", 0)]
    assert ("j2", 12, 2) in harmonic_space(6, spec, 2.5)


def test_spectrum_json():
    spec = round_sphere_spectrum(6, 2)
    back = spectrum_from_json(spec.to_json())
    assert back == spec
    with pytest.raises(ConeError):
        spectrum_from_json({"m": 6, "modes": [{"label": "x", "lambda": [3, 1]}]})
    assert round_sphere_spectrum(3, 2).modes[2].mult == 5
