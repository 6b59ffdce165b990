import math
from fractions import Fraction

import numpy as np
import pytest

from phgcy.faces import (
    EpsSeries,
    FaceError,
    FaceFunction,
    cumulative,
    integrate_head,
    integrate_tail,
    lagrange_sample,
    make_grid,
    power_log_antiderivative,
    sample,
    transfer,
)

@pytest.fixture(scope="module")
def grids():
    gI = make_grid("I", 1e-2, 1e4, 100, 6)
    gII = make_grid("II", 1e-6, 1.0, 100, 6)
    return gI, gII


def test_grid_is_anchored_at_one(grids):
    _, gII = grids
    assert gII.u[-1] == 1
    with pytest.raises(FaceError):
        make_grid("II", 1e-3, 1.0, 101, 4)


def test_monomial_bvalues_and_far_series(grids):
    gI, gII = grids
    f = FaceFunction.monomial(gII, Fraction(3, 2), 2, 0.5)
    x = gII.u
    np.testing.assert_allclose(f.vals.astype(float), (0.5 * x**1.5 * np.log(x) ** 2).astype(float), rtol=1e-15)
    expect_b = 0.5 * (1.5 * x**1.5 * np.log(x) ** 2 + 2 * x**1.5 * np.log(x))
    np.testing.assert_allclose(f.bvals.astype(float), expect_b.astype(float), rtol=1e-14, atol=1e-300)
    assert f.far[(Fraction(3, 2), 2)] == 0.5
    # on the AC face xt^a (log xt)^m = y^(-a) (-log y)^m
    g = FaceFunction.monomial(gI, 2, 1, 3.0)
    assert g.far[(-2, 1)] == -3.0
    np.testing.assert_allclose(g.far_eval(gI.u).astype(float), g.vals.astype(float), rtol=1e-14)


def test_products_carry_leibniz_b_values(grids):
    _, gII = grids
    f = FaceFunction.monomial(gII, 1) + 2.0
    g = FaceFunction.monomial(gII, 2, 1)
    h = f * g
    x = gII.u
    np.testing.assert_allclose(h.far_eval(x).astype(float), h.vals.astype(float), rtol=1e-13)
    assert h.b().far == (f.far * g.far).b_derivative()


def test_reciprocal_far_series(grids):
    gI, _ = grids
    f = FaceFunction.constant(gI, 1.0) + FaceFunction.monomial(gI, -3, 0, 0.25)
    r = f.reciprocal()
    u = gI.u[gI.u > 10]
    # far series truncated at y^6; the neglected y^9 term bounds the gap
    z = 0.25 / u**3
    gap = r.far_eval(u) - 1 / (1 + z)
    assert float(np.max(np.abs(gap - z**3 / (1 + z)))) < 1e-16
    assert r.far[(3, 0)] == pytest.approx(-0.25)
    assert r.far[(6, 0)] == pytest.approx(0.0625)


def test_transfer_rewrites_logs_through_eps(grids):
    gI, gII = grids
    # y^2 log y at AC order 2 -> eps^6 x^-2 (2 log eps - log x)
    f = FaceFunction(gI, np.zeros(gI.size), np.zeros(gI.size), gI.series({(2, 1): 1.0}))
    out = transfer(f, (Fraction(2), 0), gII, 8)
    assert sorted(out) == [(6, 0), (6, 1)]
    x = gII.u
    np.testing.assert_allclose(out[(6, 1)].vals.astype(float), (2 * x**-2.0).astype(float), rtol=1e-15)
    np.testing.assert_allclose(out[(6, 0)].vals.astype(float), (-(x**-2.0) * np.log(x)).astype(float), rtol=1e-15)
    # beyond the cap nothing moves
    assert transfer(f, (Fraction(2), 0), gII, 5) == {}
    # compact head x^1 -> eps^2 xt on the AC face
    g = FaceFunction.monomial(gII, 1)
    out = transfer(g, (Fraction(0), 0), gI, 4)
    np.testing.assert_allclose(out[(2, 0)].vals.astype(float), gI.u.astype(float), rtol=1e-15)
    with pytest.raises(FaceError):
        transfer(g, (Fraction(0), 0), gII, 4)


@pytest.mark.parametrize("a,k", [(Fraction(1, 2), 0), (Fraction(2), 2), (Fraction(-1), 1), (Fraction(-3), 3)])
def test_power_log_antiderivative(a, k):
    terms = power_log_antiderivative(a, k)
    u = 2.7

    def F(v):
        return sum(float(c) * v ** float(e) * math.log(v) ** m for (e, m), c in terms.items())

    h = 1e-5
    deriv = (F(u + h) - F(u - h)) / (2 * h)
    assert deriv == pytest.approx(u ** float(a) * math.log(u) ** k, rel=1e-8)


def test_head_and_tail_integration(grids):
    gI, gII = grids
    s = gII.series({(0, 0): 1.0, (Fraction(1, 2), 1): 2.0})
    H = integrate_head(s)
    assert H[(1, 0)] == 1.0
    # int_0^x 2 t^(1/2) log t dt = (4/3) x^(3/2) log x - (8/9) x^(3/2)
    assert H[(Fraction(3, 2), 1)] == pytest.approx(4 / 3)
    assert H[(Fraction(3, 2), 0)] == pytest.approx(-8 / 9)
    with pytest.raises(FaceError):
        integrate_head(gII.series({(-1, 0): 1.0}))
    # tail: y^2 = u^-2 -> -u^-1 = -y;  y^1 = u^-1 -> log u = -log y
    T = integrate_tail(gI.series({(2, 0): 1.0, (1, 0): 1.0}))
    assert T[(1, 0)] == -1.0
    assert T[(0, 1)] == -1.0


def test_long_double_cumulative_is_sixth_order():
    errs = []
    for pd in (50, 100):
        g = make_grid("II", 1e-6, 1.0, pd, 4)
        x = g.u
        got = cumulative(g, x**3 * x)
        errs.append(float(np.max(np.abs(got - (x**4 - x[0] ** 4) / 4))))
    assert errs[1] < 1e-9
    assert math.log2(errs[0] / errs[1]) == pytest.approx(6, abs=0.3)


def test_lagrange_sampling():
    t = np.linspace(0, 2, 201)
    vals = np.sin(t)
    q = np.array([0.0123, 1.0007, 1.9951])
    got = lagrange_sample(vals, 0.0, t[1] - t[0], q)
    np.testing.assert_allclose(got.astype(float), np.sin(q), atol=1e-15)


def test_sample_uses_far_series_beyond_far_end(grids):
    gI, gII = grids
    f = FaceFunction.constant(gI, 1.0) + FaceFunction.monomial(gI, -2, 0, 3.0)
    idx = np.array([gI.i0 + gI.size - 1, gI.i0 + gI.size + 50])
    v = sample(f, u_index=idx)
    u = np.exp(idx * gI.h)
    np.testing.assert_allclose(v.astype(float), 1 + 3 / u**2, rtol=1e-13)
    with pytest.raises(FaceError):
        sample(f, u_index=np.array([gI.i0 - 1]))
    g = FaceFunction.monomial(gII, 2)
    assert float(sample(g, u_index=np.array([gII.i0 - 100]))[0]) == pytest.approx(math.exp(2 * (gII.i0 - 100) * gII.h))


def test_eps_series_reciprocal_and_truncation(grids):
    _, gII = grids
    a = FaceFunction.monomial(gII, 1)
    S = EpsSeries({(0, 0): FaceFunction.constant(gII, 2.0), (2, 0): a, (2, 1): a * 0.5}, 6)
    R = S.reciprocal()
    P = S * R
    assert sorted(P.keys()) == sorted(P.terms)
    one = P[(0, 0)]
    assert float(np.max(np.abs(one.vals - 1))) < 1e-18
    for key, c in P.items():
        if key != (0, 0):
            assert c.max_abs() < 1e-15 * (1 + a.max_abs()) ** 3
    assert max(d for d, _ in R.terms) <= 6
    with pytest.raises(FaceError):
        EpsSeries({(2, 0): a}, 4).reciprocal()


def test_eps_series_scalar_arithmetic():
    S = EpsSeries({(0, 0): 1.0, (2, 0): 0.5}, 4)
    assert (S * S)[(4, 0)] == 0.25
    assert S.reciprocal()[(4, 0)] == pytest.approx(0.25)
    assert (S - 1.0).pruned(1e-30).lowest() == (2, 0)
    assert float(S.evaluate(0.1)) == pytest.approx(1.005)
