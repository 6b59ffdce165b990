import math
import random
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from phgcy.log_series import (
    BiSeries, LogSeries, LogSeriesError, ModeVector, b_derivative, compose_analytic,
    evaluate, exp_series, from_epsilon, inv1p_series, log1p_series, pretty,
    reindex_epsilon, series_from_json,
)

CAP = 6


def S(d, cap=CAP):
    return LogSeries(d, cap)


def test_products():
    assert S({(1, 0): 1}) * S({(1, 0): 1}) == S({(2, 0): 1})
    assert S({(0, 1): 1}) * S({(1, 1): 1}) == S({(1, 2): 1})
    p = S({(0, 0): 1, (1, 0): 1}) * S({(0, 0): 1, (1, 0): -1})
    assert p == S({(0, 0): 1, (2, 0): -1})
    for rho in (0.1, 0.01):
        assert evaluate(p, rho) == pytest.approx(1 - rho**2, rel=1e-14)


def test_b_derivative_examples():
    assert b_derivative(S({(Fr(3, 2), 0): 1})) == S({(Fr(3, 2), 0): Fr(3, 2)})
    assert b_derivative(S({(0, 1): 1})) == S({(0, 0): 1})
    assert b_derivative(S({(2, 3): 1})) == S({(2, 3): 2, (2, 2): 3})


def test_mismatch_errors():
    with pytest.raises(LogSeriesError):
        S({(0, 0): 1}) + LogSeries({(0, 0): 1}, 3)
    with pytest.raises(LogSeriesError):
        S({(0, 0): 1}) + LogSeries({(0, 0): 1}, CAP, face="other")
    with pytest.raises(LogSeriesError):
        S({(0, 0): 1, (1, 0): ModeVector({"j0": 1})})
    m = S({(0, 0): ModeVector({"j1": 1})})
    with pytest.raises(LogSeriesError):
        m * m


def test_compose():
    assert exp_series(S({})) == S({(0, 0): 1})
    L = log1p_series(S({(1, 0): 1}))
    assert L == S({(j, 0): Fr((-1) ** (j + 1), j) for j in range(1, CAP + 1)})
    assert abs(evaluate(L, 0.1) - math.log1p(0.1)) < 0.1 ** (CAP + 1)
    with pytest.raises(LogSeriesError):
        compose_analytic([1, 1], S({(0, 0): 1}))
    inv = inv1p_series(S({(1, 0): 1}))
    assert inv * S({(0, 0): 1, (1, 0): 1}) == S({(0, 0): 1})


def test_exp_log_round_trip_random():
    rng = random.Random(3)
    for _ in range(5):
        s = S({(Fr(rng.randint(1, 8), 2), rng.randint(0, 2)): Fr(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(5)})
        assert exp_series(log1p_series(s)) - (1 + s) == S({})


def test_evaluate_examples():
    assert evaluate(S({(0, 0): 1, (1, 0): 1}), 0.5) == 1.5
    assert evaluate(S({(1, 1): 1}), math.exp(-1)) == pytest.approx(-math.exp(-1), rel=1e-15)


def test_pretty_and_json():
    s = S({(1, 1): Fr(1, 2), (0, 0): 3})
    assert pretty(s).splitlines() == ["3 * rho^0 * log(rho)^0", "1/2 * rho^1 * log(rho)^1"]
    assert series_from_json(s.to_json()) == s
    m = S({(0, 0): ModeVector({"j0": Fr(1, 3)})})
    assert series_from_json(m.to_json()) == m
    p = S({(0, 0): np.array([1.0, 2.0])})
    assert series_from_json(p.to_json()) == p


def test_index_contains_support():
    s = S({(Fr(1, 2), 1): 1}) * S({(1, 2): 1})
    assert set(s.terms) <= s.index.terms


def test_reindex_examples():
    t = BiSeries({(0, 0, Fr(3, 2), 0): 1}, (CAP, CAP))
    assert reindex_epsilon(t) == {(Fr(3, 2), 0, Fr(-3, 2), 0): 1}
    t = BiSeries({(0, 0, 1, 1): 1}, (CAP, CAP))
    assert reindex_epsilon(t) == {(1, 1, -1, 0): 1, (1, 0, -1, 1): -1}


def test_reindex_round_trip_random():
    rng = random.Random(11)
    for direction in ("toward-B_I", "toward-B_II"):
        t = BiSeries({(Fr(rng.randint(0, 8), 2), rng.randint(0, 3), Fr(rng.randint(0, 8), 2), rng.randint(0, 3)):
                      Fr(rng.randint(1, 9), rng.randint(1, 5)) for _ in range(10)}, (CAP, CAP))
        back = from_epsilon(reindex_epsilon(t, direction), (CAP, CAP), direction)
        assert back == t
        r1, r2 = 0.3, 0.07
        eps = r1 * r2
        other = r1 if direction == "toward-B_I" else r2
        val = sum(float(c) * eps ** float(d) * math.log(eps) ** j * other ** float(z) * math.log(other) ** k
                  for (d, j, z, k), c in reindex_epsilon(t, direction).items())
        assert val == pytest.approx(t.evaluate(r1, r2), rel=1e-10)


small_series = st.dictionaries(
    st.tuples(st.fractions(min_value=0, max_value=4, max_denominator=3), st.integers(0, 2)),
    st.fractions(min_value=-5, max_value=5, max_denominator=5), max_size=4,
).map(lambda d: LogSeries(d, 4))


@settings(max_examples=60, deadline=None)
@given(small_series, small_series, small_series)
def test_ring_laws_and_leibniz(a, b, c):
    assert a + b == b + a
    assert a * b == b * a
    assert (a * b) * c == a * (b * c)
    assert a * (b + c) == a * b + a * c
    assert b_derivative(a * b) == b_derivative(a) * b + a * b_derivative(b)


def test_evaluation_homomorphism_slope():
    a = LogSeries({(0, 0): 1, (1, 1): 2, (Fr(3, 2), 0): -1}, 4)
    b = LogSeries({(Fr(1, 2), 0): 3, (2, 2): 1, (3, 0): 1}, 4)
    rhos = np.logspace(-2.5, -1, 9)
    rem = [abs(evaluate(a * b, r) - evaluate(a, r) * evaluate(b, r)) for r in rhos]
    slope = np.polyfit(np.log(rhos), np.log(rem), 1)[0]
    assert slope >= 4 - 0.1
