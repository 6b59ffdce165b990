import math

import numpy as np
import pytest

from phgcy.metrics import (
    REGISTRY,
    ChartError,
    MetricError,
    ModelSolution,
    RadialProfile,
    RadialReduction,
    SolverError,
    complex_hessian,
    eguchi_hanson_derivatives,
    eguchi_hanson_potential,
    eguchi_hanson_residual,
    fit_polyhomogeneous,
    get_model,
    log_grid,
    numeric_hessian_det,
    oracle_gate,
    quadric_last_coordinate,
    solve_cohomogeneity_one,
    stenzel_cone_chart,
    stenzel_potential,
    weighted_action,
)


def test_hessian_of_norm_squared_is_identity():
    H = complex_hessian(lambda w: float(np.sum(np.abs(w) ** 2)), [0.4 + 0.1j, -0.2j, 1.0])
    assert np.allclose(H, np.eye(3), atol=1e-10)


def test_hessian_of_quartic():
    # |w|^4 at (1, 0): d d-bar gives 2|w|^2 I + 2 w w^* -> diag(4, 2)
    H = complex_hessian(lambda w: float(np.sum(np.abs(w) ** 2) ** 2), [1.0, 0.0])
    assert np.allclose(H, np.diag([4.0, 2.0]), atol=1e-8)
    assert abs(numeric_hessian_det(lambda w: float(np.sum(np.abs(w) ** 2) ** 2), [1.0, 0.0]) - 8.0) < 1e-7


def test_hessian_rejects_non_finite():
    with pytest.raises(ChartError):
        complex_hessian(lambda w: float("nan"), [1.0])


def test_stenzel_chart_frozen_point():
    r2, zl, dens = stenzel_cone_chart(3, [1.0, 0.0, 0.0])
    assert zl == pytest.approx(1j)
    assert r2 == pytest.approx(2 ** (2 / 3))
    assert dens == pytest.approx(0.25)


def test_quadric_chart_condition():
    with pytest.raises(ChartError):
        quadric_last_coordinate([1.0, 0.0], c=1.0)


def test_stenzel_ratio_constant_and_homogeneous():
    phi = stenzel_potential(3)
    rng = np.random.default_rng(3)
    vals = []
    for _ in range(6):
        w = rng.normal(size=3) + 1j * rng.normal(size=3)
        _, _, dens = stenzel_cone_chart(3, w)
        vals.append(numeric_hessian_det(phi, w, 1e-2 * max(1, np.abs(w).max())) / dens)
    assert np.ptp(vals) / np.mean(vals) < 1e-6
    # the weighted action scales the potential by lam^2
    w = np.array([0.3 + 0.2j, -0.7, 0.1j])
    assert phi(weighted_action(1.7, w, 3)) == pytest.approx(1.7**2 * phi(w), rel=1e-12)


@pytest.mark.parametrize(
    "red",
    [
        RadialReduction("u3", "unitary", 3),
        RadialReduction("q3", "quadric", 3, 0.0),
        RadialReduction("q3c", "quadric", 3, 1.0),
        RadialReduction("res", "resolved", 3, 0.0, 0.3),
    ],
)
def test_oracle_gate_for_a_nonsolution(red):
    # any smooth strictly convex profile: the reduction must agree with the determinant
    Phi = lambda x: x**red.alpha / 2 + 0.1 * math.log(x)
    p = lambda x: red.alpha / 2 * x ** (red.alpha - 1) + 0.1 / x
    q = lambda x: red.alpha * (red.alpha - 1) / 2 * x ** (red.alpha - 2) - 0.1 / x**2
    rep = oracle_gate(red, Phi, p, q, points=20, scale=1.3)
    assert rep["max_rel_err"] < 1e-5


def test_oracle_gate_rejects_wrong_density():
    red = RadialReduction("u2", "unitary", 2)
    with pytest.raises(MetricError):
        oracle_gate(red, lambda x: x * x, lambda x: 1.0, lambda x: 0.0, points=4)


def test_cone_potential_has_unit_density():
    for name in ("flat", "stenzel-cone"):
        red = REGISTRY[name].red
        x = np.logspace(-2, 2, 9)
        assert np.allclose(red.density(x, red.cone_p(x), red.cone_q(x)), 1.0, rtol=1e-13)


def test_eguchi_hanson_closed_form():
    x = np.logspace(-2, 2, 401)
    assert np.abs(eguchi_hanson_residual(x)).max() < 1e-12
    h = 1e-5
    p, _ = eguchi_hanson_derivatives(x)
    fd = (eguchi_hanson_potential(x + h * x) - eguchi_hanson_potential(x - h * x)) / (2 * h * x)
    assert np.allclose(fd, np.asarray(p, float), rtol=1e-8)


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_registry_models_are_ricci_flat(name):
    entry = get_model(name)
    x = np.logspace(-1, 2, 31) + entry.red.x_min
    ratio = np.asarray(entry.solution().density_ratio(x), float)
    assert np.abs(ratio - 1).max() < 1e-10


def test_unknown_model():
    with pytest.raises(MetricError):
        get_model("k3")


def test_solver_matches_closed_form_eguchi_hanson():
    entry = get_model("eguchi-hanson")
    res = solve_cohomogeneity_one(entry.red, log_grid(1e-2, 1e2, 200), entry.G0)
    assert res.residual < 1e-12
    p_exact, _ = eguchi_hanson_derivatives(res.x)
    assert np.abs(res.p / np.asarray(p_exact, float) - 1).max() < 1e-9
    assert res.ode_residual < 1e-8


def test_solver_with_prescribed_volume():
    red = REGISTRY["flat"].red
    res = solve_cohomogeneity_one(red, log_grid(1e-2, 1.0, 200), 0.0, kappa=0.7)
    sol = ModelSolution(red, 0.0, 0.7)
    assert np.abs(res.p / np.asarray(sol.p(res.x), float) - 1).max() < 1e-9


def test_solver_failure_carries_history():
    red = REGISTRY["flat"].red
    with pytest.raises(SolverError) as exc:
        solve_cohomogeneity_one(red, log_grid(1e-2, 1.0, 50), 0.3, max_iter=1, tol=1e-30)
    assert len(exc.value.history) == 2


def test_profile_csv_roundtrip(tmp_path):
    t = log_grid(1e-1, 1e1, 400)
    r = np.exp(t)
    prof = RadialProfile(t, r**3)
    assert np.allclose(prof.d1, 3 * r**2, rtol=1e-6)
    assert np.allclose(prof.d2, 6 * r, rtol=1e-5)
    path = tmp_path / "p.csv"
    prof.to_csv(path)
    assert path.read_text().splitlines()[0] == "t,value,d1,d2"
    back = RadialProfile.from_csv(path)
    assert np.array_equal(back.values, prof.values)


def test_profile_rejects_nonuniform_grid():
    with pytest.raises(MetricError):
        RadialProfile(np.array([0, 1, 2, 3, 4, 6.0]), np.ones(6))


def test_fit_recovers_log_term():
    r = np.logspace(-3, -1, 80)
    y = 2.0 + 0.5 * r**2 * np.log(r) - 3 * r**2 + 7 * r**4
    series, rep = fit_polyhomogeneous(r, y, [(0, 0), (2, 1), (2, 0), (4, 0)])
    coeffs = dict(series.terms)
    assert coeffs[(0, 0)] == pytest.approx(2.0, abs=1e-10)
    assert coeffs[(2, 1)] == pytest.approx(0.5, rel=1e-6)
    assert rep.at_noise_floor and rep.residual_slope == math.inf


def test_fit_residual_slope_is_next_order():
    r = np.logspace(-3, -1, 80)
    y = 1.0 + r**2 + r**5
    _, rep = fit_polyhomogeneous(r, y, [(0, 0), (2, 0)])
    assert rep.residual_slope == pytest.approx(5.0, abs=0.1)


def test_fit_at_infinity():
    r = np.logspace(1, 3, 60)
    y = 0.5 * r**2 + 3.0 / r**4
    series, _ = fit_polyhomogeneous(r, y, [(-2, 0), (4, 0)], regime="infinity")
    assert dict(series.terms)[(-2, 0)] == pytest.approx(0.5)


def test_fit_rejects_short_range_and_near_collinear():
    r = np.logspace(-2, -1, 20)
    with pytest.raises(MetricError):
        fit_polyhomogeneous(r, r, [(1, 0)])
    r = np.logspace(-3, -1, 20)
    with pytest.raises(MetricError):
        fit_polyhomogeneous(r, r, [(1, 0), (1 + 1e-13, 0)])
