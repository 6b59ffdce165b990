import json
import math
from fractions import Fraction

import numpy as np
import pytest

from phgcy.metrics import eguchi_hanson_potential
from phgcy.surgery import (
    GluingPositivityError,
    SurgeryConfig,
    SurgeryError,
    boundary_defining_functions,
    cutoff,
    cutoff_derivatives,
    glue_potential,
    gluing_sweep,
    pushforward_volume_check,
    ricci_potential,
    volume_index_prediction,
    volumes,
    write_fit_json,
    write_sweep_csv,
)


def test_bdf_examples():
    assert boundary_defining_functions(2.0, 0.0) == (2.0, 0.0)
    assert boundary_defining_functions(0.0, 0.1) == pytest.approx((0.1, 1.0))
    assert boundary_defining_functions(0.3, 0.3)[1] == pytest.approx(1 / math.sqrt(2), rel=1e-15)


def test_bdf_product_is_eps():
    rng = np.random.default_rng(0)
    r = rng.uniform(0, 3, 500)
    eps = rng.uniform(1e-6, 1, 500)
    rho1, rho2 = boundary_defining_functions(r, eps)
    assert np.max(np.abs(rho1 * rho2 - eps) / eps) < 4e-16


@pytest.mark.parametrize("r, eps", [(0.0, 0.0), (-1.0, 0.1)])
def test_bdf_rejects(r, eps):
    with pytest.raises(SurgeryError):
        boundary_defining_functions(r, eps)


def test_cutoff_values():
    assert cutoff(1.0, 1.0, 3.0) == 0.0
    assert cutoff(3.0, 1.0, 3.0) == 1.0
    assert cutoff(-5.0, 1.0, 3.0) == 0.0 and cutoff(9.0, 1.0, 3.0) == 1.0
    s = np.linspace(0.01, 0.99, 99)
    assert np.allclose(cutoff(s, 0, 1) + cutoff(1 - s, 0, 1), 1.0, atol=1e-15)
    _, d1, _ = cutoff_derivatives(0.5, 0, 1)
    assert 0 < float(d1) < np.inf
    # e^{-1/s} vs e^{-1/(1-s)} at s = 1/2: slope 2
    assert float(d1) == pytest.approx(2.0)


def test_cutoff_derivatives_match_differences():
    t = np.linspace(0.55, 1.95, 29)
    h = 1e-5
    chi, d1, d2 = cutoff_derivatives(t, 0.5, 2.0)
    fd1 = (cutoff(t + h, 0.5, 2.0) - cutoff(t - h, 0.5, 2.0)) / (2 * h)
    fd2 = (cutoff(t + h, 0.5, 2.0) - 2 * chi + cutoff(t - h, 0.5, 2.0)) / h**2
    assert np.allclose(d1, fd1, atol=1e-8)
    assert np.allclose(d2, fd2, atol=1e-4)
    # flat at both ends
    _, e1, e2 = cutoff_derivatives(np.array([0.5 + 1e-3, 2 - 1e-3]), 0.5, 2.0)
    assert np.all(np.abs(e1) < 1e-100) and np.all(np.abs(e2) < 1e-100)


def test_cutoff_rejects_bad_interval():
    with pytest.raises(SurgeryError):
        cutoff(0.5, 1.0, 1.0)


def test_config_invariants():
    with pytest.raises(SurgeryError):
        SurgeryConfig.for_model("deformed-conifold", neck=(2.0, 0.5))
    with pytest.raises(SurgeryError):
        SurgeryConfig("deformed-conifold", Fraction(0), Fraction(3))
    with pytest.raises(SurgeryError):
        SurgeryConfig.for_model("deformed-conifold", gluing="weld")
    cfg = SurgeryConfig.for_model("deformed-conifold")
    assert (cfg.lam1, cfg.lam2, cfg.m) == (6, 3, 6)
    assert cfg.predicted_gluing_rate == 1.5


def test_flat_self_gluing_is_trivial():
    cfg = SurgeryConfig.for_model("flat", kappa=0.0)
    g = glue_potential(cfg, 1e-2)
    assert np.max(np.abs(g.P - g.r**2 / 2)) < 1e-15
    rp = ricci_potential(g)
    assert rp.max_abs < 1e-14
    assert all(f.exact for f in rp.fits)


def test_restrictions_to_the_two_models():
    cfg = SurgeryConfig.for_model("eguchi-hanson")
    far, near = [], []
    for eps in (1e-2, 1e-3, 1e-4):
        g = glue_potential(cfg, eps)
        P_I, P_II = g.model_potentials()
        r = g.r
        i = np.argmin(np.abs(r - 0.5))
        far.append(abs(g.P[i] - P_II[i]))
        # AC restriction: eps^-2 P(eps r~) against the closed form at r~ = 2
        j = np.argmin(np.abs(r - 2 * eps))
        x_t = (r[j] / eps) ** 2
        near.append(abs(g.P[j] / eps**2 - (eguchi_hanson_potential(x_t) + (g.P[j] / eps**2 - P_I[j] / eps**2))))
    assert far == [0.0, 0.0, 0.0]  # outside the neck the potential is the compact model
    assert max(near) < 1e-12


def test_positivity_failure_reports_radius():
    # a steep cutoff at large eps overwhelms the metric inside the neck
    cfg = SurgeryConfig.for_model("eguchi-hanson", neck=(0.9, 1.1))
    with pytest.raises(GluingPositivityError) as exc:
        glue_potential(cfg, 0.1)
    assert 0.9 * math.sqrt(0.1) <= exc.value.radius <= 1.1 * math.sqrt(0.1)


def test_ricci_potential_normalisation_and_face_rates():
    cfg = SurgeryConfig.for_model("deformed-conifold")
    g = glue_potential(cfg, 1e-3)
    rp = ricci_potential(g)
    assert rp.normalization_error < 1e-10
    vol_D, vol_T = volumes(g)
    assert abs(float(np.exp(rp.c) * vol_T / vol_D) - 1) < 1e-14
    by_face = {f.face: f for f in rp.fits}
    assert by_face["B_I"].exponent == pytest.approx(3.0, rel=0.1)
    assert by_face["B_II"].exponent == pytest.approx(6.0, rel=0.1)
    assert min(f.r2_of_fit for f in rp.fits) > 0.99


def test_sweep_rates_and_single_point():
    cfg = SurgeryConfig.for_model("deformed-conifold")
    sw = gluing_sweep(cfg, np.logspace(-3.5, -2, 4))
    assert sw.fits["restriction_II"].exponent == pytest.approx(1.5, rel=0.1)
    assert sw.fits["max_v"].exponent > 0
    one = gluing_sweep(cfg, [1e-3])
    assert one.fits == {}


def test_volume_exponents():
    eh = pushforward_volume_check(SurgeryConfig.for_model("eguchi-hanson"), np.logspace(-2.5, -1.5, 6))
    assert eh.predicted == (4, 0)
    assert abs(eh.exponent - 4) < 0.1
    assert eh.coefficients[(4, 0)] == pytest.approx(-0.25, rel=1e-6)  # tip flux a^4/4
    flat = pushforward_volume_check(SurgeryConfig.for_model("flat", kappa=0.0), np.logspace(-2, -1, 6))
    assert flat.exponent == math.inf
    res = pushforward_volume_check(SurgeryConfig.for_model("resolved-conifold"), np.logspace(-3, -2, 6))
    # the resolution parameter moves the Kaehler class, which dominates the ρ1^6 term
    assert res.predicted == (2, 0) and abs(res.exponent - 2) < 0.1
    with pytest.raises(SurgeryError):
        pushforward_volume_check(SurgeryConfig.for_model("eguchi-hanson"), np.logspace(-2, -1, 5))


def test_empty_compact_face_contributes_nothing():
    cfg = SurgeryConfig.for_model("deformed-conifold")
    assert volume_index_prediction(cfg) == (6, 0)


def test_outputs_are_deterministic(tmp_path):
    cfg = SurgeryConfig.for_model("eguchi-hanson")
    fields = [ricci_potential(glue_potential(cfg, e)) for e in (1e-2, 1e-3)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_sweep_csv(a, fields, stride=50)
    write_sweep_csv(b, list(reversed(fields)), stride=50)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "eps,r,P,v"
    j = tmp_path / "fits.json"
    write_fit_json(j, fields[1].fits)
    rows = json.loads(j.read_text())
    assert {"face", "exponent", "log_power", "r2_of_fit"} <= set(rows[0])


def test_glued_profile_derivatives_match_potential():
    from phgcy.metrics import RadialProfile

    cfg = SurgeryConfig.for_model("eguchi-hanson")
    prof = glue_potential(cfg, 1e-2).profile()
    numeric = RadialProfile(prof.t, prof.values)
    inner = slice(10, -10)
    assert np.allclose(numeric.d1[inner], prof.d1[inner], rtol=1e-7)
    assert np.allclose(numeric.d2[inner], prof.d2[inner], rtol=1e-5)
    cfg = SurgeryConfig.for_model("deformed-conifold")
    prof = glue_potential(cfg, 1e-2).profile()
    assert prof.origin == pytest.approx(1e-2)
