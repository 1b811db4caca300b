import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from grushinlab.control_sets import empty_indicator, full_indicator, indicator, make_equidistributed
from grushinlab.spectral import Grid, InsufficientSpectrumError, discretize, eigensolve
from grushinlab.potential import make_power_potential
from grushinlab.verify import (AuditError, VerificationReport, build_gramian, caccioppoli_audit,
                               calibrate_free_constants, gramian_observability, harmonic_lift_audit,
                               harmonic_lift_quadrature, localization_audit, observation_ratio,
                               spectral_ratio, synthesize_control, weighted_norm_audit, write_jsonl)


@pytest.fixture(scope="module")
def mask02(osc_coarse):
    return indicator(make_equidistributed(0.2, (-10, 10)), osc_coarse.grid)


def test_report_pass_flags():
    up = VerificationReport("q", 1.0, 2.0)
    assert up.passed and up.margin == 1.0
    low = VerificationReport("q", 1.0, 2.0, kind="lower")
    assert not low.passed
    tol = VerificationReport("q", 2.1, 2.0, tolerance=0.1)
    assert tol.passed
    assert not VerificationReport("q", math.nan, 2.0).passed


def test_write_jsonl(tmp_path):
    path = tmp_path / "r.jsonl"
    write_jsonl([VerificationReport("a", 1.0, 2.0), VerificationReport("b", math.inf, 2.0)], path,
                header={"tool": "x"})
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert lines[0]["header"] == {"tool": "x"}
    assert [x["pass"] for x in lines[1:]] == [True, False]


def test_spectral_ratio_full_and_empty(osc_coarse):
    g = osc_coarse.grid
    assert spectral_ratio(osc_coarse, 10.0, full_indicator(g))["ratio"] == pytest.approx(1.0)
    assert spectral_ratio(osc_coarse, 10.0, empty_indicator(g))["ratio"] == math.inf


def test_spectral_ratio_grows_with_energy(osc_coarse, mask02):
    r = [spectral_ratio(osc_coarse, lam, mask02)["ratio"] for lam in (2.0, 10.0, 30.0)]
    assert 1 < r[0] <= r[1] <= r[2]


def test_window_errors(osc_coarse, mask02):
    with pytest.raises(InsufficientSpectrumError):
        spectral_ratio(osc_coarse, 1e4, mask02)
    with pytest.raises(AuditError, match="empty"):
        spectral_ratio(osc_coarse, 0.5, mask02)


def test_localization_audit_ground_state(osc_fine):
    out = localization_audit(osc_fine, 1.5, 1.0, 2.0, mass_fraction=0.5)
    # half the Gaussian mass lies within the quartile radius erf^-1(1/2)
    assert out["rho_min"] == pytest.approx(0.4769, abs=2 * out["h"])
    assert out["C_hat_min"] == pytest.approx(out["rho_min"] / out["factor"])


def test_localization_monotone_in_fraction(osc_coarse):
    a = localization_audit(osc_coarse, 10.0, 1.0, 2.0, 0.25)["rho_min"]
    b = localization_audit(osc_coarse, 10.0, 1.0, 2.0, 0.75)["rho_min"]
    assert a <= b


def test_weighted_norm_matches_ground_state_oracle(osc_fine):
    out = weighted_norm_audit(osc_fine, 1.5, 1.0, 2.0)
    exact = math.exp(0.25) * (1 + erf(0.5))
    assert out["rows"][0]["weighted"] == pytest.approx(exact, rel=1e-5)
    assert out["all_within_explicit_bound"]


def test_weighted_norm_needs_wide_box(oscillator):
    S = eigensolve(discretize(oscillator, Grid(1, 4.0, 300)), count=10)
    with pytest.raises(AuditError, match="increase L"):
        weighted_norm_audit(S, 15.0, 1.0, 2.0)


@pytest.mark.parametrize("k", [0, 3, 7])
def test_caccioppoli(osc_coarse, k):
    out = caccioppoli_audit(osc_coarse, k, 1.0)
    assert out["holds"] and isinstance(out["holds"], bool)
    assert out["bound"] == 9.0


def test_caccioppoli_rejects_ball_outside_box(osc_coarse):
    with pytest.raises(AuditError):
        caccioppoli_audit(osc_coarse, 0, 6.0)


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 10**6), rho=st.sampled_from([0.5, 1.0]))
def test_harmonic_lift_closed_form_matches_quadrature(osc_coarse, seed, rho):
    n = osc_coarse.window(10.0).size
    a = np.random.default_rng(seed).standard_normal(n)
    closed = harmonic_lift_audit(osc_coarse, a, rho, 10.0)
    quad = harmonic_lift_quadrature(osc_coarse, a, rho, 10.0)
    assert closed["H1_norm_sq"] == pytest.approx(quad, rel=1e-8)
    assert closed["holds"]


def test_harmonic_lift_size_check(osc_coarse):
    with pytest.raises(ValueError):
        harmonic_lift_audit(osc_coarse, np.ones(2), 1.0, 10.0)


def test_full_mask_gramian(osc_coarse):
    B = build_gramian(osc_coarse, full_indicator(osc_coarse.grid), 1.0, 1.0)
    out = gramian_observability(B)
    assert out["C_emp"] <= 1.0
    np.testing.assert_allclose(B.G, np.eye(B.dim), atol=1e-10)


def test_single_mode_full_mask_constant(osc_coarse):
    B = build_gramian(osc_coarse, full_indicator(osc_coarse.grid), 0.05, 1.0, modes=1)
    x = 2 * 0.05 * osc_coarse.values[0]
    assert gramian_observability(B)["C_emp"] == pytest.approx(x / math.expm1(x))


def test_nested_masks_increase_constant(osc_coarse):
    g = osc_coarse.grid
    Cs = []
    for gamma in (0.4, 0.3, 0.2):
        B = build_gramian(osc_coarse, indicator(make_equidistributed(gamma, (-10, 10)), g), 1.0, 1.0,
                          modes=20)
        Cs.append(gramian_observability(B)["C_emp"])
    assert Cs[0] < Cs[1] < Cs[2]


def test_worst_state_attains_constant(osc_coarse, mask02):
    B = build_gramian(osc_coarse, mask02, 1.0, 1.0, modes=15)
    out = gramian_observability(B)
    assert B.T * observation_ratio(B, out["worst_initial_state"]) == pytest.approx(out["C_emp"], rel=1e-8)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_constant_dominates_random_states(osc_coarse, mask02, seed):
    B = build_gramian(osc_coarse, mask02, 1.0, 1.0, modes=15)
    C = gramian_observability(B)["C_emp"]
    f = np.random.default_rng(seed).standard_normal(B.dim)
    assert B.T * observation_ratio(B, f) <= C * (1 + 1e-9)


def test_empty_mask_is_unobservable(osc_coarse):
    B = build_gramian(osc_coarse, empty_indicator(osc_coarse.grid), 1.0, 1.0, modes=5)
    out = gramian_observability(B)
    assert out["C_emp"] == math.inf and "invisible" in out["reason"]


def test_hum_control(osc_coarse):
    g = osc_coarse.grid
    mask = indicator(make_equidistributed(0.3, (-10, 10)), g)
    B = build_gramian(osc_coarse, mask, 1.0, 1.0, truncate=False, modes=30)
    C = gramian_observability(B)["C_emp"]
    u0 = osc_coarse.vectors[:, 0] + osc_coarse.vectors[:, 1]
    res = synthesize_control(B, u0, eps=1e-12)
    assert res["terminal_norm"] < 1e-6 * res["initial_norm"]
    assert res["cost"] <= C * res["initial_norm"] ** 2 / B.T
    # the control is supported on the set
    assert np.all(res["control"][:, ~mask.mask] == 0)


def test_calibration(osc_coarse, mask02):
    out = calibrate_free_constants(osc_coarse, 1.0, 2.0, [2.0, 10.0, 20.0], {0.2: mask02})
    assert 0 < out["C_hat_fit"] < 10
    assert 0 < out["kappa_n_fit"] <= 1
    assert out["free_constants"].C_hat == out["C_hat_fit"]


def test_two_dimensional_gramian():
    V = make_power_potential(1.0, 2.0, 2)
    g = Grid(2, 5.0, 40)
    S = eigensolve(discretize(V, g), count=10)
    B = build_gramian(S, full_indicator(g), 0.5, 1.0)
    assert gramian_observability(B)["C_emp"] <= 1.0
