import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grushinlab.constants import AssumptionParams
from grushinlab.control_sets import full_indicator, indicator, make_equidistributed
from grushinlab.grushin import (GrushinState, build_modes, direct_oracle, evolve, grushin_observability,
                                periodic_second_derivative, scan_scaled_observability)
from grushinlab.potential import make_power_potential
from grushinlab.spectral import Grid


@pytest.fixture(scope="module")
def small():
    V = make_power_potential(1.0, 2.0)
    g = Grid(1, 5.0, 41)
    return V, g, build_modes(V, g, max_mode=3, s=1.0)


def band_limited(g, Ny, M, seed):
    rng = np.random.default_rng(seed)
    y = 2 * np.pi * np.arange(Ny) / Ny
    u = np.zeros((g.N, Ny))
    for k in range(M + 1):
        a, b = rng.standard_normal(2)
        bump = np.exp(-(g.axis - rng.uniform(-1, 1)) ** 2)
        u += bump[:, None] * (a * np.cos(k * y) + b * np.sin(k * y))[None, :]
    return u


@pytest.mark.parametrize("Ny", [8, 12])
def test_periodic_second_derivative_spectrum(Ny):
    D2 = periodic_second_derivative(Ny)
    y = 2 * np.pi * np.arange(Ny) / Ny
    for k in range(Ny // 2):
        np.testing.assert_allclose(D2 @ np.cos(k * y), -k * k * np.cos(k * y), atol=1e-10)
    with pytest.raises(ValueError):
        periodic_second_derivative(7)


def test_mode_spectra_are_even_in_k(small):
    _, _, fam = small
    assert set(fam.spectra) == {0, 1, 4, 9}
    np.testing.assert_array_equal(fam.spectrum((2,)).values, fam.spectrum((-2,)).values)
    lam0 = [fam.spectrum((k,)).values[0] for k in range(4)]
    assert np.all(np.diff(lam0) > 0)


def test_parseval(small):
    _, g, fam = small
    u = band_limited(g, 16, 3, 0)
    st_ = GrushinState.from_physical(u, g, fam.modes)
    assert st_.norm() == pytest.approx(st_.physical_norm(16), rel=1e-12)
    np.testing.assert_allclose(st_.to_physical(16).real, u, atol=1e-12)


def test_alias_guard(small):
    _, g, fam = small
    with pytest.raises(ValueError, match="alias"):
        GrushinState.from_physical(np.zeros((g.N, 6)), g, fam.modes)


@settings(max_examples=8, deadline=None)
@given(t=st.floats(0.0, 0.5), s=st.sampled_from([0.5, 1.0, 1.5]), seed=st.integers(0, 1000))
def test_mode_evolution_matches_oracle(small, t, s, seed):
    V, g, fam0 = small
    fam = build_modes(V, g, max_mode=3, s=s)
    u = band_limited(g, 8, 3, seed)
    by_modes = evolve(fam, GrushinState.from_physical(u, g, fam.modes), t).to_physical(8).real
    direct = direct_oracle(V, g, 8, t, s, u)
    assert np.linalg.norm(by_modes - direct) <= 1e-9 * np.linalg.norm(direct)


def test_evolution_contracts_and_records_time(small):
    _, g, fam = small
    st0 = GrushinState.from_physical(band_limited(g, 8, 3, 1), g, fam.modes)
    st1 = evolve(fam, st0, 0.3)
    assert st1.t == pytest.approx(0.3)
    assert st1.norm() < st0.norm()
    with pytest.raises(ValueError):
        evolve(fam, st0, -1.0)


def test_oracle_cap():
    V = make_power_potential(1.0, 2.0)
    with pytest.raises(ValueError, match="cap"):
        direct_oracle(V, Grid(1, 5.0, 200), 64, 0.1, 1.0, np.zeros((200, 64)))


def test_potential_shift_adds_to_every_mode():
    V = make_power_potential(1.0, 2.0)
    W = make_power_potential(0.5, 2.0)
    g = Grid(1, 6.0, 120)
    a = build_modes(V, g, 2, count=3)
    b = build_modes(V, g, 2, Vt=W, count=3)
    assert b.spectrum((0,)).values[0] == pytest.approx(math.sqrt(0.5), rel=1e-3)
    assert b.spectrum((1,)).values[0] == pytest.approx(math.sqrt(1.5), rel=1e-3)
    assert a.spectrum((0,)).values[0] < 0.1


def test_observability_report_structure():
    V = make_power_potential(1.0, 2.0)
    g = Grid(1, 8.0, 300)
    fam = build_modes(V, g, max_mode=4, s=1.5, count=30)
    mask = indicator(make_equidistributed(0.2, (-8, 8)), g)
    p = AssumptionParams("A1", 1.0, 1.0, 2.0, 2.0, 0.0, 0.2, 1)
    rep = grushin_observability(fam, mask, 0.5, params=p)
    d = rep.per_mode()
    assert set(d) == set(fam.modes)
    row0 = next(r for r in rep.rows if r["k2"] == 0)
    assert "thickness fallback" in row0["flags"] and row0["explicit_bound"] is None
    assert all(r["log_explicit_bound"] is not None for r in rep.rows if r["k2"] > 0)
    assert rep.C_agg == max(r["C_emp"] for r in rep.rows)
    assert d[(3,)] == pytest.approx(d[(-3,)])
    assert 0 < rep.thickness["gamma_est"] <= 1
    assert rep.to_dict()["T"] == 0.5


def test_full_mask_per_mode_constant_at_most_one():
    V = make_power_potential(1.0, 2.0)
    g = Grid(1, 6.0, 120)
    fam = build_modes(V, g, max_mode=2, count=15)
    rep = grushin_observability(fam, full_indicator(g), 1.0)
    assert all(r["C_emp"] <= 1.0 + 1e-12 for r in rep.rows)


def test_scan_decreases_with_scale():
    V = make_power_potential(1.0, 2.0)
    g = Grid(1, 8.0, 300)
    mask = indicator(make_equidistributed(0.2, (-8, 8)), g)
    p = AssumptionParams("A1", 1.0, 1.0, 2.0, 2.0, 0.0, 0.2, 1)
    rows = scan_scaled_observability(V, [1.0, 4.0, 16.0], mask, 1.0, 1.0, count=40, params=p)
    C = [r["C_emp"] for r in rows]
    assert C[0] > C[1] > C[2]
    assert all(r["log_bound"] is not None for r in rows)
    with pytest.raises(ValueError):
        scan_scaled_observability(V, [0.0], mask, 1.0, 1.0)
