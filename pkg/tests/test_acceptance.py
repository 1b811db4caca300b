"""Acceptance criteria, one test each; every test prints a single PASS/FAIL line."""

import csv
import io
import math
import time

import numpy as np
import pytest

from exponent_cases import CASES
from grushinlab.cli import main
from grushinlab.constants import AssumptionParams, bbl_lower_bound, exponent_table
from grushinlab.control_sets import full_indicator, indicator, make_equidistributed, mask_from_array
from grushinlab.grushin import GrushinState, build_modes, direct_oracle, evolve, grushin_observability
from grushinlab.potential import make_power_potential
from grushinlab.spectral import Grid, discretize, eigensolve
from grushinlab.verify import (build_gramian, caccioppoli_audit, gramian_observability, harmonic_lift_audit,
                               harmonic_lift_quadrature, localization_audit, spectral_ratio,
                               synthesize_control, weighted_norm_audit)


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def osc():
    return eigensolve(discretize(make_power_potential(1.0, 2.0), Grid(1, 10.0, 2000)), cutoff=45.0)


def test_criterion_01_first_eigenvalue_bound(verdict):
    t0 = time.perf_counter()
    mu = [bbl_lower_bound(1.0, 2.0, n)["mu_star"] for n in (1, 2, 3)]
    bound_err = max(abs(m - n) for m, n in zip(mu, (1, 2, 3)))
    setups = {1: (10.0, 2000), 2: (10.0, 2000), 3: (5.0, 170)}
    fd = {}
    for n, (L, N) in setups.items():
        op = discretize(make_power_potential(1.0, 2.0, n), Grid(n, L, N))
        fd[n] = float(eigensolve(op, count=1, vectors=False).values[0])
    fd_err = max(abs(fd[n] - n) for n in fd)
    one = bbl_lower_bound(1.0, 2.0, 1)["mu_star"]
    homog = max(abs(bbl_lower_bound(c, 2.0, 1)["mu_star"] - c ** 0.5 * one) for c in (0.1, 1.0, 10.0, 100.0))
    elapsed = time.perf_counter() - t0
    ok = bound_err <= 1e-6 and fd_err <= 1e-3 and homog <= 1e-10 and elapsed < 30
    verdict(1, "BBL tightness", ok,
            f"bound err {bound_err:.1e}, FD lambda0 err {fd_err:.1e}, homogeneity {homog:.1e}, {elapsed:.1f}s")


def test_criterion_02_spectrum_oracle(verdict):
    t0 = time.perf_counter()
    V = make_power_potential(1.0, 2.0)
    exact = np.arange(6) * 2.0 + 1.0
    errs = []
    # N + 1 doubles so that h halves exactly
    for N in (249, 499, 999, 1999):
        errs.append(float(np.abs(eigensolve(discretize(V, Grid(1, 10.0, N)), count=6).values - exact).max()))
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(3)]
    fine = eigensolve(discretize(V, Grid(1, 10.0, 2000)), count=6).values
    err = float(np.abs(fine - exact).max())
    elapsed = time.perf_counter() - t0
    ok = err <= 1e-3 and all(1.7 <= p <= 2.3 for p in orders) and elapsed < 60
    verdict(2, "spectrum oracle", ok,
            f"max err {err:.1e}, orders {', '.join(f'{p:.3f}' for p in orders)}, {elapsed:.1f}s")


def test_criterion_03_localization(verdict, osc):
    t0 = time.perf_counter()
    lams = [float(v) for v in osc.values if v <= 30.0]
    rows = [localization_audit(osc, lam, 1.0, 2.0, mass_fraction=0.5) for lam in lams]
    C_hat = max(r["C_hat_min"] for lam, r in zip(lams, rows) if lam <= 20.0)
    scaled = [r["rho_min"] / math.sqrt(lam) for lam, r in zip(lams, rows)]
    spread = max(scaled) / min(scaled)
    elapsed = time.perf_counter() - t0
    ok = C_hat <= 10 and spread <= 3 and elapsed < 120
    verdict(3, "localization", ok, f"C_hat {C_hat:.3f}, rho/sqrt(lam) spread {spread:.3f}, {elapsed:.1f}s")


def test_criterion_04_weighted_bound(verdict, osc):
    t0 = time.perf_counter()
    out = weighted_norm_audit(osc, 20.0, 1.0, 2.0)
    worst = max(r["weighted"] / r["bound"] for r in out["rows"])
    elapsed = time.perf_counter() - t0
    ok = out["all_within_explicit_bound"] and len(out["rows"]) == 10 and elapsed < 60
    verdict(4, "explicit weighted bound", ok,
            f"{len(out['rows'])} eigenfunctions, worst ratio to 7e^(R^(1/beta)+1) {worst:.2e}, {elapsed:.1f}s")


def test_criterion_05_caccioppoli(verdict, osc):
    t0 = time.perf_counter()
    worst = 0.0
    for rho in (0.5, 1.0, 2.0):
        for k in range(10):
            out = caccioppoli_audit(osc, k, rho)
            worst = max(worst, out["constant_min"] / out["bound"])
    elapsed = time.perf_counter() - t0
    ok = worst <= 1 and elapsed < 60
    verdict(5, "Caccioppoli", ok, f"worst (lhs/rhs)/(1+8/rho^2) {worst:.3f}, {elapsed:.1f}s")


def test_criterion_06_harmonic_lift(verdict, osc):
    t0 = time.perf_counter()
    rng = np.random.default_rng(6)
    n = osc.window(10.0).size
    holds, dev = True, 0.0
    for rho in (0.5, 1.0):
        for _ in range(50):
            a = rng.standard_normal(n)
            out = harmonic_lift_audit(osc, a, rho, 10.0)
            holds &= out["holds"]
        for _ in range(3):
            a = rng.standard_normal(n)
            closed = harmonic_lift_audit(osc, a, rho, 10.0)["H1_norm_sq"]
            dev = max(dev, abs(closed - harmonic_lift_quadrature(osc, a, rho, 10.0)) / closed)
    elapsed = time.perf_counter() - t0
    ok = holds and dev <= 1e-6 and elapsed < 60
    verdict(6, "harmonic lift", ok, f"two-sided bound {'holds' if holds else 'violated'}, "
                                    f"closed form vs quadrature {dev:.1e}, {elapsed:.1f}s")


def test_criterion_07_observability_sanity(verdict, osc):
    t0 = time.perf_counter()
    g = osc.grid
    full = build_gramian(osc, full_indicator(g), 1.0, 1.0, modes=30)
    C_full = gramian_observability(full)["C_emp"]
    # one mode with lambda^s T = 0.05
    T = 0.05 / osc.values[0]
    C_one = gramian_observability(build_gramian(osc, full_indicator(g), T, 1.0, modes=1))["C_emp"]
    masks = [indicator(make_equidistributed(gm, (-10, 10)), g) for gm in (0.45, 0.3, 0.15)]
    nested = masks[2].nested_in(masks[1]) and masks[1].nested_in(masks[0])
    Cs = [gramian_observability(build_gramian(osc, m, 1.0, 1.0, modes=30))["C_emp"] for m in masks]
    elapsed = time.perf_counter() - t0
    ok = C_full <= 1 and C_one >= 0.9 and nested and Cs[0] < Cs[1] < Cs[2] and elapsed < 60
    verdict(7, "observability sanity", ok,
            f"full {C_full:.3f}, single mode {C_one:.4f}, nested {', '.join(f'{c:.3f}' for c in Cs)}, "
            f"{elapsed:.1f}s")


def test_criterion_08_spectral_inequality_trend(verdict, osc):
    t0 = time.perf_counter()
    mask = indicator(make_equidistributed(0.2, (-10, 10)), osc.grid)
    lams = np.geomspace(5.0, 40.0, 8)
    ratios = np.array([spectral_ratio(osc, lam, mask)["ratio"] for lam in lams])
    slope = float(np.polyfit(np.log(lams), np.log(np.log(ratios)), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = 0.3 <= slope <= 0.7 and elapsed < 180
    verdict(8, "spectral-inequality trend", ok, f"slope {slope:.3f}, {elapsed:.1f}s")


def test_criterion_09_grushin_oracle(verdict):
    t0 = time.perf_counter()
    V = make_power_potential(1.0, 2.0)
    g, Ny, M = Grid(1, 6.0, 61), 16, 7
    rng = np.random.default_rng(9)
    y = 2 * np.pi * np.arange(Ny) / Ny
    u0 = np.zeros((g.N, Ny))
    for k in range(M + 1):
        a, b = rng.standard_normal(2)
        u0 += np.exp(-(g.axis[:, None] - rng.uniform(-1, 1)) ** 2) * (a * np.cos(k * y) + b * np.sin(k * y))
    worst = 0.0
    for s in (1.0, 1.5):
        fam = build_modes(V, g, max_mode=M, s=s)
        state = GrushinState.from_physical(u0, g, fam.modes)
        for t in (0.05, 0.2):
            by_modes = evolve(fam, state, t).to_physical(Ny).real
            direct = direct_oracle(V, g, Ny, t, s, u0)
            worst = max(worst, float(np.linalg.norm(by_modes - direct) / np.linalg.norm(direct)))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-8 and elapsed < 120
    verdict(9, "Grushin oracle equivalence", ok, f"max relative deviation {worst:.1e}, {elapsed:.1f}s")


def test_criterion_10_uniform_in_mode(verdict):
    t0 = time.perf_counter()
    V = make_power_potential(1.0, 2.0)
    g = Grid(1, 10.0, 1000)
    fam = build_modes(V, g, max_mode=6, s=1.5, count=40)
    mask = indicator(make_equidistributed(0.2, (-10, 10)), g)
    params = AssumptionParams("A1", 1.0, 1.0, 2.0, 2.0, 0.0, 0.2, 1)
    C = grushin_observability(fam, mask, 0.5, params=params).per_mode()
    by_abs = [C[(k,)] for k in range(7)]
    spread = max(C.values()) / min(v for k, v in C.items() if k != (0,))
    decay = all(by_abs[k + 1] <= by_abs[k] for k in range(3, 6))
    elapsed = time.perf_counter() - t0
    ok = spread <= 10 and decay and elapsed < 300
    verdict(10, "uniform-in-mode observability", ok,
            f"max/min C_emp {spread:.3g} (limit 10), nonincreasing for |k|>=3: {decay}, "
            f"C_emp(|k|=0..6) {', '.join(f'{c:.2g}' for c in by_abs)}, {elapsed:.1f}s")


def test_criterion_11_hum_control(verdict, osc_coarse):
    t0 = time.perf_counter()
    S = osc_coarse
    mask = indicator(make_equidistributed(0.3, (-10, 10)), S.grid)
    B = build_gramian(S, mask, 1.0, 1.0, truncate=False, modes=30)
    C = gramian_observability(B)["C_emp"]
    u0 = S.vectors[:, 0] + S.vectors[:, 1]
    res = synthesize_control(B, u0, eps=1e-12)
    prediction = C / B.T * res["initial_norm"] ** 2
    elapsed = time.perf_counter() - t0
    ok = res["terminal_norm"] < 1e-6 * res["initial_norm"] and res["cost"] <= 1.05 * prediction and elapsed < 60
    verdict(11, "HUM control", ok, f"terminal/initial {res['terminal_norm'] / res['initial_norm']:.1e}, "
                                   f"cost {res['cost']:.4f} vs duality {prediction:.4f}, {elapsed:.1f}s")


def test_criterion_12_phase_diagram_and_tables(verdict, capsys):
    t0 = time.perf_counter()
    assert main(["phase-diagram", "--beta-min", "0.25", "--beta-max", "3", "--resolution", "12"]) == 0
    text = capsys.readouterr().out
    rows = list(csv.DictReader(io.StringIO("\n".join(x for x in text.splitlines() if not x.startswith("#")))))
    boundary_ok = True
    for r in rows:
        b, s = float(r["beta"]), float(r["s_boundary"])
        expected = (b + 2) / 3 if b < 1 else (b + 2) / 4
        boundary_ok &= s == expected
    bp = [r for r in rows if float(r["beta"]) == 1.0]
    breakpoint_ok = len(bp) == 1 and float(bp[0]["s_boundary"]) == 0.75
    mismatches = 0
    for a, b1, b2, sg, branch, degen, *vals in CASES:
        t = exponent_table(AssumptionParams(a, 1.0, 1.0, float(b1), float(b2), float(sg), 0.2, 1), 0.01)
        got = (t.zeta, t.a_minus, t.b_minus, t.a_plus, t.b_plus)
        if t.branch.value != branch or t.degenerate != degen or \
                not np.allclose(got, [float(v) for v in vals], rtol=0, atol=1e-14):
            mismatches += 1
    elapsed = time.perf_counter() - t0
    ok = boundary_ok and breakpoint_ok and mismatches == 0 and len(CASES) == 12 and elapsed < 1
    verdict(12, "phase diagram and exponent tables", ok,
            f"{len(rows)} boundary rows exact: {boundary_ok}, breakpoint (1, 0.75): {breakpoint_ok}, "
            f"table mismatches {mismatches}/{len(CASES)}, {elapsed:.2f}s")
