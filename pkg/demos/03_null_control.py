"""Steering the oscillator heat flow to rest with a control acting on small balls.

The observation Gramian on 30 modes gives the empirical observability
constant; solving a regularized Gramian system gives the minimal-norm control.

Run: python3 demos/03_null_control.py
"""

import numpy as np

from grushinlab import Grid, discretize, eigensolve, indicator, make_equidistributed, make_power_potential
from grushinlab.verify import build_gramian, gramian_observability, synthesize_control

S = eigensolve(discretize(make_power_potential(1.0, 2.0), Grid(1, 10.0, 400)), count=40)
u0 = S.vectors[:, 0] + S.vectors[:, 1]

print(f"{'gamma':>6} {'T':>5} {'C_emp':>9} {'terminal':>10} {'cost':>9} {'bound':>9}")
for gamma in (0.1, 0.2, 0.3, 0.4):
    mask = indicator(make_equidistributed(gamma, (-10, 10)), S.grid)
    for T in (0.5, 1.0, 2.0):
        B = build_gramian(S, mask, T, 1.0, truncate=False, modes=30)
        C = gramian_observability(B)["C_emp"]
        res = synthesize_control(B, u0, eps=1e-12)
        print(f"{gamma:>6.2f} {T:>5.1f} {C:>9.4f} {res['terminal_norm']:>10.2e} {res['cost']:>9.4f} "
              f"{C / T * res['initial_norm'] ** 2:>9.4f}")

print("\nControl effort over time for gamma = 0.3, T = 1: most of the work happens at the end.")
mask = indicator(make_equidistributed(0.3, (-10, 10)), S.grid)
res = synthesize_control(build_gramian(S, mask, 1.0, 1.0, truncate=False, modes=30), u0, eps=1e-12,
                         n_times=6)
for t, h in zip(res["times"], res["control"]):
    print(f"  t = {t:.1f}   ||h(t)|| = {S.grid.norm(h):.4f}")
