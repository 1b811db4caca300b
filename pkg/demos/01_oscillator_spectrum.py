"""How accurate is the finite-difference oscillator, and how good is the Gaussian-trial lower bound?

Run: python3 demos/01_oscillator_spectrum.py
"""

import math

import numpy as np

from grushinlab import Grid, bbl_lower_bound, discretize, eigensolve, make_power_potential

V = make_power_potential(1.0, 2.0)
exact = 2.0 * np.arange(6) + 1.0

print("Second-order differences on [-10, 10]; the error should drop by 4 when h halves.\n")
print(f"{'N':>6} {'h':>9} {'max error':>11} {'order':>7}")
prev = None
for N in (124, 249, 499, 999, 1999):
    g = Grid(1, 10.0, N)
    err = float(np.abs(eigensolve(discretize(V, g), count=6).values - exact).max())
    order = "" if prev is None else f"{math.log2(prev / err):7.3f}"
    print(f"{N:>6} {g.h:>9.5f} {err:>11.3e} {order}")
    prev = err

print("\nThe lower bound for the first eigenvalue of -Laplace + c|x|^beta.")
print("For beta = 2 and c = 1 it is exact; other exponents leave a gap.\n")
print(f"{'beta':>5} {'n':>2} {'bound':>9} {'FD lambda0':>11}")
for beta in (1.0, 2.0, 4.0):
    for n in (1, 2):
        bound = bbl_lower_bound(1.0, beta, n)["mu_star"]
        N = 1500 if n == 1 else 120
        L = 8.0 if n == 1 else 5.0
        lam0 = eigensolve(discretize(make_power_potential(1.0, beta, n), Grid(n, L, N)), count=1,
                          vectors=False).values[0]
        print(f"{beta:>5.1f} {n:>2d} {bound:>9.5f} {lam0:>11.5f}")
