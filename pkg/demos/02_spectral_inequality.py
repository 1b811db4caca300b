"""Spectral inequality on periodic balls: how much of a low-energy state can hide from the set?

For each energy cutoff we compute the worst ratio ||phi|| / ||phi||_omega over
all combinations of eigenfunctions below the cutoff. The log of that ratio
should grow like a power of the energy; for the oscillator the fitted power
sits near one half.

Run: python3 demos/02_spectral_inequality.py
"""

import numpy as np

from grushinlab import Grid, discretize, eigensolve, indicator, make_equidistributed, make_power_potential
from grushinlab.verify import localization_audit, spectral_ratio

S = eigensolve(discretize(make_power_potential(1.0, 2.0), Grid(1, 10.0, 2000)), cutoff=45.0)
lams = np.geomspace(5.0, 40.0, 8)

print(f"{'gamma':>6} " + " ".join(f"{lam:>7.1f}" for lam in lams) + "   slope")
for gamma in (0.1, 0.2, 0.3, 0.4):
    mask = indicator(make_equidistributed(gamma, (-10, 10)), S.grid)
    ratios = np.array([spectral_ratio(S, lam, mask)["ratio"] for lam in lams])
    slope = np.polyfit(np.log(lams), np.log(np.log(ratios)), 1)[0]
    print(f"{gamma:>6.2f} " + " ".join(f"{r:>7.3f}" for r in ratios) + f"   {slope:.3f}")

print("\nWhere does the mass live? Radius holding half the mass of every state below lambda:")
print(f"{'lambda':>7} {'rho':>7} {'rho/sqrt(lambda)':>17}")
for lam in (1.0, 5.0, 11.0, 21.0, 29.0):
    rho = localization_audit(S, lam, 1.0, 2.0, mass_fraction=0.5)["rho_min"]
    print(f"{lam:>7.1f} {rho:>7.3f} {rho / np.sqrt(lam):>17.3f}")
print("\nThe last column is nearly flat: states below lambda live inside the classical turning point.")
