"""Hand-substituted exponent tables.

Each entry is ``(assumption, beta1, beta2, sigma, branch, degenerate, zeta, a_minus, b_minus, a_plus, b_plus)``
with every value worked out by hand from the piecewise formulas.
"""

from fractions import Fraction as F

CASES = [
    # A1, (beta1 - beta2) sigma = 0
    ("A1", 2, 2, 0, "A1_case", True, F(1, 2), F(0), F(0), F(1, 2), F(0)),
    ("A1", 2, 3, 0, "A1_case", True, F(3, 4), F(-1, 4), F(-1, 4), F(1, 2), F(-1, 8)),
    ("A1", 2, 2, 1, "A1_case", True, F(1), F(-1, 2), F(-1, 2), F(1, 2), F(-1, 2)),
    ("A1", 1, 1, 0, "A1_case", True, F(1, 2), F(0), F(0), F(1, 2), F(0)),
    # A1, (beta1 - beta2) sigma != 0
    ("A1", 1, 2, 1, "A1_case", False, F(2), F(-3, 2), F(-3, 2), F(1, 2), F(-1)),
    ("A1", 2, 4, F(1, 2), "A1_case", False, F(5, 4), F(-3, 4), F(-3, 4), F(1, 2), F(-1, 4)),
    # A2, beta_star <= 0
    ("A2", 2, 2, 0, "A2_beta_star_nonpos", True, F(1, 2), F(1, 6), F(0), F(2, 3), F(-1, 12)),
    ("A2", 1, 2, 0, "A2_beta_star_nonpos", True, F(1), F(-1, 3), F(-1, 3), F(2, 3), F(-1)),
    ("A2", 2, 2, 1, "A2_beta_star_nonpos", False, F(1), F(-1, 3), F(-3, 4), F(2, 3), F(-7, 12)),
    ("A2", 1, 1, F(1, 2), "A2_beta_star_nonpos", False, F(1), F(-1, 3), F(-5, 6), F(2, 3), F(-2, 3)),
    # A2, beta_star > 0
    ("A2", 1, 3, 0, "A2_beta_star_pos", True, F(3, 2), F(-5, 6), F(-7, 6), F(2, 3), F(-2, 3)),
    ("A2", 1, 3, F(1, 2), "A2_beta_star_pos", False, F(2), F(-4, 3), F(-5, 3), F(2, 3), F(-5, 6)),
]
