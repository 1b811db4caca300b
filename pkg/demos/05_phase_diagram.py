"""Which fractional powers are covered for V = |x|^beta?

Below beta = 1 the potential is handled through a split with a cutoff, which
costs a larger threshold. The two branches meet at (1, 3/4).

Run: python3 demos/05_phase_diagram.py
"""

from grushinlab.cli import phase_rows
from grushinlab.constants import AssumptionParams, build_report

rows = phase_rows(0.25, 4.0, 16)
width = 50
print(f"{'beta':>6} {'s*':>6}  controllable above the bar")
for r in rows:
    bar = int(round(r["s_boundary"] / 1.5 * width))
    print(f"{r['beta']:>6.3f} {r['s_boundary']:>6.3f}  {'.' * bar}|{'#' * (width - bar)}")

print("\nUniform bounds for V = x^2 (s* = 1) as s crosses the threshold, T = 1:")
p = AssumptionParams("A1", 1.0, 1.0, 2.0, 2.0, 0.0, 0.2, 1)
for s in (0.9, 1.0, 1.1, 1.5, 2.0):
    rep = build_report(p, s=s)
    logs = rep.extras["log_bounds"]
    b = "-" if logs["B_minus"] is None else f"{logs['B_minus']:.4g}"
    print(f"  s = {s:3.1f}  finite sup: {str(rep.sup_is_finite):5}  log B_minus: {b:>10}  {rep.sup_reason}")
