"""Stepsize monitors: the bounded modulation function and its design criteria.

A monitor g(x) multiplies the timestep: small where the dynamics are stiff,
capped at M elsewhere.  All built-in monitors compose a bounded shaping
function psi with a scalar stiffness indicator:

    psi(u) = sqrt(1 + m^2 w) / (sqrt(1 + m^2 w) / M + sqrt(w)),
    w      = r * u^(2 alpha),

which is smooth, even in u, equals M at u = 0, and decays to the floor
m M / (m + M) as |u| grows.  The numerical audit checks boundedness,
Lipschitz continuity, and consistency of the supplied gradient on a grid.
"""

import numpy as np

from adaptive_langevin import (
    audit_criteria,
    modified_harmonic,
    monitor_g1,
    monitor_g2,
    monitor_g3,
    psi,
)

m, M = 0.001, 2.0
print("shaping function psi on [0, 12] (m = 0.001, M = 2):")
for u in (0.0, 0.5, 1.0, 2.0, 5.0, 12.0):
    print(f"  psi({u:4.1f}) = {psi(u, m, M):.5f}")
print(f"  floor m*M/(m+M) = {m * M / (m + M):.5f}")
print()

# Three stiffness indicators on the sharply-varying well: force magnitude
# (g1), curvature proxy (g2), and the local frequency itself (g3).
pot = modified_harmonic(a=10.0, b=0.1, c=0.1, x0=0.5)
monitors = {
    "g1 (force)": monitor_g1(pot, m=m, Mcap=M),
    "g2 (curvature)": monitor_g2(pot, m=m, Mcap=M),
    "g3 (frequency)": monitor_g3(pot, m=m, Mcap=M),
}

xs = np.array([[-2.0], [0.0], [0.5], [1.0], [3.0]])
header = "x".rjust(6) + "".join(name.rjust(18) for name in monitors)
print(header)
for i, x in enumerate(xs[:, 0]):
    row = f"{x:6.1f}"
    for mon in monitors.values():
        row += f"{float(mon.eval_g(xs[i:i + 1])):18.5f}"
    print(row)
print()

print("audit of the frequency monitor on [-3, 3.5]:")
report = audit_criteria(monitors["g3 (frequency)"], pot, lo=-3.0, hi=3.5)
print(report.to_csv())
print("overall:", "pass" if report.passed else "fail")
