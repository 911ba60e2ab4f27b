"""Two ground states of nearly equal norm drift apart in phase.

For each sectoral order n the energy minimizers at norms 1 and kappa_n are
computed, and the distance between the two exact solutions e^{-i omega t} f is
printed at t = 0 and at the half-period t_n.  Run with ``python
demos/instability_sweep.py``.
"""

import math

from sphpoisson.instability import instability_experiment, minimize_on_subspace

print(f"{'n':>6} {'omega-n(n+1)':>14} {'s0':>8} {'t_n':>8} {'sep(t_n)':>9}")
for n in (16, 32, 64, 128, 256, 512, 1024):
    rep = instability_experiment(n, 1.0, K=32)
    print(f"{n:6d} {rep.omega - n * (n + 1):14.6f} {rep.s0:8.4f} {rep.t_n:8.3f} {rep.separation_analytic:9.4f}")

# the multiplier grows like C4 log n + C5; fit the two constants
ns = [64, 128, 256, 512, 1024]
y = [minimize_on_subspace(n, 32).omega - n * (n + 1) for n in ns]
x = [math.log(n) for n in ns]
c4 = (y[-1] - y[0]) / (x[-1] - x[0])
print(f"\nfitted C4 ~ {c4:.5f} (1/(8 pi^2) = {1 / (8 * math.pi**2):.5f}), C5 ~ {y[0] - c4 * x[0]:.4f}")
print("t_n only starts to fall once log n exceeds about C5/C4.")
