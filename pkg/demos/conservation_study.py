"""Mass and energy along split-step trajectories, and the second-order energy error.

Run with ``python demos/conservation_study.py [L]`` (default L=32).
"""

import math
import sys

import numpy as np

from sphpoisson.evolution import default_dt, evolve
from sphpoisson.sht import SpectralField

L = int(sys.argv[1]) if len(sys.argv) > 1 else 32
f = SpectralField.random(L, np.random.default_rng(0), 2.0)
u0 = f * math.sqrt(2.0 / f.mass())
dt0 = default_dt(L)
t_end = 400 * dt0
prev = None
print(f"L={L}, t_end={t_end:.4g}")
for k in range(3):
    dt = dt0 / 2**k
    rec = evolve(u0, dt=dt, t_end=t_end)
    d = rec.energy_drift()
    note = "" if prev is None else f"  ratio {prev / d:.3f}"
    print(f"dt={dt:.3e}  mass drift {rec.mass_drift():.1e}  energy drift {d:.3e}{note}")
    prev = d
