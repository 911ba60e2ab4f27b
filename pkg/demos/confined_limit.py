"""Radial modes of a thin shell and the mixed-state dynamics they induce.

Prints the confinement energies, projects a Gaussian shell profile on the
modes and evolves the resulting sphere components.  Run with ``python
demos/confined_limit.py``.
"""

import numpy as np

from sphpoisson.confinement import QUARTIC, RadialProblem, evolve_limit, project_initial, radial_eigensolve
from sphpoisson.evolution import default_dt
from sphpoisson.sht import SpectralField

for eps in (0.2, 0.1, 0.05):
    b = radial_eigensolve(RadialProblem(QUARTIC, eps, 3.0, 4000), 4)
    print(f"eps={eps:<5} eps^2 E_p = {np.round(b.energies * eps**2, 5)}")

prob = RadialProblem(QUARTIC, 0.1, 3.0, 2000)
basis = radial_eigensolve(prob, 4)
shell = np.exp(-0.5 * ((prob.r - 1.03) / 0.1) ** 2)
shell /= np.sqrt(prob.inner(shell, shell).real)
f = SpectralField.random(12, np.random.default_rng(1), 2.0)
state = project_initial(shell, f * (1 / f.norm()), basis)
print(f"\ncomponent masses {np.round(state.sphere_components.masses(), 5)}, discarded {state.discarded_mass:.2e}")
rec = evolve_limit(state, t_end=300 * default_dt(12))
rad = rec.extra["radial_energy"]
print(f"mass drift {rec.mass_drift():.1e}, radial energy drift {np.abs(rad - rad[0]).max() / rad[0]:.1e}, "
      f"angular+Hartree drift {rec.energy_drift():.1e}")
