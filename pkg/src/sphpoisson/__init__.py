"""Spectral toolkit for the Hartree (Schrödinger-Poisson) equation on the unit sphere."""

from .confinement import (
    HARMONIC,
    QUARTIC,
    ConfinedState,
    RadialEigenbasis,
    RadialProblem,
    evolve_limit,
    project_initial,
    radial_eigensolve,
)
from .evolution import DivergedError, MixedState, TrajectoryRecord, evolve, evolve_mixed, step_strang
from .instability import (
    build_psi,
    instability_experiment,
    minimize_on_subspace,
    psi_norm_sq_exact,
)
from .operators import (
    apply_multiplier,
    hartree_energy,
    laplacian,
    poisson,
    poisson_oracle,
    poisson_potential,
    sobolev,
    total_energy,
)
from .resonance import count_representations, enumerate_lambda, quadrilinear_I
from .sht import SpatialField, SpectralField, SphereGrid, analyze, make_grid, synthesize

__version__ = "0.1.0"
