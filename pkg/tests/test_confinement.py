import json
import math
import warnings

import numpy as np
import pytest

from sphpoisson.confinement import (
    HARMONIC,
    QUARTIC,
    ConfinedState,
    ConfinementProfile,
    RadialProblem,
    TruncationWarning,
    conservative_residual,
    evolve_limit,
    limit_invariants,
    profile_by_name,
    project_initial,
    radial_eigensolve,
    reconstruct,
)
from sphpoisson.evolution import default_dt, evolve
from sphpoisson.sht import SpectralField


@pytest.fixture(scope="module")
def quartic_basis():
    return radial_eigensolve(RadialProblem(QUARTIC, 0.1, 3.0, 2000), 4)


def sphere_part(L, seed, mass=1.0):
    f = SpectralField.random(L, np.random.default_rng(seed), 2.0)
    return f * math.sqrt(mass / f.mass())


def test_profiles():
    assert QUARTIC.alpha > 2 and QUARTIC.check_growth() > 0
    assert HARMONIC.validation_only
    assert profile_by_name("quartic") is QUARTIC
    with pytest.raises(ValueError):
        profile_by_name("cubic")
    weak = ConfinementProfile("weak", lambda z: np.abs(z) ** 1.5, 1.5)
    with pytest.raises(ValueError):
        RadialProblem(weak)


@pytest.mark.parametrize("kw", [{"eps": 0.0}, {"eps": 1.5}, {"r_max": 1.5}, {"n_r": 100}])
def test_problem_validation(kw):
    with pytest.raises(ValueError):
        RadialProblem(**kw)


def test_basis_orthonormal_and_ordered(quartic_basis):
    b = quartic_basis
    assert np.max(np.abs(b.gram() - np.eye(b.P))) < 1e-10
    assert np.all(np.diff(b.energies) > 0)
    assert np.all(b.matrix_residual < 1e-10)
    assert np.all(conservative_residual(b) < 1e-6)
    assert not b.truncated.any()


def test_harmonic_oracle():
    b = radial_eigensolve(RadialProblem(HARMONIC, 0.05, 3.0, 4000), 6)
    scaled = b.energies * 0.05**2
    assert np.all(np.abs(scaled / (2 * np.arange(6) + 1) - 1) < 1e-3)


def test_richardson_consistency():
    E = [radial_eigensolve(RadialProblem(QUARTIC, 0.1, 3.0, n), 1).energies[0] for n in (2000, 4000, 8000)]
    assert abs(E[0] - E[1]) <= 4 * abs(E[1] - E[2])
    assert abs(E[0] - E[1]) / abs(E[1] - E[2]) > 3.5


def test_eps_scaling_limit():
    # frozen from the first run: eps^2 E_0 ~ 2.06036 for the quartic profile
    vals = [radial_eigensolve(RadialProblem(QUARTIC, e, 3.0, 4000), 1).energies[0] * e**2 for e in (0.2, 0.1, 0.05)]
    assert all(v > 0 for v in vals)
    assert max(vals) - min(vals) < 1e-4
    assert abs(vals[-1] - 2.06034) < 1e-4


def test_truncation_flag():
    with pytest.warns(TruncationWarning):
        b = radial_eigensolve(RadialProblem(QUARTIC, 1.0, 2.0, 400), 6)
    assert b.truncated.all()


def test_project_exact_mode(quartic_basis):
    b = quartic_basis
    s = project_initial(b.modes[:, 0], sphere_part(4, 0), b)
    assert s.discarded_mass < 1e-10
    m = s.sphere_components.masses()
    assert abs(m[0] - 1) < 1e-10 and np.all(m[1:] < 1e-20)


def test_project_two_modes(quartic_basis):
    b = quartic_basis
    g = (b.modes[:, 0] + b.modes[:, 1]) / math.sqrt(2)
    m = project_initial(g, sphere_part(4, 1), b).sphere_components.masses()
    assert abs(m[0] - m[1]) < 1e-12 and abs(m[0] - 0.5) < 1e-10


def test_gaussian_profile_ground_mode_dominated():
    p = RadialProblem(QUARTIC, 0.05, 3.0, 2000)
    b = radial_eigensolve(p, 4)
    g = np.exp(-0.5 * ((p.r - 1) / p.eps) ** 2)
    s = project_initial(g, SpectralField.single(2, 0, 0), b)
    ov2 = s.overlaps[0, 0] ** 2 / p.inner(g, g).real
    # frozen from the first computation
    assert ov2 == pytest.approx(0.98278, abs=1e-5)
    assert ov2 > 0.9 and not s.truncation_warning


def test_project_warns_on_discarded_mass(quartic_basis):
    b = quartic_basis
    p = b.problem
    g = np.exp(-0.5 * ((p.r - 1.5) / 0.3) ** 2)
    with pytest.warns(TruncationWarning):
        s = project_initial(g, sphere_part(3, 2), b)
    assert s.truncation_warning and s.discarded_mass > 0.05


def test_project_rejects_mismatched_input(quartic_basis):
    with pytest.raises(ValueError):
        project_initial(np.ones(10), sphere_part(3, 0), quartic_basis)


def test_single_mode_polarization(quartic_basis):
    L = 8
    om = sphere_part(L, 3, mass=2.0)
    state = ConfinedState.single_mode(quartic_basis, 2, om)
    rec = evolve_limit(state, t_end=60 * default_dt(L))
    for p in (0, 1, 3):
        assert not rec.final[p].coeffs.any()
    ref = evolve(om, t_end=60 * default_dt(L)).final_state
    assert np.array_equal(rec.final[2].coeffs, ref.coeffs)


def test_limit_conservation_and_reconstruction(quartic_basis):
    b = quartic_basis
    L = 8
    parts = [sphere_part(L, s) for s in range(2)]
    g = [b.modes[:, 0] + 0.5 * b.modes[:, 1], b.modes[:, 2] - 0.3 * b.modes[:, 3]]
    s = project_initial(g, parts, b)
    rec = evolve_limit(s, t_end=300 * default_dt(L))
    rad = rec.extra["radial_energy"]
    assert rec.mass_drift() < 1e-11
    assert np.max(np.abs(rad - rad[0])) / rad[0] < 1e-11
    assert rec.energy_drift() < 1e-6 * abs(rec.energy[0]) + 1e-6
    t = rec.times[-1]
    v0 = reconstruct(b, s.sphere_components.components, 0.0)
    v1 = reconstruct(b, rec.final, t)
    i0, i1 = limit_invariants(b, v0, L), limit_invariants(b, v1, L)
    assert i0["mass"] == pytest.approx(rec.mass[0], rel=1e-10)
    assert i0["angular_energy"] == pytest.approx(rec.energy[0], rel=1e-9)
    assert i0["radial_energy"] == pytest.approx(rad[0], rel=1e-9)
    for k in i0:
        assert abs(i1[k] - i0[k]) <= 1e-6 * abs(i0[k])


def test_outputs(tmp_path, quartic_basis):
    p = tmp_path / "b.csv"
    quartic_basis.to_csv(p, config={"eps": 0.1})
    lines = p.read_text().splitlines()
    assert lines[1] == "r,psi_0,psi_1,psi_2,psi_3"
    assert len(lines) == 2 + 2000
    q = tmp_path / "e.json"
    quartic_basis.energies_json(q)
    d = json.loads(q.read_text())
    assert d["eps"] == 0.1 and len(d["E"]) == 4
