import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sphpoisson import evolution
from sphpoisson.evolution import (
    DivergedError,
    MixedState,
    SphereBackend,
    default_dt,
    evolve,
    evolve_mixed,
    step_strang,
)
from sphpoisson.operators import total_energy
from sphpoisson.sht import SpectralField, read_sph1

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def random_state(L, seed, mass=1.0, decay=2.0):
    f = SpectralField.random(L, np.random.default_rng(seed), decay)
    return f * math.sqrt(mass / f.mass())


def test_default_dt():
    assert default_dt(10) == 0.5 / 110


def test_constant_solution_is_pure_phase():
    u0 = SpectralField.single(6, 0, 0, math.sqrt(4 * math.pi))
    rec = evolve(u0, t_end=1.0)
    assert np.max(np.abs(rec.final_state.coeffs - np.exp(-1j) * u0.coeffs)) < 1e-10
    u1 = step_strang(u0, 0.3)
    assert np.max(np.abs(u1.coeffs - np.exp(-0.3j) * u0.coeffs)) < 1e-13


@given(st.integers(min_value=1, max_value=12), seeds, st.floats(min_value=1e-3, max_value=0.2))
def test_single_step_is_isometry(L, seed, dt):
    u = random_state(L, seed, mass=2.0)
    assert abs(step_strang(u, dt).norm() - u.norm()) <= 1e-12 * u.norm()


def test_mass_drift_over_1000_steps():
    rec = evolve(random_state(12, 0), t_end=1000 * default_dt(12))
    assert len(rec.times) == 1001
    assert rec.mass_drift() < 1e-11


def test_energy_drift_is_second_order():
    L = 10
    u0 = random_state(L, 4, mass=4.0, decay=1.0)
    dt = 2 * default_dt(L)
    d1 = evolve(u0, dt=dt, t_end=200 * dt).energy_drift()
    d2 = evolve(u0, dt=dt / 2, t_end=200 * dt).energy_drift()
    assert 3.5 <= d1 / d2 <= 4.5
    assert abs(evolve(u0, dt=dt, t_end=0.0).energy[0] - total_energy(u0)) < 1e-12


def test_times_strictly_increasing_uniform():
    rec = evolve(random_state(4, 1), dt=0.01, t_end=0.1)
    steps = np.diff(rec.times)
    assert np.all(steps > 0) and np.allclose(steps, steps[0], rtol=0, atol=1e-15)
    assert abs(rec.times[-1] - 0.1) < 1e-15


def test_reversibility():
    L = 12
    u0 = random_state(L, 7, mass=3.0)
    u = u0
    dt = default_dt(L)
    n = int(round(0.05 / dt))
    for _ in range(n):
        u = step_strang(u, dt)
    for _ in range(n):
        u = step_strang(u, -dt)
    assert np.max(np.abs(u.coeffs - u0.coeffs)) < 1e-8


@settings(max_examples=5)
@given(seeds, st.floats(min_value=0, max_value=2 * math.pi))
def test_gauge_covariance(seed, theta):
    u0 = random_state(6, seed)
    a = evolve(u0, t_end=20 * default_dt(6)).final_state
    b = evolve(u0 * np.exp(1j * theta), t_end=20 * default_dt(6)).final_state
    assert np.max(np.abs(b.coeffs - np.exp(1j * theta) * a.coeffs)) < 1e-13


def test_one_component_mixed_equals_evolve():
    u0 = random_state(8, 2)
    a = evolve(u0, t_end=30 * default_dt(8))
    b = evolve_mixed(MixedState([u0]), t_end=30 * default_dt(8))
    assert np.array_equal(a.final_state.coeffs, b.final_state.coeffs)
    assert np.array_equal(a.energy, b.energy)


def test_single_component_stays_single():
    u0 = random_state(8, 3)
    z = SpectralField.zeros(8)
    rec = evolve_mixed(MixedState([z, u0, z]), t_end=40 * default_dt(8))
    assert not rec.final[0].coeffs.any() and not rec.final[2].coeffs.any()
    assert np.max(rec.component_masses[:, 0]) == 0.0


def test_density_additivity():
    L = 8
    be = SphereBackend(L)
    u = random_state(L, 5, mass=2.0)
    s = u * (1 / math.sqrt(2))
    rho1 = np.abs(be.synth(u.coeffs)) ** 2
    rho2 = 2 * np.abs(be.synth(s.coeffs)) ** 2
    V1, _ = be.potential(rho1)
    V2, _ = be.potential(rho2)
    assert np.max(np.abs(V1 - V2)) < 1e-12


def test_per_component_mass_conservation():
    L = 8
    comps = [random_state(L, s, mass=m) for s, m in ((1, 0.5), (2, 1.0), (3, 0.25))]
    rec = evolve_mixed(MixedState(comps), t_end=200 * default_dt(L))
    cm = rec.component_masses
    assert np.max(np.abs(cm - cm[0]) / cm[0]) < 1e-11


def test_mixed_state_validation():
    with pytest.raises(ValueError):
        MixedState([])
    with pytest.raises(ValueError):
        MixedState([SpectralField.zeros(2), SpectralField.zeros(3)])


def test_divergence_names_step(monkeypatch):
    calls = {"n": 0}
    orig = evolution.step_mixed

    def poisoned(backend, comps, dt):
        calls["n"] += 1
        out = orig(backend, comps, dt)
        if calls["n"] == 3:
            out[0] = out[0] * np.nan
        return out

    monkeypatch.setattr(evolution, "step_mixed", poisoned)
    with pytest.raises(DivergedError) as exc:
        evolve(random_state(4, 0), dt=0.01, t_end=0.1)
    assert exc.value.step == 3 and "step 3" in str(exc.value)


def test_bad_time_arguments():
    u = random_state(3, 0)
    with pytest.raises(ValueError):
        evolve(u, dt=-0.1, t_end=1.0)
    with pytest.raises(ValueError):
        evolve(u, dt=0.1, t_end=-1.0)


def test_csv_and_snapshots(tmp_path):
    u0 = random_state(5, 9)
    rec = evolve_mixed(MixedState([u0, u0 * 0.5], labels=[3, 7]), dt=0.01, t_end=0.05, snapshot_every=2)
    p = tmp_path / "traj.csv"
    rec.to_csv(p, config={"a": 1})
    lines = p.read_text().splitlines()
    assert lines[0] == '# config: {"a": 1}'
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == ["step", "t", "mass", "energy", "mass_3", "mass_7"]
    assert [int(r[0]) for r in rows[1:]] == list(range(6))
    paths = rec.write_snapshots(tmp_path)
    assert sorted(rec.snapshots) == [0, 2, 4]
    assert len(paths) == 6
    back = read_sph1(paths[-1])
    assert np.array_equal(back.coeffs, rec.snapshots[4][1].coeffs)


def test_stationary_ground_state_is_pure_phase():
    from sphpoisson.instability import minimize_on_subspace

    n, K = 6, 10
    res = minimize_on_subspace(n, K, delta=1.0)
    f = res.field.to_field()
    t = 0.2
    rec = evolve(f, t_end=t)
    err = np.max(np.abs(rec.final_state.coeffs - np.exp(-1j * res.omega * t) * f.coeffs))
    # O(dt^2) splitting error plus the Euler residual
    assert err < 1e-5
    assert np.max(np.abs(np.abs(rec.final_state.coeffs) - np.abs(f.coeffs))) < 1e-5


@pytest.mark.parametrize("tau", [1e-5, 0.1, 3.0, -2.0])
def test_galerkin_exponential_against_dense_expm(tau):
    from scipy.linalg import expm

    be = SphereBackend(4)
    rng = np.random.default_rng(0)
    V = rng.standard_normal(be.grid.shape)
    V -= V.mean()
    n = 25
    A = np.array([be.project(V * be.synth(np.eye(n)[j].astype(complex))) for j in range(n)]).T
    a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    got = evolution._expmv(be, V, a, tau)
    assert np.max(np.abs(got - expm(-1j * tau * A) @ a)) < 1e-13
