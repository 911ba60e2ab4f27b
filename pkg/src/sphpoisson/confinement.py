"""Radial confinement around the unit sphere and the resulting mixed-state dynamics.

The confinement operator

    H_r = -r^-2 d/dr (r^2 d/dr) + eps^-2 V_c((r - 1) / eps)

becomes -w'' + V w after the substitution w = r u, which is discretized by
second-order finite differences on a uniform grid with w = 0 at r = 0 and at
r = r_max.  A state is expanded as v = sum_p e^{-i t E_p} omega_p(t, sigma)
psi_p(r).  Since the psi_p are orthonormal in L^2(r^2 dr) and the 3D Poisson
operator returns a function of sigma only, the radial directions decouple and
the omega_p form a mixed state on the sphere driven by G(sum_q |omega_q|^2).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .evolution import MixedState, TrajectoryRecord, evolve_mixed
from .operators import hartree_from_density, nonlinear_grid
from .sht import SpatialField, SpectralField, analyze_real, degrees, synthesize

__all__ = [
    "ConfinementProfile",
    "QUARTIC",
    "HARMONIC",
    "RadialProblem",
    "RadialEigenbasis",
    "ConfinedState",
    "TruncationWarning",
    "radial_eigensolve",
    "conservative_residual",
    "project_initial",
    "evolve_limit",
    "reconstruct",
    "limit_invariants",
    "poisson3d",
]


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConfinementProfile:
    """A confinement profile V_c(z) with its claimed growth exponent.

    ``validation_only`` profiles skip the growth check; they exist to test
    the eigensolver against closed forms.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    alpha: float
    validation_only: bool = False

    def __call__(self, z):
        return self.fn(np.asarray(z, dtype=float))

    def check_growth(self, z_max: float = 100.0, samples: int = 2001) -> float:
        """Sampled lower bound C in V_c(z) >= C |z|^alpha for |z| >= 1.

        Raises when alpha <= 2, when the profile goes negative, or when the
        ratio is not bounded away from zero.
        """
        if self.alpha <= 2.0:
            raise ValueError(f"profile {self.name!r}: growth exponent must exceed 2")
        z = np.concatenate([-np.geomspace(z_max, 1.0, samples), np.geomspace(1.0, z_max, samples)])
        v = self(z)
        if np.any(self(np.linspace(-1.0, 1.0, samples)) < 0) or np.any(v < 0):
            raise ValueError(f"profile {self.name!r} is negative somewhere")
        c = float(np.min(v / np.abs(z) ** self.alpha))
        if not c > 0:
            raise ValueError(f"profile {self.name!r} does not grow like |z|^{self.alpha}")
        return c


QUARTIC = ConfinementProfile("quartic", lambda z: 1.0 + z**4, 4.0)
HARMONIC = ConfinementProfile("harmonic", lambda z: z**2, 2.0, validation_only=True)

_PROFILES = {p.name: p for p in (QUARTIC, HARMONIC)}


def profile_by_name(name: str) -> ConfinementProfile:
    try:
        return _PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown confinement profile {name!r}") from None


@dataclass(frozen=True)
class RadialProblem:
    """Discretization of H_r: ``n_r`` interior nodes r_j = j h, h = r_max / (n_r + 1)."""

    profile: ConfinementProfile = QUARTIC
    eps: float = 0.1
    r_max: float = 3.0
    n_r: int = 2000

    def __post_init__(self):
        if not 0.0 < self.eps <= 1.0:
            raise ValueError("eps must lie in (0, 1]")
        if self.r_max < 2.0:
            raise ValueError("r_max must be at least 2")
        if self.n_r < 200:
            raise ValueError("n_r must be at least 200")
        if not self.profile.validation_only:
            self.profile.check_growth()

    @property
    def h(self) -> float:
        return self.r_max / (self.n_r + 1)

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.n_r + 1)

    def potential(self, r) -> np.ndarray:
        """V_c^eps(r) = eps^-2 V_c((r - 1) / eps)."""
        return self.profile((np.asarray(r, dtype=float) - 1.0) / self.eps) / self.eps**2

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        """Diagonal and off-diagonal of the -w'' + V w matrix."""
        h2 = self.h**2
        d = 2.0 / h2 + self.potential(self.r)
        e = np.full(self.n_r - 1, -1.0 / h2)
        return d, e

    def inner(self, a: np.ndarray, b: np.ndarray) -> complex:
        """Trapezoidal <a, b> in L^2(r^2 dr); both ends contribute zero."""
        return complex(self.h * np.sum(np.conj(a) * b * self.r**2, axis=0))

    def truncation_level(self) -> float:
        return float(min(self.potential(0.0), self.potential(self.r_max)))

    def to_dict(self) -> dict:
        return {"profile": self.profile.name, "eps": self.eps, "r_max": self.r_max, "n_r": self.n_r}


@dataclass
class RadialEigenbasis:
    problem: RadialProblem
    energies: np.ndarray
    modes: np.ndarray  # (n_r, P): u_p = w_p / r on the interior nodes
    truncated: np.ndarray  # per-mode flag
    matrix_residual: np.ndarray

    @property
    def P(self) -> int:
        return self.energies.size

    def gram(self) -> np.ndarray:
        r2 = self.problem.h * self.problem.r**2
        return self.modes.T @ (r2[:, None] * self.modes)

    def to_csv(self, path, config: dict | None = None) -> None:
        with open(path, "w") as fh:
            if config is not None:
                fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
            fh.write(",".join(["r"] + [f"psi_{p}" for p in range(self.P)]) + "\n")
            for j, rj in enumerate(self.problem.r):
                fh.write(",".join(repr(float(v)) for v in (rj, *self.modes[j])) + "\n")

    def energies_json(self, path, config: dict | None = None) -> None:
        d = {"eps": self.problem.eps, "E": [float(e) for e in self.energies]}
        if config is not None:
            d["config"] = config
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")


def radial_eigensolve(prob: RadialProblem, n_modes: int = 4) -> RadialEigenbasis:
    """Lowest ``n_modes`` eigenpairs of H_r.

    Modes are normalized in the trapezoidal L^2(r^2 dr) product.  Modes whose
    energy reaches 99% of the potential at either end of the truncated domain
    are flagged and a :class:`TruncationWarning` is issued.
    """
    if not 1 <= n_modes < prob.n_r // 10:
        raise ValueError("need 1 <= n_modes << n_r")
    d, e = prob.matrix()
    E, W = eigh_tridiagonal(d, e, select="i", select_range=(0, n_modes - 1))
    # sign convention: each mode positive at its largest-magnitude node
    W = W * np.sign(W[np.argmax(np.abs(W), axis=0), np.arange(n_modes)])
    AW = d[:, None] * W
    AW[1:] += e[:, None] * W[:-1]
    AW[:-1] += e[:, None] * W[1:]
    mres = np.linalg.norm(AW - W * E, axis=0) / (np.abs(E) * np.linalg.norm(W, axis=0))
    r = prob.r
    U = W / r[:, None]
    U /= np.sqrt(prob.h * np.sum(U**2 * r[:, None] ** 2, axis=0))
    flag = E >= 0.99 * prob.truncation_level()
    if flag.any():
        warnings.warn(
            f"radial modes {np.flatnonzero(flag).tolist()} are not resolved inside r_max={prob.r_max}",
            TruncationWarning,
            stacklevel=2,
        )
    return RadialEigenbasis(prob, E, U, flag, mres)


def conservative_residual(basis: RadialEigenbasis) -> np.ndarray:
    """||H_r u - E u|| / (E ||u||) with H_r in its original divergence form.

    Uses -r^-2 [r_{j+1/2}^2 (u_{j+1} - u_j) - r_{j-1/2}^2 (u_j - u_{j-1})] / h^2,
    an independent discretization of the same operator; it differs from the
    w-form only at O(h^2).
    """
    prob = basis.problem
    h, r = prob.h, prob.r
    U = np.vstack([np.zeros(basis.P), basis.modes, np.zeros(basis.P)])
    rr = np.concatenate([[0.0], r, [prob.r_max]])
    rp = 0.5 * (rr[1:-1] + rr[2:])
    rm = 0.5 * (rr[1:-1] + rr[:-2])
    flux = rp[:, None] ** 2 * (U[2:] - U[1:-1]) - rm[:, None] ** 2 * (U[1:-1] - U[:-2])
    HU = -flux / (h**2 * r[:, None] ** 2) + prob.potential(r)[:, None] * basis.modes
    res = HU - basis.energies * basis.modes
    w = h * r[:, None] ** 2
    return np.sqrt(np.sum(w * res**2, axis=0)) / (basis.energies * np.sqrt(np.sum(w * basis.modes**2, axis=0)))


# --------------------------------------------------------------------------
# States


@dataclass
class ConfinedState:
    basis: RadialEigenbasis
    sphere_components: MixedState
    discarded_mass: float = 0.0
    truncation_warning: bool = False
    overlaps: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def single_mode(cls, basis: RadialEigenbasis, p0: int, omega: SpectralField) -> "ConfinedState":
        """State omega(sigma) psi_{p0}(r): component p0 set, all others exactly zero."""
        if not 0 <= p0 < basis.P:
            raise ValueError(f"mode {p0} not in the basis (P={basis.P})")
        comps = [omega.copy() if p == p0 else SpectralField.zeros(omega.L) for p in range(basis.P)]
        ov = np.zeros(basis.P)
        ov[p0] = 1.0
        return cls(basis, MixedState(comps, list(range(basis.P))), 0.0, False, ov)

    @property
    def retained_modes(self) -> int:
        return len(self.sphere_components.components)

    def radial_energy(self) -> float:
        return float(np.sum(self.basis.energies * self.sphere_components.masses()))


def project_initial(
    u0_radial_profile: np.ndarray | Sequence[np.ndarray],
    u0_sphere_parts: SpectralField | Sequence[SpectralField],
    basis: RadialEigenbasis,
) -> ConfinedState:
    """Expand u0 = sum_i g_i(r) s_i(sigma) on the radial modes.

    omega_p(0) = sum_i <g_i, psi_p>_{r^2 dr} s_i.  The mass not captured by
    the retained modes is reported relative to ||u0||^2; above 5% the state
    carries a truncation warning.
    """
    if isinstance(u0_sphere_parts, SpectralField):
        profiles, parts = [np.asarray(u0_radial_profile)], [u0_sphere_parts]
    else:
        profiles, parts = [np.asarray(g) for g in u0_radial_profile], list(u0_sphere_parts)
    if len(profiles) != len(parts) or not parts:
        raise ValueError("need one radial profile per sphere part")
    prob = basis.problem
    if any(g.shape != (prob.n_r,) for g in profiles):
        raise ValueError(f"radial profiles must be sampled on the {prob.n_r} grid nodes")
    L = parts[0].L
    if any(s.L != L for s in parts):
        raise ValueError("sphere parts must share the bandlimit")
    w = prob.h * prob.r**2
    G = np.array(profiles)  # (I, n_r)
    ov = (G * w) @ basis.modes  # (I, P): <g_i, psi_p>
    S = np.array([s.coeffs for s in parts])  # (I, n_coeff)
    comps = [SpectralField(L, ov[:, p] @ S) for p in range(basis.P)]
    total = float(np.real(np.einsum("ij,ij->", (G * w) @ G.T, np.conj(S) @ S.T)))
    kept = float(sum(c.mass() for c in comps))
    discarded = 1.0 - kept / total if total > 0 else 0.0
    flag = discarded > 0.05
    if flag:
        warnings.warn(f"retained radial modes miss {discarded:.1%} of the initial mass", TruncationWarning, stacklevel=2)
    return ConfinedState(basis, MixedState(comps, list(range(basis.P))), discarded, flag, ov)


def evolve_limit(
    state0: ConfinedState,
    dt: float | None = None,
    t_end: float = 1.0,
    snapshot_every: int = 0,
) -> TrajectoryRecord:
    """Evolve the components omega_p; records mass, angular+Hartree energy and radial energy.

    ``energy`` in the record is sum_p ||grad omega_p||^2 + 1/2 integral
    G(rho) rho with rho = sum_p |omega_p|^2; the extra column
    ``radial_energy`` is sum_p E_p ||omega_p||^2.
    """
    E = state0.basis.energies

    def radial(t, cs):
        return float(sum(e * np.vdot(a, a).real for e, a in zip(E, cs)))

    return evolve_mixed(
        state0.sphere_components, dt, t_end, snapshot_every, observers={"radial_energy": radial}
    )


# --------------------------------------------------------------------------
# Reconstruction of the physical state


def reconstruct(basis: RadialEigenbasis, components: Sequence[SpectralField], t: float) -> np.ndarray:
    """Coefficients v[j, lm] of v(t, r_j, .) = sum_p e^{-i t E_p} omega_p psi_p(r_j)."""
    C = np.array([c.coeffs for c in components])  # (P, n_coeff)
    phase = np.exp(-1j * t * basis.energies)
    return basis.modes @ (phase[:, None] * C)


def poisson3d(basis_problem: RadialProblem, v: np.ndarray, L: int) -> tuple[np.ndarray, float, SpatialField]:
    """The 3D Poisson operator on states concentrated near the unit sphere.

    Returns the r-independent potential G(rho_bar) sampled on the nonlinear
    grid, the energy integral G(|v|^2)|v|^2 over r^2 dr dsigma, and rho_bar =
    integral |v|^2 r^2 dr.  ``v`` holds radial-node by harmonic coefficients;
    rho_bar is formed from an SVD of the r-weighted array so only its nonzero
    singular directions are synthesized.
    """
    prob = basis_problem
    M = np.sqrt(prob.h) * prob.r[:, None] * v
    _, s, Wh = np.linalg.svd(M, full_matrices=False)
    keep = s > s[0] * 1e-14 if s.size and s[0] > 0 else np.zeros(s.size, bool)
    grid = nonlinear_grid(L)
    rho = np.zeros(grid.shape)
    for sk, wk in zip(s[keep], Wh[keep]):
        vals = synthesize(SpectralField(L, sk * wk), grid).values
        rho += vals.real**2 + vals.imag**2
    rho_hat = analyze_real(rho, grid, 2 * L)
    inv = 1.0 / (2.0 * degrees(2 * L) + 1.0)
    V = synthesize(SpectralField(2 * L, inv * rho_hat.coeffs), grid).values.real
    return V, hartree_from_density(rho_hat), SpatialField(grid, rho)


def limit_invariants(basis: RadialEigenbasis, v: np.ndarray, L: int) -> dict[str, float]:
    """The three conserved quantities evaluated on a reconstructed state v[j, lm].

    mass = ||v||^2, radial = ||d_r v||^2 + ||V^{1/2} v||^2 in the discrete
    w = r v form, angular = ||grad_sigma v||^2 + 1/2 integral G(|v|^2)|v|^2.
    """
    prob = basis.problem
    h, r = prob.h, prob.r
    w2 = h * r**2
    mass = float(np.sum(w2[:, None] * np.abs(v) ** 2))
    d, e = prob.matrix()
    Wv = r[:, None] * v
    AW = d[:, None] * Wv
    AW[1:] += e[:, None] * Wv[:-1]
    AW[:-1] += e[:, None] * Wv[1:]
    radial = float(np.real(np.sum(np.conj(Wv) * AW)) * h)
    l = degrees(L).astype(float)
    kin = float(np.sum(w2[:, None] * l * (l + 1) * np.abs(v) ** 2))
    _, eh, _ = poisson3d(prob, v, L)
    return {"mass": mass, "radial_energy": radial, "angular_energy": kin + 0.5 * eh}
