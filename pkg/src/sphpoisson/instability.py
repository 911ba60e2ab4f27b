"""Sectoral harmonics, ground states on a fixed-order subspace, and the two-state separation test.

Everything here lives in L^2_n, the fields that pick up the phase e^{i n alpha}
under a rotation by alpha about the polar axis.  It is spanned by the
harmonics Y_{n+k}^n, so a field is a short coefficient vector b_0..b_K, and
|f|^2, G(|f|^2) are axisymmetric.  :class:`SectoralBackend` therefore works on
colatitude nodes only and plugs into the generic integrator of
:mod:`sphpoisson.evolution`.  Because the full Galerkin truncation at
L = n + K maps L^2_n into itself, evolving there gives the same trajectory as
the full-sphere solver, just much faster.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .evolution import default_dt, integrate
from .sht import SpectralField, gauss_legendre, legendre_order, lm_index

__all__ = [
    "SectoralBackend",
    "SectoralSubspaceField",
    "MinimizerResult",
    "SeparationReport",
    "DegenerateError",
    "build_psi",
    "psi_norm_sq_exact",
    "sectoral_hartree",
    "phi_n",
    "kappa_n",
    "minimize_on_subspace",
    "evolve_sectoral",
    "instability_experiment",
]


class SectoralBackend:
    """Galerkin space span{Y_{n+k}^n : 0 <= k <= K}, sampled in colatitude only.

    ``n_x`` Gauss nodes integrate polynomials of degree 4(n+K) exactly, which
    covers both the density analysis and the projection of V f.
    """

    def __init__(self, n: int, K: int):
        if n < 0 or K < 0:
            raise ValueError("n and K must be non-negative")
        self.n, self.K = n, K
        self.L = n + K
        top = 2 * self.L
        x, w = gauss_legendre(top + 1)
        self.x = x
        self.w = 2.0 * math.pi * w  # longitude integral of |e^{i n phi}|^2
        self.Yk = np.ascontiguousarray(legendre_order(n, self.L, x).T)  # (n_x, K+1)
        self.Z = np.ascontiguousarray(legendre_order(0, top, x).T)  # zonal Y_l^0, (n_x, top+1)
        # complex copies avoid a real-to-complex upcast on every product
        self._Ykc = self.Yk.astype(complex)
        self._YkTwc = np.ascontiguousarray((self.Yk * self.w[:, None]).T).astype(complex)
        l = np.arange(top + 1, dtype=float)
        self._inv2l1 = 1.0 / (2.0 * l + 1.0)
        k = np.arange(K + 1, dtype=float)
        self.eigs = (n + k) * (n + k + 1)

    def synth(self, b: np.ndarray) -> np.ndarray:
        return self._Ykc @ b

    def project(self, v: np.ndarray) -> np.ndarray:
        return self._YkTwc @ v

    def density_coeffs(self, rho: np.ndarray) -> np.ndarray:
        """Zonal coefficients rho_l of an axisymmetric density."""
        return self.Z.T @ (self.w * rho)

    def potential(self, rho: np.ndarray) -> tuple[np.ndarray, float]:
        r = self.density_coeffs(rho)
        g = self._inv2l1 * r
        return self.Z @ g, float(r @ g)

    def hartree(self, rho: np.ndarray) -> float:
        r = self.density_coeffs(rho)
        return float(r @ (self._inv2l1 * r))

    def hamiltonian(self, V: np.ndarray) -> np.ndarray:
        """Matrix of -Lap + V on the subspace (real symmetric for real V)."""
        return np.diag(self.eigs) + self.Yk.T @ ((self.w * V)[:, None] * self.Yk)

    def energy(self, b: np.ndarray) -> float:
        """||grad f||^2 + 1/2 integral G(|f|^2) |f|^2."""
        return float(self.eigs @ np.abs(b) ** 2) + 0.5 * self.hartree(np.abs(self.synth(b)) ** 2)

    def gradient(self, b: np.ndarray) -> tuple[np.ndarray, float]:
        """(-Lap f + G(|f|^2) f in coefficients, energy)."""
        f = self.synth(b)
        V, eh = self.potential(np.abs(f) ** 2)
        return self.eigs * b + self.project(V * f), float(self.eigs @ np.abs(b) ** 2) + 0.5 * eh

    def to_field(self, b: np.ndarray, L: int | None = None) -> SpectralField:
        L = self.L if L is None else L
        if L < self.L:
            raise ValueError("target bandlimit below n + K")
        out = SpectralField.zeros(L)
        out.coeffs[lm_index(self.n + np.arange(self.K + 1), self.n)] = b
        return out

    def from_field(self, f: SpectralField) -> np.ndarray:
        """Coefficients of f on Y_{n+k}^n (f is not checked to lie in the subspace)."""
        k = np.arange(self.K + 1)
        ok = self.n + k <= f.L
        b = np.zeros(self.K + 1, complex)
        b[ok] = f.coeffs[lm_index(self.n + k[ok], self.n)]
        return b


# --------------------------------------------------------------------------
# psi_n = (x_1 + i x_2)^n = sin^n(theta) e^{i n phi}


def psi_norm_sq_exact(n: int) -> float:
    """||psi_n||^2 = 4 pi (2n)!! / (2n+1)!!, as a running product."""
    if n < 0:
        raise ValueError("n must be non-negative")
    p = 4.0 * math.pi
    for j in range(1, n + 1):
        p *= (2.0 * j) / (2.0 * j + 1.0)
    return p


def build_psi(n: int, L: int) -> SpectralField:
    """psi_n as a bandlimit-L field: the single coefficient a_{n,n}.

    With the Condon-Shortley phase Y_n^n = (-1)^n c_n sin^n(theta) e^{i n phi}
    for some c_n > 0, hence a_{n,n} = (-1)^n ||psi_n||.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if L < n:
        raise ValueError(f"bandlimit {L} below order {n}")
    return SpectralField.single(L, n, n, (-1) ** n * math.sqrt(psi_norm_sq_exact(n)))


def sectoral_hartree(n: int, normalized: bool = False) -> float:
    """integral G(|psi_n|^2) |psi_n|^2, or the same for psi_n / ||psi_n||."""
    be = SectoralBackend(n, 0)
    scale = 1.0 if normalized else math.sqrt(psi_norm_sq_exact(n))
    return be.hartree(np.abs(be.synth(np.array([scale]))) ** 2)


def phi_n(n: int, K: int, delta: float) -> np.ndarray:
    """psi_n rescaled to norm delta, as subspace coefficients."""
    b = np.zeros(K + 1, complex)
    b[0] = (-1) ** n * delta
    return b


def kappa_n(n: int) -> float:
    """Norm ratio of the second state, sqrt(1 - (log n)^(-1/2)); needs n >= 3."""
    if n < 3:
        raise ValueError("kappa_n needs log n > 1, i.e. n >= 3")
    return math.sqrt(1.0 - 1.0 / math.sqrt(math.log(n)))


# --------------------------------------------------------------------------
# Constrained minimization


@dataclass
class SectoralSubspaceField:
    n: int
    K: int
    b: np.ndarray
    delta: float

    def to_field(self, L: int | None = None) -> SpectralField:
        return SectoralBackend(self.n, self.K).to_field(self.b, L)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.b))


@dataclass
class MinimizerResult:
    field: SectoralSubspaceField
    omega: float
    energy: float
    overlap: float
    iterations: int
    converged: bool
    residual: float
    trial_energy: float
    descent_iterations: int = 0
    polish_iterations: int = 0
    energy_history: list[float] = field(default_factory=list)


def _align(n: int, b: np.ndarray, delta: float) -> np.ndarray:
    """Rescale to norm delta and rotate the phase so <f, phi_n> is real positive."""
    b = b * (delta / np.linalg.norm(b))
    c = (-1) ** n * b[0]
    if abs(c) > 0:
        b = b * (abs(c) / c)
    return b


def _omega(be: SectoralBackend, b: np.ndarray, delta: float) -> tuple[float, np.ndarray, float]:
    """omega = delta^-2 (||grad f||^2 + integral G(|f|^2)|f|^2), with the Euler operator and energy."""
    f = be.synth(b)
    V, eh = be.potential(np.abs(f) ** 2)
    kin = float(be.eigs @ np.abs(b) ** 2)
    g = be.eigs * b + be.project(V * f)
    return (kin + eh) / delta**2, g, kin + 0.5 * eh


def minimize_on_subspace(
    n: int,
    K: int = 32,
    delta: float = 1.0,
    tol: float = 1e-10,
    max_iter: int = 20000,
    polish: bool = True,
) -> MinimizerResult:
    """Minimize ||grad f||^2 + 1/2 integral G(|f|^2)|f|^2 over f in L^2_n, ||f|| = delta.

    Stage one is projected gradient descent started from phi_n: step along
    the tangential gradient, renormalize to delta, halve the step (initially
    1 / (2 (n+K)(n+K+1))) until the energy decreases, stop once the relative
    decrease falls below ``tol``.  Energy comparisons cannot resolve the last
    digits of the minimizer, so with ``polish`` a self-consistent stage
    follows: freeze V = G(|f|^2), take the lowest eigenvector of -Lap + V on
    the subspace, rescale to delta, repeat.  A fixed point of that map solves
    the Euler equation -Lap f + G(|f|^2) f = omega f.

    ``converged`` certifies ||Euler residual|| < 10 tol ||f||.
    """
    if n < 1 or K < 1:
        raise ValueError("need n >= 1 and K >= 1")
    if not 0.0 < delta <= 1.0:
        raise ValueError("delta must lie in (0, 1]")
    be = SectoralBackend(n, K)
    b = phi_n(n, K, delta)
    trial = be.energy(b)
    step0 = 1.0 / (2.0 * (n + K) * (n + K + 1))
    g, E = be.gradient(b)
    history = [E]
    it_descent = 0
    while it_descent < max_iter:
        it_descent += 1
        lam = float(np.real(np.vdot(b, g))) / delta**2
        gt = g - lam * b
        step = step0
        accepted = False
        for _ in range(60):
            cand = b - step * gt
            cand *= delta / np.linalg.norm(cand)
            g_c, E_c = be.gradient(cand)
            if E_c < E:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        decrease = (E - E_c) / abs(E)
        b, g, E = cand, g_c, E_c
        history.append(E)
        if decrease < tol:
            break
    b = _align(n, b, delta)

    it_polish = 0
    if polish:
        for it_polish in range(1, 201):
            f = be.synth(b)
            V, _ = be.potential(np.abs(f) ** 2)
            _, vecs = np.linalg.eigh(be.hamiltonian(V))
            new = _align(n, vecs[:, 0].astype(complex), delta)
            change = float(np.linalg.norm(new - b))
            b = new
            if change <= 1e-15 * delta:
                break

    omega, g, E = _omega(be, b, delta)
    res = float(np.linalg.norm(g - omega * b))
    return MinimizerResult(
        field=SectoralSubspaceField(n, K, b, delta),
        omega=omega,
        energy=E,
        overlap=float(abs(b[0]) / delta),
        iterations=it_descent + it_polish,
        converged=res < 10.0 * tol * delta,
        residual=res,
        trial_energy=trial,
        descent_iterations=it_descent,
        polish_iterations=it_polish,
        energy_history=history,
    )


# --------------------------------------------------------------------------
# Separation experiment


class DegenerateError(ArithmeticError):
    """omega_n and omega'_n coincide, so t_n = pi / (omega_n - omega'_n) is undefined."""


@dataclass
class SeparationReport:
    n: int
    delta0: float
    kappa_n: float
    omega: float
    omega_prime: float
    t_n: float
    s0: float
    separation_analytic: float
    separation_solver: float | None
    overlap: float
    iterations: int
    discrepancy: float | None = None
    K: int = 32
    residual: float = 0.0
    residual_prime: float = 0.0
    dt: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, path, config: dict | None = None) -> None:
        d = self.to_dict()
        if config is not None:
            d["config"] = config
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")


def evolve_sectoral(n: int, K: int, b0: np.ndarray, t_end: float, dt: float | None = None):
    """Solver trajectory of subspace data b0 up to ``t_end`` (same stepping as :func:`evolve`)."""
    be = SectoralBackend(n, K)
    if dt is None:
        dt = default_dt(be.L)
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    return integrate(be, [np.asarray(b0, complex).copy()], t_end / steps, steps, wrap=lambda a: be.to_field(a))


def _final_coeffs(n: int, K: int, b0: np.ndarray, t_end: float, dt: float | None) -> tuple[np.ndarray, float]:
    be = SectoralBackend(n, K)
    if dt is None:
        dt = default_dt(be.L)
    steps = max(1, int(math.ceil(t_end / dt - 1e-9)))
    rec = integrate(
        be, [np.asarray(b0, complex).copy()], t_end / steps, steps, wrap=lambda a: a.copy(), record_every=steps
    )
    return rec.final[0], t_end / steps


def instability_experiment(
    n: int,
    delta0: float = 1.0,
    K: int = 32,
    use_solver: bool = False,
    tol: float = 1e-10,
    dt: float | None = None,
) -> SeparationReport:
    """Two nearby ground states whose phases drift apart by pi at time t_n.

    f_n minimizes at norm delta0 and f'_n at kappa_n delta0.  The exact
    solutions are e^{-i omega t} f, so at t_n = pi / (omega - omega') their
    difference has norm ||f + f'||.
    """
    if n < 3:
        raise ValueError("n must be at least 3")
    if not 0.0 < delta0 <= 1.0:
        raise ValueError("delta0 must lie in (0, 1]")
    kap = kappa_n(n)
    r1 = minimize_on_subspace(n, K, delta0, tol=tol)
    r2 = minimize_on_subspace(n, K, kap * delta0, tol=tol)
    gap = r1.omega - r2.omega
    if abs(gap) <= 1e-12 * max(1.0, abs(r1.omega)):
        raise DegenerateError(f"omega_n = omega'_n = {r1.omega!r}")
    t_n = math.pi / gap
    f, fp = r1.field.b, r2.field.b
    s0 = float(np.linalg.norm(f - fp))
    sep_a = float(np.linalg.norm(np.exp(-1j * r1.omega * t_n) * f - np.exp(-1j * r2.omega * t_n) * fp))
    sep_s = disc = used_dt = None
    if use_solver:
        u, used_dt = _final_coeffs(n, K, f, t_n, dt)
        up, _ = _final_coeffs(n, K, fp, t_n, dt)
        sep_s = float(np.linalg.norm(u - up))
        disc = abs(sep_s - sep_a)
    return SeparationReport(
        n=n,
        delta0=delta0,
        kappa_n=kap,
        omega=r1.omega,
        omega_prime=r2.omega,
        t_n=t_n,
        s0=s0,
        separation_analytic=sep_a,
        separation_solver=sep_s,
        overlap=r1.overlap,
        iterations=r1.iterations + r2.iterations,
        discrepancy=disc,
        K=K,
        residual=r1.residual,
        residual_prime=r2.residual,
        dt=used_dt,
    )
