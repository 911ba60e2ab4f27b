"""Spherical-harmonic analysis and synthesis on Gauss-Legendre grids.

Coefficients are stored flat in (l ascending, m ascending from -l) order, so
``a[l*l + l + m]`` is the coefficient of ``Y_l^m``.  Harmonics are orthonormal
with the Condon-Shortley phase, ``Y_0^0 = 1/sqrt(4 pi)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft
from scipy.fft import next_fast_len

__all__ = [
    "SphereGrid",
    "SpectralField",
    "SpatialField",
    "gauss_legendre",
    "make_grid",
    "grid_from_sizes",
    "ylm",
    "legendre_table",
    "legendre_order",
    "synthesize",
    "analyze",
    "synthesize_real",
    "analyze_real",
    "synthesize_many",
    "analyze_many",
    "lm_index",
    "degrees",
    "orders",
    "write_sph1",
    "read_sph1",
]

# Mantissa/exponent split used by the Legendre recurrence: values are carried
# as mant * 2**(_EXP_STEP * k) with integer k <= 0 and |mant| < 2**300.
_EXP_STEP = 600
_LOG_STEP = _EXP_STEP * math.log(2.0)
_RESCALE_AT = 2.0**300


def _legendre_pair(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p0 = np.ones_like(x)
    p1 = x.copy()
    for j in range(2, n + 1):
        p0, p1 = p1, ((2 * j - 1) * x * p1 - (j - 1) * p0) / j
    return p0, p1  # P_{n-1}, P_n


def gauss_legendre(n: int, tol: float = 1e-14) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.

    Nodes are returned in decreasing order (north pole first when read as
    cos(colatitude)).
    """
    if n < 1:
        raise ValueError("need at least one node")
    k = np.arange(1, n + 1)
    # Tricomi initial guess
    x = (1.0 - (n - 1) / (8.0 * n**3)) * np.cos(np.pi * (4 * k - 1) / (4 * n + 2))
    for _ in range(100):
        p0, p1 = _legendre_pair(n, x)
        dp = n * (x * p1 - p0) / (x * x - 1.0)
        dx = p1 / dp
        x = x - dx
        if np.max(np.abs(dx)) <= tol:
            break
    p0, p1 = _legendre_pair(n, x)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    return x, w


@dataclass(frozen=True, eq=False)
class SphereGrid:
    """Gauss-Legendre colatitudes times equispaced longitudes.

    ``capacity`` is the largest total harmonic degree the grid integrates
    exactly; a field of bandlimit L round-trips when ``capacity >= 2L``.
    """

    n_lat: int
    n_lon: int
    x: np.ndarray = field(repr=False)  # cos(colatitude), decreasing
    weights: np.ndarray = field(repr=False)
    lon0: float = 0.0

    @property
    def theta(self) -> np.ndarray:
        return np.arccos(self.x)

    @property
    def lon_step(self) -> float:
        return 2.0 * math.pi / self.n_lon

    @property
    def lon(self) -> np.ndarray:
        return self.lon0 + self.lon_step * np.arange(self.n_lon)

    @property
    def capacity(self) -> int:
        return min(2 * self.n_lat - 1, self.n_lon - 1)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_lat, self.n_lon)

    def supports(self, L: int) -> bool:
        return self.capacity >= 2 * L

    def max_bandlimit(self) -> int:
        return self.capacity // 2

    def area_weights(self) -> np.ndarray:
        """Quadrature weights for the surface measure, shape (n_lat, n_lon)."""
        return np.outer(self.weights, np.full(self.n_lon, self.lon_step))

    def integrate(self, values: np.ndarray) -> complex | float:
        return np.sum(self.weights[:, None] * values.sum(axis=1, keepdims=True)) * self.lon_step

    def cartesian(self) -> np.ndarray:
        """Unit vectors of all nodes, shape (n_lat, n_lon, 3)."""
        st = np.sqrt(1.0 - self.x**2)
        lon = self.lon
        return np.stack(
            [
                st[:, None] * np.cos(lon)[None, :],
                st[:, None] * np.sin(lon)[None, :],
                np.broadcast_to(self.x[:, None], (self.n_lat, self.n_lon)),
            ],
            axis=-1,
        )

    def key(self) -> tuple:
        return (self.n_lat, self.n_lon, self.lon0)


@lru_cache(maxsize=64)
def _gl_cached(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = gauss_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def make_grid(L: int, degree: int | None = None, *, lon0: float = 0.0) -> SphereGrid:
    """Grid integrating products up to total degree ``degree`` (default 3L) exactly.

    ``degree`` is raised to at least 2L so the grid always resolves L.
    """
    if L < 0:
        raise ValueError("bandlimit must be non-negative")
    if degree is None:
        degree = 3 * L
    degree = max(degree, 2 * L)
    n_lat = max(1, -(-(degree + 1) // 2))
    # any n_lon >= degree + 1 is exact; round up to a 5-smooth FFT length
    n_lon = next_fast_len(degree + 1)
    x, w = _gl_cached(n_lat)
    return SphereGrid(n_lat, n_lon, x, w, lon0)


def grid_from_sizes(n_lat: int, n_lon: int, lon0: float = 0.0) -> SphereGrid:
    x, w = _gl_cached(n_lat)
    return SphereGrid(n_lat, n_lon, x, w, lon0)


def lm_index(l, m):
    return l * l + l + m


@lru_cache(maxsize=32)
def _lm_arrays(L: int) -> tuple[np.ndarray, np.ndarray]:
    l = np.concatenate([np.full(2 * j + 1, j) for j in range(L + 1)]) if L >= 0 else np.zeros(0, int)
    m = np.concatenate([np.arange(-j, j + 1) for j in range(L + 1)])
    l.flags.writeable = False
    m.flags.writeable = False
    return l, m


def degrees(L: int) -> np.ndarray:
    """Degree l of every flat coefficient slot."""
    return _lm_arrays(L)[0]


def orders(L: int) -> np.ndarray:
    return _lm_arrays(L)[1]


@dataclass
class SpectralField:
    """Coefficients a_{l,m}, 0 <= l <= L, of a field on the unit sphere."""

    L: int
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.coeffs.shape != ((self.L + 1) ** 2,):
            raise ValueError(f"expected {(self.L + 1) ** 2} coefficients, got {self.coeffs.shape}")

    @classmethod
    def zeros(cls, L: int) -> "SpectralField":
        return cls(L, np.zeros((L + 1) ** 2, complex))

    @classmethod
    def single(cls, L: int, l: int, m: int, value: complex = 1.0) -> "SpectralField":
        f = cls.zeros(L)
        f.coeffs[lm_index(l, m)] = value
        return f

    @classmethod
    def random(cls, L: int, rng: np.random.Generator, decay: float = 0.0) -> "SpectralField":
        """Complex Gaussian coefficients scaled by (1+l)**(-decay)."""
        n = (L + 1) ** 2
        a = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        return cls(L, a * (1.0 + degrees(L)) ** (-decay))

    def __getitem__(self, lm: tuple[int, int]) -> complex:
        l, m = lm
        return self.coeffs[lm_index(l, m)]

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs) ** 2)))

    def mass(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))

    def copy(self) -> "SpectralField":
        return SpectralField(self.L, self.coeffs.copy())

    def truncate(self, L: int) -> "SpectralField":
        """Truncate or zero-pad to bandlimit L."""
        out = np.zeros((L + 1) ** 2, complex)
        n = (min(L, self.L) + 1) ** 2
        out[:n] = self.coeffs[:n]
        return SpectralField(L, out)

    def conj_real_symmetric(self) -> "SpectralField":
        """Coefficients of conj(f): a_{l,-m} -> (-1)^m conj(a_{l,m})."""
        l, m = _lm_arrays(self.L)
        src = lm_index(l, -m)
        return SpectralField(self.L, ((-1.0) ** np.abs(m)) * np.conj(self.coeffs[src]))

    def __add__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.L, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        return SpectralField(self.L, self.coeffs - other.coeffs)

    def __mul__(self, c: complex) -> "SpectralField":
        return SpectralField(self.L, self.coeffs * c)

    __rmul__ = __mul__


@dataclass
class SpatialField:
    grid: SphereGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != self.grid.shape:
            raise ValueError(f"values must have shape {self.grid.shape}")

    def integral(self):
        return self.grid.integrate(self.values)


# --------------------------------------------------------------------------
# Normalized associated Legendre functions


def _sectoral_log_seeds(mmax: int, x: np.ndarray) -> np.ndarray:
    """log|lambda_m^m(x)| for m = 0..mmax, shape (mmax+1, nx)."""
    m = np.arange(mmax + 1)
    # log prod_{k=1}^m sqrt((2k+1)/(2k))
    c = np.concatenate([[0.0], np.cumsum(0.5 * np.log((2.0 * m[1:] + 1) / (2.0 * m[1:])))])
    with np.errstate(divide="ignore", invalid="ignore"):
        logsin = 0.5 * np.log1p(-x * x)
        # at a pole 0 * -inf is nan in row m = 0, which is overwritten below
        out = -0.5 * math.log(4 * math.pi) + c[:, None] + m[:, None] * logsin[None, :]
    out[0] = -0.5 * math.log(4 * math.pi)
    return out


def _recurrence_coeffs(l: np.ndarray, m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    l2 = l.astype(float) ** 2
    m2 = m.astype(float) ** 2
    a = np.sqrt((4.0 * l2 - 1.0) / (l2 - m2))
    b = np.sqrt(((l - 1.0) ** 2 - m2) / (4.0 * (l - 1.0) ** 2 - 1.0))
    return a, b


def _run_recurrence(ms: np.ndarray, lmax: int, x: np.ndarray, out_cb) -> None:
    """Upward degree recurrence for all orders in ``ms`` simultaneously.

    ``out_cb(j, vals)`` receives lambda_{m+j}^m(x) for the orders still
    active at offset j = l - m, shape (n_active, nx).
    """
    logs = _sectoral_log_seeds(int(ms.max()), x)[ms]
    sign = np.where(ms % 2 == 1, -1.0, 1.0)[:, None]
    # nearest step, so seeds of moderate size are carried unscaled (k = 0)
    # and exp never sees an argument beyond half a step
    with np.errstate(invalid="ignore"):
        k = np.minimum(np.round(logs / _LOG_STEP), 0.0)
    with np.errstate(invalid="ignore"):
        cur = sign * np.exp(logs - k * _LOG_STEP)
    cur = np.where(np.isfinite(logs), cur, 0.0)
    k = np.where(np.isfinite(logs), k, 0.0).astype(np.int64)
    prev = np.zeros_like(cur)
    nmax = lmax - int(ms.min())
    for j in range(nmax + 1):
        active = ms + j <= lmax
        if not active.all():
            # orders are ascending, so the active set is a prefix
            na = int(active.sum())
            ms, cur, prev, k = ms[:na], cur[:na], prev[:na], k[:na]
        if j == 0:
            pass
        elif j == 1:
            prev, cur = cur, np.sqrt(2.0 * ms[:, None] + 3.0) * x[None, :] * cur
        else:
            l = ms + j
            a, b = _recurrence_coeffs(l, ms)
            prev, cur = cur, a[:, None] * (x[None, :] * cur - b[:, None] * prev)
        big = (np.abs(cur) > _RESCALE_AT) & (k < 0)
        if big.any():
            cur = np.where(big, np.ldexp(cur, -_EXP_STEP), cur)
            prev = np.where(big, np.ldexp(prev, -_EXP_STEP), prev)
            k = k + big
        vals = np.where(k == 0, cur, np.ldexp(cur, np.maximum(k * _EXP_STEP, -2000).astype(np.int32)))
        out_cb(j, ms, vals)


def legendre_table(L: int, x: np.ndarray) -> np.ndarray:
    """lambda_l^m(x) for 0 <= m <= l <= L, shape (L+1, L+1, nx) indexed [l, m].

    ``Y_l^m(theta, phi) = lambda_l^m(cos theta) exp(i m phi)`` for m >= 0.
    Entries with m > l are zero.
    """
    x = np.asarray(x, dtype=float)
    out = np.zeros((L + 1, L + 1, x.size))
    ms = np.arange(L + 1)

    def store(j, active, vals):
        out[active + j, active] = vals

    _run_recurrence(ms, L, x, store)
    return out


def legendre_order(m: int, lmax: int, x: np.ndarray) -> np.ndarray:
    """lambda_l^m(x) for l = m..lmax at a single order, shape (lmax-m+1, nx)."""
    x = np.asarray(x, dtype=float)
    if lmax < m:
        return np.zeros((0, x.size))
    out = np.zeros((lmax - m + 1, x.size))

    def store(j, active, vals):
        out[j] = vals[0]

    _run_recurrence(np.array([m]), lmax, x, store)
    return out


class _LegendrePlan:
    """Legendre stage of the transforms for one (bandlimit, colatitude set).

    Works on coefficient batches laid out (harmonic index, batch).  On node
    sets symmetric about the equator only the northern half of the table is
    stored, split by the parity of l + m, since
    lambda_l^m(-x) = (-1)^(l+m) lambda_l^m(x); that halves the memory
    traffic that dominates the cost.

    Internally a_{l,m} (m >= 0) and (-1)^m a_{l,-m} (m >= 1) share the table
    entry lambda_l^{|m|}.  Gather maps hold flat harmonic indices, with the
    extra index (L+1)^2 pointing at a zero row for unused slots.
    """

    def __init__(self, L: int, x: np.ndarray):
        self.L = L
        n = self.n = x.size
        T = legendre_table(L, x).transpose(1, 2, 0)  # [m, j, l]
        self.symmetric = n > 1 and np.max(np.abs(x + x[::-1])) <= 1e-14
        self.h = (n + 1) // 2 if self.symmetric else n
        zero = (L + 1) ** 2
        ms = np.arange(L + 1)[:, None]
        if self.symmetric:
            ks = np.arange(L // 2 + 1)[None, :]
            # block p holds degree l = 2k + ((m + p) mod 2)
            blocks = [2 * ks + (ms + p) % 2 for p in (0, 1)]
        else:
            blocks = [np.broadcast_to(np.arange(L + 1)[None, :], (L + 1, L + 1))]
        self.Tb, self.TbT, self.gpos, self.gneg, self.spos, self.sneg = [], [], [], [], [], []
        sign = (-1.0) ** ms
        for l in blocks:
            ok = (l <= L) & (l >= ms)
            lc = np.where(ok, l, 0)
            blk = np.take_along_axis(T[:, : self.h, :], lc[:, None, :], axis=2) * ok[:, None, :]
            self.Tb.append(np.ascontiguousarray(blk))
            self.TbT.append(np.ascontiguousarray(blk.transpose(0, 2, 1)))
            gp = np.where(ok, lc * lc + lc + ms, zero)
            okn = ok & (ms >= 1)
            gn = np.where(okn, lc * lc + lc - ms, zero)
            self.gpos.append(gp)
            self.gneg.append(gn)
            self.spos.append((np.flatnonzero(ok), gp[ok]))
            self.sneg.append((np.flatnonzero(okn), gn[okn], np.broadcast_to(sign, ok.shape)[okn]))
        self.sign = sign

    def forward(self, CT: np.ndarray, real: bool = False) -> np.ndarray:
        """F[m, j, b] (and the -m part) from coefficients CT of shape ((L+1)^2, B).

        Returns (M, n, B) for ``real`` (m >= 0 only) or (M, n, 2B) holding the
        +m block followed by the -m block.
        """
        B = CT.shape[1]
        Cz = np.concatenate([CT, np.zeros((1, B), complex)])
        Y = []
        for T, gp, gn in zip(self.Tb, self.gpos, self.gneg):
            X = Cz[gp] if real else np.concatenate([Cz[gp], self.sign[:, :, None] * Cz[gn]], axis=-1)
            Y.append(np.matmul(T, X.view(float)))
        if not self.symmetric:
            return Y[0].view(complex)
        north = Y[0] + Y[1]
        south = (Y[0] - Y[1])[:, : self.n - self.h][:, ::-1]
        return np.concatenate([north, south], axis=1).view(complex)

    def backward(self, H: np.ndarray, real: bool = False) -> np.ndarray:
        """Coefficients ((L+1)^2, B) from the order blocks H of shape (M, n, B) or (M, n, 2B)."""
        X = np.ascontiguousarray(H).view(float)
        if self.symmetric:
            h, s = self.h, self.n - self.h
            mirror = np.zeros_like(X[:, :h])
            mirror[:, :s] = X[:, h:][:, ::-1]
            north = X[:, :h]
            parts = (north + mirror, north - mirror)
        else:
            parts = (X,)
        B = H.shape[-1] if real else H.shape[-1] // 2
        out = np.zeros(((self.L + 1) ** 2, B), complex)
        for Xs, T, (src, dst), (srcn, dstn, sg) in zip(parts, self.TbT, self.spos, self.sneg):
            Y = np.matmul(T, Xs).view(complex)
            out[dst] = Y[..., :B].reshape(-1, B)[src]
            if not real:
                out[dstn] = sg[:, None] * Y[..., B:].reshape(-1, B)[srcn]
        return out


@lru_cache(maxsize=16)
def _plan_cached(L: int, xbytes: bytes) -> _LegendrePlan:
    return _LegendrePlan(L, np.frombuffer(xbytes, dtype=float))


def _table(L: int, grid: SphereGrid) -> _LegendrePlan:
    return _plan_cached(L, np.ascontiguousarray(grid.x, dtype=float).tobytes())


# --------------------------------------------------------------------------
# Transforms


def _check(grid: SphereGrid, L: int) -> None:
    if not grid.supports(L):
        raise ValueError(
            f"grid ({grid.n_lat}x{grid.n_lon}, capacity {grid.capacity}) cannot resolve bandlimit {L}"
        )


def _lon_phase(grid: SphereGrid, L: int, sign: float) -> np.ndarray | None:
    if grid.lon0 == 0.0:
        return None
    return np.exp(sign * 1j * np.arange(L + 1) * grid.lon0)[:, None, None]


def synthesize_many(C: np.ndarray, L: int, grid: SphereGrid, method: str = "fft", real: bool = False) -> np.ndarray:
    """Samples of a batch of fields, coefficients C of shape (B, (L+1)^2).

    Returns shape (B, n_lat, n_lon).  With ``real`` the fields are assumed to
    satisfy the real-field symmetry, only m >= 0 is read and real samples are
    returned.
    """
    C = np.atleast_2d(np.asarray(C, dtype=complex))
    _check(grid, L)
    if C.shape[1] != (L + 1) ** 2:
        raise ValueError("coefficient count does not match the bandlimit")
    if method not in ("fft", "direct"):
        raise ValueError(f"unknown method {method!r}")
    ms = np.arange(L + 1)
    B = C.shape[0]
    F = _table(L, grid).forward(np.ascontiguousarray(C.T), real=real)  # [m, j, b]
    ph = _lon_phase(grid, L, 1.0)
    if real:
        if ph is not None:
            F = F * ph
        G = np.zeros((grid.n_lon // 2 + 1, grid.n_lat, B), complex)
        G[ms] = F
        return (sp_fft.irfft(G, n=grid.n_lon, axis=0) * grid.n_lon).transpose(2, 1, 0)
    Fp, Fn = F[..., :B], F[..., B:]
    if ph is not None:
        Fp = Fp * ph
        Fn = Fn * np.conj(ph)
    if method == "fft":
        G = np.zeros((grid.n_lon, grid.n_lat, B), complex)
        G[ms] = Fp
        G[(-ms[1:]) % grid.n_lon] += Fn[1:]
        return (sp_fft.ifft(G, axis=0) * grid.n_lon).transpose(2, 1, 0)
    phi = grid.lon_step * np.arange(grid.n_lon)
    Ep = np.exp(1j * np.outer(ms, phi))
    En = np.exp(-1j * np.outer(ms[1:], phi))
    return np.einsum("mjb,mp->bjp", Fp, Ep) + np.einsum("mjb,mp->bjp", Fn[1:], En)


def analyze_many(V: np.ndarray, grid: SphereGrid, L: int, method: str = "fft", real: bool = False) -> np.ndarray:
    """Coefficients (B, (L+1)^2) of a batch of samples V of shape (B, n_lat, n_lon).

    With ``real`` the samples are taken as real, only m >= 0 is computed and
    the rest filled in by the real-field symmetry.
    """
    V = np.asarray(V)
    if V.ndim == 2:
        V = V[None]
    _check(grid, L)
    if V.shape[1:] != grid.shape:
        raise ValueError(f"samples of shape {V.shape[1:]} do not match grid {grid.shape}")
    if method not in ("fft", "direct"):
        raise ValueError(f"unknown method {method!r}")
    ms = np.arange(L + 1)
    w = (grid.weights * grid.lon_step)[None, :, None]
    plan = _table(L, grid)
    ph = _lon_phase(grid, L, -1.0)
    if real:
        S = sp_fft.rfft(V.real if np.iscomplexobj(V) else V, axis=-1)
        Hp = S[:, :, ms].transpose(2, 1, 0)
        if ph is not None:
            Hp = Hp * ph
        CT = plan.backward(Hp * w, real=True)
        # a_{l,-m} = (-1)^m conj(a_{l,m})
        l, m = _lm_arrays(L)
        neg = np.flatnonzero(m < 0)
        CT[neg] = ((-1.0) ** m[neg])[:, None] * np.conj(CT[lm_index(l[neg], -m[neg])])
        return CT.T
    V = V.astype(complex, copy=False)
    if method == "fft":
        S = sp_fft.fft(V, axis=-1)
        Hp = S[:, :, ms].transpose(2, 1, 0)
        Hn = S[:, :, (-ms) % grid.n_lon].transpose(2, 1, 0)
    else:
        phi = grid.lon_step * np.arange(grid.n_lon)
        Hp = np.einsum("bjp,pm->mjb", V, np.exp(-1j * np.outer(phi, ms)))
        Hn = np.einsum("bjp,pm->mjb", V, np.exp(1j * np.outer(phi, ms)))
    if ph is not None:
        Hp = Hp * ph
        Hn = Hn * np.conj(ph)
    return plan.backward(np.concatenate([Hp * w, Hn * w], axis=-1)).T


def synthesize(f: SpectralField, grid: SphereGrid, method: str = "fft") -> SpatialField:
    """Evaluate sum a_{l,m} Y_l^m at every grid node.

    ``method="direct"`` sums the longitude series explicitly; ``"fft"`` is the
    fast path and agrees with it to rounding.
    """
    return SpatialField(grid, synthesize_many(f.coeffs[None], f.L, grid, method)[0])


def analyze(v: SpatialField, L: int, method: str = "fft") -> SpectralField:
    """Quadrature of v * conj(Y_l^m) for all l <= L."""
    return SpectralField(L, analyze_many(v.values[None], v.grid, L, method)[0])


def synthesize_real(f: SpectralField, grid: SphereGrid) -> np.ndarray:
    """Real samples of a field whose coefficients obey the real-field symmetry.

    Only the m >= 0 coefficients are read.
    """
    return synthesize_many(f.coeffs[None], f.L, grid, real=True)[0]


def analyze_real(values: np.ndarray, grid: SphereGrid, L: int) -> SpectralField:
    """:func:`analyze` for real samples, computing only m >= 0 and mirroring."""
    return SpectralField(L, analyze_many(np.asarray(values, dtype=float)[None], grid, L, real=True)[0])


def ylm(l: int, m: int, grid: SphereGrid) -> np.ndarray:
    """Samples of a single orthonormal harmonic on the grid."""
    lam = legendre_order(abs(m), l, grid.x)[-1]
    if m < 0:
        lam = lam * (-1.0) ** abs(m)
    return lam[:, None] * np.exp(1j * m * grid.lon)[None, :]


# --------------------------------------------------------------------------
# SPH1 coefficient snapshots

_SPH1_MAGIC = b"SPH1"
_SPH1_HEADER = struct.Struct("<4sII")


def write_sph1(path, f: SpectralField) -> None:
    """Write ``f`` as magic, uint32 L, uint32 count, then (re, im) float64 LE pairs."""
    data = np.empty(2 * f.coeffs.size, dtype="<f8")
    data[0::2] = f.coeffs.real
    data[1::2] = f.coeffs.imag
    with open(path, "wb") as fh:
        fh.write(_SPH1_HEADER.pack(_SPH1_MAGIC, f.L, f.coeffs.size))
        fh.write(data.tobytes())


def read_sph1(path) -> SpectralField:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _SPH1_HEADER.size:
        raise ValueError("truncated SPH1 header")
    magic, L, count = _SPH1_HEADER.unpack_from(raw)
    if magic != _SPH1_MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    if count != (L + 1) ** 2:
        raise ValueError(f"count {count} inconsistent with L={L}")
    body = np.frombuffer(raw, dtype="<f8", offset=_SPH1_HEADER.size)
    if body.size != 2 * count:
        raise ValueError("SPH1 payload length mismatch")
    return SpectralField(L, body[0::2] + 1j * body[1::2])
