"""Resonance sets of four sphere frequencies, a sums-of-squares count, and harmonic product integrals.

A degree-n harmonic oscillates in time like e^{-i n(n+1) t}, so four degrees
interact resonantly when the signed sum

    n1(n1+1) - n2(n2+1) + n3(n3+1) - n4(n4+1)

is small.  :func:`enumerate_lambda` lists the quadruples in a dyadic window
hitting a prescribed value k, and :func:`resonance_histogram` counts every k
at once through pair sums.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .sht import SpatialField, SpectralField, analyze, degrees, make_grid, synthesize

__all__ = [
    "ResonanceQuery",
    "window",
    "count_representations",
    "enumerate_lambda",
    "enumerate_lambda_naive",
    "resonance_histogram",
    "growth_table",
    "write_growth_csv",
    "quadrilinear_I",
    "quadrilinear_grid",
]

SIGNS = (1, -1, 1, -1)


@dataclass(frozen=True)
class ResonanceQuery:
    """Window scales N_j (with N_j/2 <= n_j <= 2 N_j) and the target value k."""

    N: tuple[int, int, int, int]
    k: int

    def __post_init__(self):
        if len(self.N) != 4 or any(int(n) != n or n < 1 for n in self.N):
            raise ValueError("N must be four positive integers")
        object.__setattr__(self, "N", tuple(int(n) for n in self.N))
        object.__setattr__(self, "k", int(self.k))

    @property
    def signs(self) -> tuple[int, ...]:
        return SIGNS


def window(N: int) -> range:
    """Admissible degrees N/2 <= n <= 2N."""
    return range((N + 1) // 2, 2 * N + 1)


def count_representations(M: int, sigma: int, N: int) -> int:
    """#{(k1, k2) : N <= k1 <= 2N, k2 >= 0, k1^2 + sigma k2^2 = M}, by exhaustion."""
    if N < 1:
        raise ValueError("N must be positive")
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    count = 0
    for k1 in range(N, 2 * N + 1):
        rest = sigma * (M - k1 * k1)  # = k2^2
        if rest < 0:
            continue
        k2 = math.isqrt(rest)
        if k2 * k2 == rest:
            count += 1
    return count


def _pronic_root(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """For integer v >= 0 return (n, ok) with n = floor((sqrt(4v+1) - 1) / 2), ok iff n(n+1) == v."""
    v = np.asarray(v, dtype=np.int64)
    neg = v < 0
    vv = np.where(neg, 0, v)
    n = ((np.sqrt(4.0 * vv + 1.0) - 1.0) / 2.0).astype(np.int64)
    # correct the float estimate by at most one in either direction
    n = np.where(n * (n + 1) > vv, n - 1, n)
    n = np.where((n + 1) * (n + 2) <= vv, n + 1, n)
    return n, (~neg) & (n * (n + 1) == vv)


def enumerate_lambda(q: ResonanceQuery | tuple, k: int | None = None) -> list[tuple[int, int, int, int]]:
    """All (n1, n2, n3, n4) in the window with signed frequency sum equal to k.

    Loops over n1, n2, n3 (vectorized) and solves n4(n4+1) = v exactly.
    Output is in lexicographic order.
    """
    if not isinstance(q, ResonanceQuery):
        q = ResonanceQuery(tuple(q), k)
    w = [np.arange(r.start, r.stop, dtype=np.int64) for r in map(window, q.N)]
    n1, n2, n3 = np.meshgrid(w[0], w[1], w[2], indexing="ij")
    v = n1 * (n1 + 1) - n2 * (n2 + 1) + n3 * (n3 + 1) - q.k
    n4, ok = _pronic_root(v)
    ok &= (n4 >= w[3][0]) & (n4 <= w[3][-1])
    return [tuple(int(a) for a in t) for t in zip(n1[ok], n2[ok], n3[ok], n4[ok])]


def enumerate_lambda_naive(N: tuple[int, int, int, int]) -> dict[int, list[tuple[int, int, int, int]]]:
    """Quadruple loop over the window, grouping every tuple by its k (reference only)."""
    out: dict[int, list[tuple[int, int, int, int]]] = {}
    for a in window(N[0]):
        for b in window(N[1]):
            for c in window(N[2]):
                for d in window(N[3]):
                    k = a * (a + 1) - b * (b + 1) + c * (c + 1) - d * (d + 1)
                    out.setdefault(k, []).append((a, b, c, d))
    return out


def _pair_counts(Na: int, Nb: int) -> np.ndarray:
    """Histogram over s of #{(a, b) in windows : a(a+1) + b(b+1) = s}."""
    pa = np.array([n * (n + 1) for n in window(Na)], dtype=np.int64)
    pb = np.array([n * (n + 1) for n in window(Nb)], dtype=np.int64)
    return np.bincount((pa[:, None] + pb[None, :]).ravel())


def resonance_histogram(N: tuple[int, int, int, int]) -> tuple[np.ndarray, np.ndarray]:
    """(k values, #Lambda(k)) for every attainable k in the window.

    #Lambda(k) = sum_s A(s) B(s - k) where A counts n1(n1+1) + n3(n3+1) and B
    counts n2(n2+1) + n4(n4+1); the correlation is done by FFT and rounded
    (counts stay far below 2^52).
    """
    A = _pair_counts(N[0], N[2]).astype(float)
    B = _pair_counts(N[1], N[3]).astype(float)
    # corr[j] = sum_s A[s] B[s - k] with k = j - (len(B) - 1)
    corr = np.rint(fftconvolve(A, B[::-1])).astype(np.int64)
    ks = np.arange(corr.size) - (B.size - 1)
    keep = corr > 0
    return ks[keep], corr[keep]


def growth_table(Ns=(8, 16, 32, 64)) -> list[dict]:
    """sup_k #Lambda(k) for the diagonal windows (N, N, N, N).

    ``ratio`` is sup / N^2 (the size of a typical level set is ~N^2);
    ``exponent`` is log2 of that ratio between successive rows.
    """
    rows = []
    prev = None
    for N in Ns:
        ks, cnt = resonance_histogram((N, N, N, N))
        i = int(np.argmax(cnt))
        ratio = float(cnt[i]) / N**2
        rows.append(
            {
                "N": int(N),
                "sup_count": int(cnt[i]),
                "argmax_k": int(ks[i]),
                "ratio": ratio,
                "exponent": None if prev is None else math.log2(ratio / prev),
            }
        )
        prev = ratio
    return rows


def write_growth_csv(rows: list[dict], path, config: dict | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if config is not None:
            fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(["N", "sup_count", "argmax_k"])
        for r in rows:
            w.writerow([r["N"], r["sup_count"], r["argmax_k"]])


# --------------------------------------------------------------------------
# Quadrilinear harmonic integral


def quadrilinear_grid(L1: int, L2: int, L3: int, L4: int):
    """Smallest standard grid on which :func:`quadrilinear_I` is exact."""
    L = max(L1, L2, L3, L4)
    d12 = L1 + L2
    return make_grid(L, degree=max(2 * d12, d12 + L3 + L4))


def quadrilinear_I(f1: SpectralField, f2: SpectralField, f3: SpectralField, f4: SpectralField, grid=None) -> complex:
    """integral over the sphere of G(f1 f2) f3 f4 (no complex conjugation).

    f1 f2 is analyzed at bandlimit L1 + L2, G applied degree-wise and the
    result integrated against f3 f4.  The default grid integrates every step
    exactly; an explicit ``grid`` that cannot raises ValueError.
    """
    fs = (f1, f2, f3, f4)
    Ls = [f.L for f in fs]
    need = max(2 * (Ls[0] + Ls[1]), sum(Ls))
    if grid is None:
        grid = quadrilinear_grid(*Ls)
    elif grid.capacity < need or not grid.supports(max(Ls)):
        raise ValueError(f"grid capacity {grid.capacity} below the required degree {need}")
    v = [synthesize(f, grid).values for f in fs]
    d12 = Ls[0] + Ls[1]
    p = analyze(SpatialField(grid, v[0] * v[1]), d12)
    g = synthesize(SpectralField(d12, p.coeffs / (2.0 * degrees(d12) + 1.0)), grid).values
    return complex(grid.integrate(g * v[2] * v[3]))
