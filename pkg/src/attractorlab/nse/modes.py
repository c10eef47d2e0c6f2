"""Truncated Fourier mode sets and their placement on FFT grids.

Fields are stored with one representative per conjugate pair ``{k, -k}``.
The representative is the wavevector whose last nonzero component is
positive, so every stored mode has a nonnegative last component and maps
directly onto the half-spectrum layout used by ``numpy.fft.rfftn``.

Coefficients use the orthonormal convention

    u(x) = L^{-d/2} * sum_k u_k exp(2 pi i k.x / L),

so that ``|u|_{L^2}^2 = sum_k |u_k|^2`` over the full (two-sided) set.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


@dataclass(frozen=True, eq=False)
class ModeSet:
    """Half set of integer wavevectors with ``0 < |k| <= K``."""

    dim: int
    K: int
    kappa: np.ndarray  # (n, dim) int
    norm: np.ndarray  # (n,) Euclidean |k|
    _lookup: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.kappa)

    @property
    def k2(self) -> np.ndarray:
        return self.norm**2

    def index(self, k) -> tuple[int, bool]:
        """Return ``(i, conjugate)`` locating wavevector ``k`` in the half set."""
        k = tuple(int(c) for c in k)
        if k in self._lookup:
            return self._lookup[k], False
        neg = tuple(-c for c in k)
        if neg in self._lookup:
            return self._lookup[neg], True
        raise KeyError(f"wavevector {k} not in truncation K={self.K}")

    def full(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Two-sided list: ``(kappa_full, half_index, conjugated)``."""
        kf = np.concatenate([self.kappa, -self.kappa])
        idx = np.concatenate([np.arange(self.n), np.arange(self.n)])
        conj = np.concatenate([np.zeros(self.n, bool), np.ones(self.n, bool)])
        return kf, idx, conj

    def weights(self) -> np.ndarray:
        """Weak-metric weights ``2^{-|k|}`` per stored mode."""
        return np.exp2(-self.norm)


def _is_representative(k: tuple[int, ...]) -> bool:
    for c in reversed(k):
        if c != 0:
            return c > 0
    return False


@lru_cache(maxsize=None)
def mode_set(dim: int, K: int) -> ModeSet:
    if dim not in (2, 3):
        raise ValueError(f"dimension must be 2 or 3, got {dim}")
    if K < 1:
        raise ValueError(f"truncation radius must be >= 1, got {K}")
    rng = np.arange(-K, K + 1)
    grids = np.meshgrid(*([rng] * dim), indexing="ij")
    ks = np.stack([g.ravel() for g in grids], axis=1)
    k2 = np.sum(ks * ks, axis=1)
    keep = (k2 > 0) & (k2 <= K * K)
    ks = ks[keep]
    ks = np.array([k for k in ks if _is_representative(tuple(k))], dtype=np.int64)
    # order by shell, then lexicographically, for readable serialization
    order = np.lexsort(tuple(ks[:, i] for i in reversed(range(dim))) + (np.sum(ks * ks, 1),))
    ks = ks[order]
    lookup = {tuple(int(c) for c in k): i for i, k in enumerate(ks)}
    return ModeSet(dim, K, ks, np.sqrt(np.sum(ks * ks, 1).astype(float)), lookup)


def _smooth(n: int) -> bool:
    for p in (2, 3, 5, 7):
        while n % p == 0:
            n //= p
    return n == 1


def grid_size(K: int, dealias: str = "two-thirds") -> int:
    """Smallest even, 7-smooth grid size resolving products of the truncation.

    With ``two-thirds`` the grid satisfies ``N >= 3K + 1`` so quadratic
    products are projected back onto ``|k| <= K`` without aliasing.
    """
    if dealias == "two-thirds":
        n = 3 * K + 1
    elif dealias == "none":
        n = 2 * K + 1
    else:
        raise ValueError(f"unknown dealias option {dealias!r}")
    n += n % 2
    while not _smooth(n):
        n += 2
    return n


def truncation_for_grid(N: int) -> int:
    """Largest K whose products are alias-free on an ``N``-point grid."""
    return (N - 1) // 3


@dataclass(frozen=True, eq=False)
class GridMap:
    """Scatter/gather indices between a ModeSet and an rfftn grid."""

    modes: ModeSet
    N: int
    flat: np.ndarray  # flat rfft-grid index of each stored mode
    plane: np.ndarray  # stored modes whose last component is zero
    plane_conj_flat: np.ndarray  # flat index of -k for those modes

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * (self.modes.dim - 1) + (self.N // 2 + 1,)

    @property
    def real_shape(self) -> tuple[int, ...]:
        return (self.N,) * self.modes.dim

    def scatter(self, c: np.ndarray) -> np.ndarray:
        """Place coefficients ``(..., n)`` onto a complex rfft grid ``(..., *shape)``."""
        lead = c.shape[:-1]
        g = np.zeros(lead + (int(np.prod(self.shape)),), dtype=complex)
        g[..., self.flat] = c
        g[..., self.plane_conj_flat] = np.conj(c[..., self.plane])
        return g.reshape(lead + self.shape)

    def gather(self, g: np.ndarray) -> np.ndarray:
        lead = g.shape[: -self.modes.dim]
        return g.reshape(lead + (-1,))[..., self.flat]


def _flat_index(ks: np.ndarray, N: int, shape: tuple[int, ...]) -> np.ndarray:
    idx = [np.mod(ks[:, i], N) for i in range(ks.shape[1] - 1)] + [ks[:, -1]]
    return np.ravel_multi_index(tuple(idx), shape)


@lru_cache(maxsize=None)
def grid_map(dim: int, K: int, N: int) -> GridMap:
    modes = mode_set(dim, K)
    if N < 2 * K + 1:
        raise ValueError(f"grid N={N} cannot represent modes up to K={K}")
    shape = (N,) * (dim - 1) + (N // 2 + 1,)
    flat = _flat_index(modes.kappa, N, shape)
    plane = np.nonzero(modes.kappa[:, -1] == 0)[0]
    conj_flat = _flat_index(-modes.kappa[plane], N, shape)
    return GridMap(modes, N, flat, plane, conj_flat)
