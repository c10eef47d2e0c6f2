"""The projected advection term ``B(u, v) = P(u . grad v)``.

``bilinear_arrays`` works on stacks of stored coefficient arrays and is the
production path: velocities are synthesized on an ``N^d`` grid, products
``u_j v_i`` are formed pointwise and transformed back, then
``i k_j (u_j v_i)_k`` is projected.  This uses ``(u . grad) v = div(u v^T)``,
valid because ``u`` is solenoidal.  With ``N >= 3K + 1`` the result is the
exact Galerkin projection.

``bilinear_direct`` is an independent O(n^2) triad sum used as a test oracle.
"""

from __future__ import annotations

import numpy as np

from .fields import SpectralField, project, wavenumbers
from .modes import GridMap, grid_map, grid_size, mode_set


class TruncationMismatch(ValueError):
    pass


def _physical(gm: GridMap, c: np.ndarray) -> np.ndarray:
    # c: (m, n, d) -> (m, d, N, ..., N), without the L^{-d/2} factor
    d = gm.modes.dim
    g = gm.scatter(np.swapaxes(c, -1, -2))
    axes = tuple(range(g.ndim - d, g.ndim))
    return np.fft.irfftn(g, s=gm.real_shape, axes=axes) * float(gm.N**d)


def _spectral(gm: GridMap, f: np.ndarray) -> np.ndarray:
    d = gm.modes.dim
    axes = tuple(range(f.ndim - d, f.ndim))
    return gm.gather(np.fft.rfftn(f, axes=axes)) / float(gm.N**d)


def bilinear_arrays(gm: GridMap, L: float, U: np.ndarray, V: np.ndarray | None = None) -> np.ndarray:
    """``B(U, V)`` for stacks ``(m, n, d)``; ``V=None`` means ``B(U, U)``."""
    modes = gm.modes
    d = modes.dim
    k = wavenumbers(modes, L)  # (n, d)
    pu = _physical(gm, U)
    if V is None:
        # symmetric products u_j u_i, i >= j, in one transform
        pairs = [(j, i) for j in range(d) for i in range(j, d)]
        prods = np.stack([pu[:, j] * pu[:, i] for j, i in pairs], axis=1)
    else:
        pv = _physical(gm, V)
        pairs = [(j, i) for j in range(d) for i in range(d)]
        prods = pu[:, :, None] * pv[:, None, :]
        prods = prods.reshape((prods.shape[0], d * d) + prods.shape[3:])
    w = _spectral(gm, prods) * (L ** (-d / 2))  # (m, P, n)
    flux = np.zeros((U.shape[0], modes.n, d), complex)  # sum_j i k_j (u_j v_i)_k
    for p, (j, i) in enumerate(pairs):
        flux[:, :, i] += 1j * k[:, j] * w[:, p]
        if V is None and i != j:
            flux[:, :, j] += 1j * k[:, i] * w[:, p]
    return project(modes, flux)


def bilinear_B(u: SpectralField, v: SpectralField, dealias: str = "two-thirds") -> SpectralField:
    if (u.dim, u.K, u.L) != (v.dim, v.K, v.L):
        raise TruncationMismatch("B(u, v) needs fields with the same truncation and period")
    gm = grid_map(u.dim, u.K, grid_size(u.K, dealias))
    out = bilinear_arrays(gm, u.L, u.coeffs[None], v.coeffs[None])[0]
    return SpectralField(u.dim, u.K, u.L, out)


def bilinear_direct(u: SpectralField, v: SpectralField) -> SpectralField:
    """Triad sum ``B_k = P_k L^{-d/2} sum_{p+q=k} (u_p . i q) v_q`` over the two-sided set."""
    modes = mode_set(u.dim, u.K)
    kf, idx, conj = modes.full()
    uf = np.where(conj[:, None], np.conj(u.coeffs[idx]), u.coeffs[idx])
    vf = np.where(conj[:, None], np.conj(v.coeffs[idx]), v.coeffs[idx])
    qf = (2 * np.pi / u.L) * kf.astype(float)
    out = np.zeros((modes.n, u.dim), complex)
    half = {tuple(int(c) for c in kk): i for i, kk in enumerate(modes.kappa)}
    for a, p in enumerate(kf):
        for b, q in enumerate(kf):
            s = tuple(int(c) for c in (p + q))
            if s in half:
                out[half[s]] += 1j * np.dot(uf[a], qf[b]) * vf[b]
    out *= u.L ** (-u.dim / 2)
    return SpectralField(u.dim, u.K, u.L, project(modes, out))
