"""Divergence-free truncated Fourier fields on the periodic box ``[0, L]^d``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .modes import ModeSet, grid_map, grid_size, mode_set


class FieldError(ValueError):
    pass


def wavenumbers(modes: ModeSet, L: float) -> np.ndarray:
    """Physical wavevectors ``2 pi k / L``, shape ``(n, d)``."""
    return (2 * np.pi / L) * modes.kappa.astype(float)


def stokes_eigenvalues(modes: ModeSet, L: float) -> np.ndarray:
    """``lambda_k = (2 pi / L)^2 |k|^2``."""
    return (2 * np.pi / L) ** 2 * modes.k2


def project(modes: ModeSet, f: np.ndarray) -> np.ndarray:
    """Leray projection ``(I - k k^T / |k|^2) f_k`` on arrays ``(..., n, d)``."""
    k = modes.kappa.astype(float)
    kf = np.einsum("nd,...nd->...n", k, f)
    return f - (kf / modes.k2)[..., None] * k


def inner(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """L^2 inner product of real fields from their stored halves."""
    return 2.0 * np.real(np.sum(a * np.conj(b), axis=(-2, -1)))


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Stored coefficients ``coeffs[i, c]`` for wavevector ``modes.kappa[i]``.

    Zero mean and reality hold by construction of the storage; the solenoidal
    condition ``k . u_k = 0`` is checked by :meth:`validate`.
    """

    dim: int
    K: int
    L: float
    coeffs: np.ndarray  # (n, d) complex

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != (self.modes.n, self.dim):
            raise FieldError(f"coefficients must have shape {(self.modes.n, self.dim)}, got {c.shape}")
        object.__setattr__(self, "coeffs", c)

    @property
    def modes(self) -> ModeSet:
        return mode_set(self.dim, self.K)

    @classmethod
    def zeros(cls, dim: int, K: int, L: float) -> "SpectralField":
        return cls(dim, K, L, np.zeros((mode_set(dim, K).n, dim), complex))

    @classmethod
    def from_modes(cls, dim: int, K: int, L: float, entries: dict) -> "SpectralField":
        """Build from ``{wavevector: complex vector}``; ``-k`` entries are conjugated in."""
        f = cls.zeros(dim, K, L)
        c = f.coeffs.copy()
        for k, v in entries.items():
            i, conj = f.modes.index(k)
            v = np.asarray(v, dtype=complex)
            c[i] = np.conj(v) if conj else v
        return cls(dim, K, L, c)

    @classmethod
    def random(cls, dim, K, L, rng, slope: float = 0.0, norm: float | None = None):
        modes = mode_set(dim, K)
        amp = modes.norm ** (-slope)
        raw = (rng.standard_normal((modes.n, dim)) + 1j * rng.standard_normal((modes.n, dim))) * amp[:, None]
        u = cls(dim, K, L, project(modes, raw))
        if norm is not None:
            u = u.scaled(norm / u.l2_norm())
        return u

    def scaled(self, a: float) -> "SpectralField":
        return SpectralField(self.dim, self.K, self.L, self.coeffs * a)

    def __add__(self, other):
        return SpectralField(self.dim, self.K, self.L, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return SpectralField(self.dim, self.K, self.L, self.coeffs - other.coeffs)

    def divergence(self) -> np.ndarray:
        return np.einsum("nd,nd->n", self.modes.kappa.astype(float), self.coeffs)

    def validate(self, tol: float = 1e-12) -> None:
        if not np.all(np.isfinite(self.coeffs)):
            raise FieldError("non-finite coefficients")
        scale = max(1.0, float(np.max(np.abs(self.coeffs), initial=0.0)))
        if np.max(np.abs(self.divergence()), initial=0.0) > tol * scale * self.K:
            raise FieldError("field is not divergence-free")

    # --- norms --------------------------------------------------------

    def l2_norm(self) -> float:
        return float(np.sqrt(2.0 * np.sum(np.abs(self.coeffs) ** 2)))

    def enstrophy_norm(self) -> float:
        lam = stokes_eigenvalues(self.modes, self.L)
        return float(np.sqrt(2.0 * np.sum(lam[:, None] * np.abs(self.coeffs) ** 2)))

    def dual_norm(self) -> float:
        lam = stokes_eigenvalues(self.modes, self.L)
        return float(np.sqrt(2.0 * np.sum(np.abs(self.coeffs) ** 2 / lam[:, None])))

    def inner(self, other: "SpectralField") -> float:
        return float(inner(self.coeffs, other.coeffs))

    # --- coordinates and physical space --------------------------------

    def to_coords(self) -> np.ndarray:
        return np.ascontiguousarray(self.coeffs).view(float).ravel().copy()

    @classmethod
    def from_coords(cls, dim, K, L, x: np.ndarray) -> "SpectralField":
        n = mode_set(dim, K).n
        c = np.ascontiguousarray(np.asarray(x, float).reshape(n, dim * 2)).view(complex)
        return cls(dim, K, L, c.reshape(n, dim))

    def to_physical(self, N: int | None = None) -> np.ndarray:
        """Velocity on the uniform ``N^d`` grid, shape ``(d, N, ..., N)``."""
        N = grid_size(self.K) if N is None else N
        gm = grid_map(self.dim, self.K, N)
        g = gm.scatter(self.coeffs.T)
        u = np.fft.irfftn(g, s=gm.real_shape, axes=tuple(range(1, self.dim + 1)))
        return u * (N**self.dim) * self.L ** (-self.dim / 2)


def leray_project(f: np.ndarray, dim: int, K: int, L: float) -> SpectralField:
    """Project a raw zero-mean coefficient array ``(n, d)`` onto solenoidal fields."""
    modes = mode_set(dim, K)
    f = np.asarray(f, dtype=complex)
    if f.shape != (modes.n, dim):
        raise FieldError(f"raw field must have shape {(modes.n, dim)}")
    return SpectralField(dim, K, L, project(modes, f))


def l2_norm(u: SpectralField) -> float:
    return u.l2_norm()


def enstrophy_norm(u: SpectralField) -> float:
    return u.enstrophy_norm()


def dual_norm(g: SpectralField) -> float:
    return g.dual_norm()
