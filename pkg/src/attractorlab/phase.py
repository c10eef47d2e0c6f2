"""Phase spaces, the strong/weak metric pair, and point-cloud geometry.

Points are handled as flat real coordinate vectors so that whole clouds are
plain ``(n, D)`` arrays.  For toy spaces the coordinates are the state itself.
For spectral spaces the coordinates are the stored Fourier coefficients laid
out as ``(mode, component, re/im)``; see :mod:`attractorlab.nse.modes` for the
storage convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .nse.modes import ModeSet, mode_set

KINDS = ("toy", "nse2d", "nse3d")
DEDUP_RESOLUTION = 1e-12


class DomainError(ValueError):
    """Points from different phase spaces were combined."""


@dataclass(frozen=True)
class PhaseSpace:
    """The compact absorbing set ``X``: a closed ball of radius ``radius``.

    ``dim`` is the state dimension for toy spaces and the spatial dimension
    (2 or 3) for spectral spaces.
    """

    kind: str
    radius: float
    dim: int = 1
    K: int | None = None
    L: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown phase-space kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("absorbing radius must be positive")
        if self.spectral:
            if self.K is None or self.K < 1:
                raise ValueError("spectral phase spaces need K >= 1")
            if self.L is None or not self.L > 0:
                raise ValueError("spectral phase spaces need L > 0")
            expected = 2 if self.kind == "nse2d" else 3
            if self.dim != expected:
                object.__setattr__(self, "dim", expected)

    @property
    def spectral(self) -> bool:
        return self.kind != "toy"

    @property
    def modes(self) -> ModeSet:
        if not self.spectral:
            raise DomainError("toy spaces have no Fourier modes")
        return mode_set(self.dim, self.K)

    @property
    def coord_dim(self) -> int:
        if self.spectral:
            return self.modes.n * self.dim * 2
        return self.dim

    @property
    def weight_sum(self) -> float:
        """``S_K``: sum of ``2^{-|k|}`` over the full truncated set ``0<|k|<=K``."""
        if not self.spectral:
            return 1.0
        return float(2.0 * np.sum(self.modes.weights()))

    @property
    def weak_tail_bound(self) -> float:
        """Bound on the neglected part of the weak-metric series, ``sum_{|k|>K} 2^{-|k|}``."""
        if not self.spectral:
            return 0.0
        # lattice points in the shell r < |k| <= r+1 fit in the annulus widened by sqrt(d)/2
        K, d = self.K, self.dim
        r = np.arange(K, K + 400, dtype=float)
        h = np.sqrt(d) / 2
        c = np.pi if d == 2 else 4 * np.pi / 3
        count = c * ((r + 1 + h) ** d - np.maximum(r - h, 0) ** d)
        return float(np.sum(count * np.exp2(-r)))

    # --- coordinate views -------------------------------------------------

    def _pairs(self, x: np.ndarray) -> np.ndarray:
        return x.reshape(x.shape[:-1] + (self.modes.n, 2 * self.dim))

    def check(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.coord_dim:
            raise DomainError(
                f"coordinate length {x.shape[-1]} does not match space ({self.coord_dim})"
            )
        return x

    # --- metrics ----------------------------------------------------------

    def norm(self, x: np.ndarray) -> np.ndarray:
        x = self.check(x)
        n = np.sqrt(np.sum(x * x, axis=-1))
        return n * np.sqrt(2.0) if self.spectral else n

    def strong(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """``d_s(a, b) = |a - b|`` (Euclidean, or L^2 by Parseval over both halves)."""
        return self.norm(self.check(a) - self.check(b))

    def weak(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Mode-weighted bounded metric; equals :meth:`strong` on toy spaces.

        One term per stored conjugate pair, ``2^{-|k|} x/(1+x)`` with
        ``x = |a_k - b_k|`` the norm of the complex coefficient vector.
        """
        if not self.spectral:
            return self.strong(a, b)
        diff = self._pairs(self.check(a) - self.check(b))
        x = np.sqrt(np.sum(diff * diff, axis=-1))
        return np.sum(self.modes.weights() * (x / (1.0 + x)), axis=-1)

    def dist(self, a, b, metric: str = "strong") -> np.ndarray:
        if metric == "strong":
            return self.strong(a, b)
        if metric == "weak":
            return self.weak(a, b)
        raise ValueError(f"metric must be 'strong' or 'weak', got {metric!r}")

    def contains(self, x: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        return self.norm(x) <= self.radius * (1 + tol) + tol

    # --- serialization ----------------------------------------------------

    def column_names(self) -> list[str]:
        if not self.spectral:
            return [f"x{i}" for i in range(self.dim)]
        names = []
        for k in self.modes.kappa:
            tag = "k(" + ",".join(str(int(c)) for c in k) + ")"
            for c in range(self.dim):
                names += [f"{tag}:c{c}:re", f"{tag}:c{c}:im"]
        return names

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "radius": self.radius, "dim": self.dim}
        if self.spectral:
            d.update(K=self.K, L=self.L)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PhaseSpace":
        return cls(d["kind"], float(d["radius"]), int(d.get("dim", 1)), d.get("K"), d.get("L"))


@dataclass(frozen=True, eq=False)
class PhasePoint:
    space: PhaseSpace
    coords: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coords", self.space.check(self.coords).copy())
        self.coords.setflags(write=False)

    @property
    def norm(self) -> float:
        return float(self.space.norm(self.coords))

    def in_X(self, tol: float = 1e-9) -> bool:
        return bool(self.space.contains(self.coords, tol))


def _same_space(u: PhasePoint, v: PhasePoint) -> PhaseSpace:
    if u.space != v.space:
        raise DomainError("points live in different phase spaces")
    return u.space


def strong_dist(u: PhasePoint, v: PhasePoint) -> float:
    return float(_same_space(u, v).strong(u.coords, v.coords))


def weak_dist(u: PhasePoint, v: PhasePoint) -> float:
    return float(_same_space(u, v).weak(u.coords, v.coords))


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite subset of ``X`` with the metric it was built for."""

    space: PhaseSpace
    points: np.ndarray  # (n, D)
    metric_tag: str = "strong"
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(self.space.check(self.points))
        object.__setattr__(self, "points", pts)
        if self.metric_tag not in ("strong", "weak"):
            raise ValueError(f"bad metric tag {self.metric_tag!r}")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def empty(self) -> bool:
        return len(self.points) == 0

    def point(self, i: int) -> PhasePoint:
        return PhasePoint(self.space, self.points[i])

    def with_points(self, pts: np.ndarray, **prov) -> "PointCloud":
        return PointCloud(self.space, pts, self.metric_tag, {**self.provenance, **prov})

    def deduplicated(self, resolution: float = DEDUP_RESOLUTION) -> "PointCloud":
        return self.with_points(dedup(self.points, resolution))

    @classmethod
    def of(cls, space: PhaseSpace, pts: Iterable, metric_tag: str = "strong", **prov):
        arr = np.asarray(list(pts) if not isinstance(pts, np.ndarray) else pts, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, space.coord_dim)
        return cls(space, arr, metric_tag, dict(prov))


def dedup(points: np.ndarray, resolution: float = DEDUP_RESOLUTION) -> np.ndarray:
    """Drop points sharing a ``resolution``-cell with an earlier point (order kept)."""
    if len(points) == 0:
        return points
    keys = np.floor(points / resolution).astype(np.int64)
    if keys.shape[1] == 1:
        _, first = np.unique(keys[:, 0], return_index=True)
    else:
        _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


_CHUNK = 256


def _min_dists(space: PhaseSpace, A: np.ndarray, B: np.ndarray, metric: str) -> np.ndarray:
    """For each row of A, the distance to the nearest row of B (fixed chunk order)."""
    out = np.empty(len(A))
    step = max(1, _CHUNK * 64 // max(1, len(B)))
    for s in range(0, len(A), step):
        a = A[s : s + step]
        d = space.dist(a[:, None, :], B[None, :, :], metric)
        out[s : s + step] = d.min(axis=1)
    return out


def hausdorff_semidist(A: PointCloud, B: PointCloud, metric: str = "strong") -> float:
    """``sup_{a in A} min_{b in B} d(a, b)``; not symmetric."""
    if A.space != B.space:
        raise DomainError("clouds live in different phase spaces")
    if A.empty or B.empty:
        raise ValueError("Hausdorff semi-distance needs nonempty clouds")
    a = dedup(A.points)
    b = dedup(B.points)
    return float(np.max(_min_dists(A.space, a, b, metric)))


def hausdorff(A: PointCloud, B: PointCloud, metric: str = "strong") -> float:
    return max(hausdorff_semidist(A, B, metric), hausdorff_semidist(B, A, metric))


def nearest(space: PhaseSpace, x: np.ndarray, B: np.ndarray, metric: str = "strong"):
    d = space.dist(x[None, :], B, metric)
    i = int(np.argmin(d))
    return i, float(d[i])


def eps_net(space: PhaseSpace, points: np.ndarray, eps: float, metric: str = "strong") -> np.ndarray:
    """Greedy first-seen ``eps``-net: every input lies within ``eps`` of the result.

    Points are first thinned on a cubic grid of cell diameter ``eps/2`` (first
    point per cell kept), then scanned in input order.  Kept points are
    pairwise at least ``eps/2`` apart in the chosen metric.
    """
    if len(points) == 0:
        return points
    if not eps > 0:
        raise ValueError("net resolution must be positive")
    if not space.spectral:
        scale = 1.0
    elif metric == "strong":
        scale = np.sqrt(2.0)
    else:
        # weak <= (sum of half-set weights) * Euclidean coordinate distance
        scale = max(1.0, float(np.sum(space.modes.weights())))
    cell = eps / (2.0 * scale * np.sqrt(points.shape[1]))
    thin = dedup(points, cell)
    half = eps / 2.0
    kept = np.empty_like(thin)
    kept[0] = thin[0]
    n = 1
    for x in thin[1:]:
        if np.min(space.dist(x[None, :], kept[:n], metric)) >= half:
            kept[n] = x
            n += 1
    return kept[:n].copy()
