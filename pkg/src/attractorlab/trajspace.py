"""Trajectory space: the weighted sup metric, translations, trajectory attractors.

A point of trajectory space is a :class:`~attractorlab.evsys.Trajectory` on
``[0, H]``.  The metric is

    d(u, v) = sum_{T=1}^{floor(H)} 2^{-T} s_T / (1 + s_T),
    s_T = sup_{0 <= t <= T} d_X(u(t), v(t)),

whose neglected tail is at most ``2^{-floor(H)}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .evsys import (
    EvolutionarySystem,
    Report,
    Trajectory,
    _verdict,
    _window_steps,
    geometric_grid,
    run_ensemble,
)
from .phase import PhaseSpace, PointCloud, hausdorff

DEFAULT_HORIZON = 16.0


def tail_bound(H: float) -> float:
    return float(2.0 ** -np.floor(H))


def _block_ends(n: int, dt: float) -> np.ndarray:
    H = (n - 1) * dt
    T = np.arange(1, int(np.floor(H + 1e-9)) + 1)
    return np.round(T / dt).astype(int)


def _metric_from_pointwise(d: np.ndarray, dt: float) -> np.ndarray:
    """``d`` is ``(..., n)`` pointwise distances on the grid ``0, dt, ...``."""
    ends = _block_ends(d.shape[-1], dt)
    run = np.maximum.accumulate(d, axis=-1)[..., ends]
    w = np.exp2(-np.arange(1, len(ends) + 1, dtype=float))
    return np.sum(w * run / (1.0 + run), axis=-1)


def traj_metric(u: Trajectory, v: Trajectory, metric: str = "weak") -> float:
    if u.space != v.space:
        raise ValueError("trajectories live in different phase spaces")
    if len(u) != len(v) or not np.isclose(u.dt, v.dt, rtol=1e-12):
        raise ValueError("trajectory horizons or grids differ")
    if (len(u) - 1) * u.dt < 1 - 1e-9:
        raise ValueError("horizon must be at least 1")
    d = u.space.dist(u.samples, v.samples, metric)
    return float(_metric_from_pointwise(d, u.dt))


def translate_traj(u: Trajectory, s: float) -> Trajectory:
    """``(T(s)u)(t) = u(t + s)`` re-based to start at 0; horizon drops by ``s``."""
    H = u.t_end - u.t0
    if s < 0 or s > H - 1 + 1e-9:
        raise ValueError(f"shift {s} exceeds horizon {H} - 1")
    k = int(round(s / u.dt))
    if abs(k * u.dt - s) > 1e-9 * max(1.0, s):
        raise ValueError("shift is not a multiple of the grid spacing")
    return Trajectory(u.space, 0.0, u.dt, u.samples[k:], u.symbol_id)


def _nearest_traj(space: PhaseSpace, x: np.ndarray, B: np.ndarray, dt: float, metric: str) -> tuple[int, float]:
    """Nearest row of ``B`` (``(b, n, D)``) to ``x`` (``(n, D)``) in the trajectory metric.

    Uses ``d(u, v) >= (1 - 2^{-floor H}) d0/(1 + d0)`` with ``d0`` the distance
    at time 0 to skip most candidates.
    """
    d0 = space.dist(B[:, 0], x[0][None], metric)
    scale = 1.0 - tail_bound((B.shape[1] - 1) * dt)
    lower = scale * d0 / (1.0 + d0)
    order = np.argsort(lower, kind="stable")
    best, arg = np.inf, -1
    for s in range(0, len(order), 16):
        idx = order[s : s + 16]
        if lower[idx[0]] >= best:
            break
        vals = _metric_from_pointwise(space.dist(B[idx], x[None], metric), dt)
        k = int(np.argmin(vals))
        if vals[k] < best:
            best, arg = float(vals[k]), int(idx[k])
    return arg, best


def traj_semidist(space: PhaseSpace, A: np.ndarray, B: np.ndarray, dt: float, metric: str = "weak") -> float:
    """``max_a min_b d(a, b)`` over trajectory stacks ``(., n, D)``."""
    if len(A) == 0 or len(B) == 0:
        raise ValueError("trajectory sets must be nonempty")
    return max(_nearest_traj(space, a, B, dt, metric)[1] for a in A)


def traj_hausdorff(space, A, B, dt, metric="weak") -> float:
    return max(traj_semidist(space, A, B, dt, metric), traj_semidist(space, B, A, dt, metric))


def sup_net(space: PhaseSpace, trajs: np.ndarray, eps: float, metric: str) -> np.ndarray:
    """Indices of a greedy first-seen net: kept members are ``>= eps/2`` apart in sup distance."""
    kept: list[int] = []
    firsts = np.empty((0, trajs.shape[2]))
    for i in range(len(trajs)):
        if kept:
            d0 = space.dist(firsts, trajs[i, 0][None], metric)
            close = np.nonzero(d0 < eps / 2)[0]
            if len(close):
                sup = space.dist(trajs[np.asarray(kept)[close]], trajs[i][None], metric).max(axis=1)
                if np.min(sup) < eps / 2:
                    continue
        kept.append(i)
        firsts = np.vstack([firsts, trajs[i, 0][None]])
    return np.asarray(kept, int)


@dataclass
class TrajAttractorParams:
    n_initial: int = 8
    n_symbols: int | None = None
    T_burn: float = 30.0
    H: float = DEFAULT_HORIZON
    offset_span: float = 2 * np.pi
    offset_step: float = 0.05
    max_shift: float = 1.0
    tol: float = 0.01
    metric: str = "weak"


@dataclass(eq=False)
class TrajectoryAttractorEstimate:
    """Members on ``[0, H]`` cut from long tails at several start offsets."""

    space: PhaseSpace
    dt: float
    H: float
    tails: np.ndarray  # (n_tails, R, D)
    picks: np.ndarray  # (M, 2): (tail index, start index) of each member
    symbol_ids: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    _sections: dict = field(default_factory=dict, repr=False)

    @property
    def n_steps(self) -> int:
        return int(round(self.H / self.dt)) + 1

    def __len__(self) -> int:
        return len(self.picks)

    def members(self, shift_steps: int = 0) -> np.ndarray:
        n = self.n_steps
        idx = self.picks[:, 1][:, None] + shift_steps + np.arange(n)
        if idx.max() >= self.tails.shape[1]:
            raise ValueError("shift runs past the stored tail data")
        return self.tails[self.picks[:, 0][:, None], idx]

    def member(self, i: int) -> Trajectory:
        t, k = self.picks[i]
        return Trajectory(self.space, 0.0, self.dt, self.tails[t, k : k + self.n_steps], self.symbol_ids[t])

    def section(self, t: float) -> PointCloud:
        """``{m(t)}`` over members (cached)."""
        k = int(round(t / self.dt))
        if k not in self._sections:
            if not 0 <= k < self.n_steps:
                raise ValueError("section time outside [0, H]")
            self._sections[k] = PointCloud(self.space, self.members()[:, k], provenance={"section": k * self.dt})
        return self._sections[k]

    def translated(self, s: float) -> np.ndarray:
        """Members shifted by ``s``, cut from the same tails (horizon stays ``H``)."""
        return self.members(int(round(s / self.dt)))


def trajectory_attractor_estimate(
    sys: EvolutionarySystem, params: TrajAttractorParams, workers: int | None = None
) -> TrajectoryAttractorEstimate:
    """Kernel-tail members restricted to ``[0, H]``, thinned by a sup-distance net."""
    A = PointCloud(sys.space, sys.sample_X(params.n_initial))
    total = params.offset_span + params.max_shift + params.H
    steps = _window_steps(sys, params.T_burn, total, 1)
    ens = run_ensemble(sys, A, steps, sys.sample_symbols(params.n_symbols), workers=workers)
    n = int(round(params.H / sys.dt)) + 1
    off_step = max(1, int(round(params.offset_step / sys.dt)))
    offsets = np.arange(0, int(round(params.offset_span / sys.dt)) + 1, off_step)
    picks = np.array([(t, k) for t in range(len(ens)) for k in offsets], int)
    cand = ens.samples[picks[:, 0][:, None], picks[:, 1][:, None] + np.arange(n)]
    keep = sup_net(sys.space, cand, params.tol / 2, params.metric)
    return TrajectoryAttractorEstimate(
        sys.space,
        sys.dt,
        params.H,
        ens.samples,
        picks[keep],
        ens.symbol_ids,
        {"T_burn": params.T_burn, "candidates": len(picks), "tol": params.tol, "tail_bound": tail_bound(params.H)},
    )


def check_section_consistency(
    est: TrajectoryAttractorEstimate, cloud: PointCloud, times: Sequence[float], tol: float, metric: str = "strong"
) -> Report:
    rows = []
    for t in times:
        d = hausdorff(est.section(t), cloud, metric)
        rows.append({"t": float(t), "hausdorff": d})
    ok = all(r["hausdorff"] <= tol for r in rows)
    return Report("section-consistency", _verdict(ok), [r for r in rows if r["hausdorff"] > tol], {"tol": tol, "sections": rows})


def check_translation_stability(
    est: TrajectoryAttractorEstimate, shifts: Sequence[float], tol: float, metric: str = "weak"
) -> Report:
    """Hausdorff distance (trajectory metric) between ``T(s)`` of the members and the members."""
    base = est.members()
    rows = []
    for s in shifts:
        moved = est.translated(s)
        d = traj_hausdorff(est.space, moved, base, est.dt, metric)
        rows.append({"s": float(s), "hausdorff": d})
    ok = all(r["hausdorff"] <= tol for r in rows)
    return Report(
        "translation-stability",
        _verdict(ok),
        [r for r in rows if r["hausdorff"] > tol],
        {"tol": tol, "shifts": rows, "tail_bound": tail_bound(est.H)},
    )


def check_uniform_traj_attraction(
    sys: EvolutionarySystem,
    est: TrajectoryAttractorEstimate,
    eps: float,
    metric: str = "weak",
    A: PointCloud | None = None,
    t_max: float = 20.0,
    n_symbols: int | None = None,
    window: float = 1.0,
    workers: int | None = None,
) -> Report:
    """Smallest geometric-grid ``t0`` after which every ``T(t)u`` is within ``eps`` of the members.

    ``metric="weak"`` uses the trajectory metric; ``"strong"`` uses the sup of
    the strong distance over ``[0, window]``.
    """
    if len(est) == 0:
        raise ValueError("estimate has no members")
    if A is None:
        A = PointCloud(sys.space, sys.sample_X(8))
    grid = geometric_grid(t_max, sys.dt)
    span = est.H if metric == "weak" else window
    n_span = int(round(span / sys.dt)) + 1
    last = int(grid[-1]) + n_span - 1
    ens = run_ensemble(sys, A, np.arange(0, last + 1), sys.sample_symbols(n_symbols), workers=workers)
    members = est.members()[:, :n_span]
    series = []
    for k in grid:
        worst = 0.0
        for u in ens.samples:
            seg = u[k : k + n_span]
            if metric == "weak":
                d = _nearest_traj(sys.space, seg, members, sys.dt, "weak")[1]
            else:
                d = float(sys.space.dist(members, seg[None], "strong").max(axis=1).min())
            worst = max(worst, d)
        series.append({"t": float(k * sys.dt), "distance": worst})
    dist = np.array([r["distance"] for r in series])
    bad = np.nonzero(dist >= eps)[0]
    if len(bad) == 0:
        t0 = 0.0
    elif bad[-1] == len(grid) - 1:
        return Report("uniform-trajectory-attraction", "fail", [series[-1]], {"t0": None, "eps": eps, "series": series, "metric": metric})
    else:
        t0 = float(grid[bad[-1] + 1] * sys.dt)
    return Report("uniform-trajectory-attraction", "pass", [], {"t0": t0, "eps": eps, "series": series, "metric": metric})
