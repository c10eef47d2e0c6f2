"""Evolutionary systems and the numerical operations built on them.

An evolutionary system here is anything that can integrate a batch of
initial points under a batch of symbols (and branch labels, for systems
without uniqueness) and report states at given integer steps of a fixed
time grid.  Everything else (reachable sets, omega-limits, attractor and
kernel estimates, tracking and invariance checks) is written once against
that interface.
"""

from __future__ import annotations

import os
import weakref
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .phase import PhaseSpace, PointCloud, dedup, eps_net, hausdorff, hausdorff_semidist

CHUNK = 64
WORKERS_ENV = "ATTRLAB_WORKERS"
GEOMETRIC_FACTOR = 1.25


class OutsideX(ValueError):
    """An initial point does not belong to the absorbing set."""


class NumericalFailure(RuntimeError):
    def __init__(self, message: str, member: int | None = None, t: float | None = None):
        super().__init__(message)
        self.member = member
        self.t = t

    def __reduce__(self):
        return type(self), (self.args[0], self.member, self.t)


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


# --- trajectories and ensembles ---------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Samples of one trajectory at ``t0 + i * dt``; linear in between."""

    space: PhaseSpace
    t0: float
    dt: float
    samples: np.ndarray  # (R, D)
    symbol_id: str = ""

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("trajectory grid spacing must be positive")
        s = np.asarray(self.samples, float)
        if s.ndim != 2 or len(s) == 0 or s.shape[1] != self.space.coord_dim:
            raise ValueError("trajectory samples must be a nonempty (R, D) array")
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self.samples) - 1)

    def index(self, t: float) -> int:
        """Grid index of ``t``; raises if ``t`` is off the grid or outside the interval."""
        x = (t - self.t0) / self.dt
        i = int(round(x))
        if abs(x - i) > 1e-6 or not 0 <= i < len(self.samples):
            raise ValueError(f"time {t} is not a grid point of this trajectory")
        return i

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        if np.any(t < self.t0 - 1e-9 * self.dt) or np.any(t > self.t_end + 1e-9 * self.dt):
            raise ValueError("time outside the trajectory interval")
        x = np.clip((t - self.t0) / self.dt, 0, len(self.samples) - 1)
        i = np.minimum(np.floor(x).astype(int), len(self.samples) - 2) if len(self.samples) > 1 else np.zeros_like(x, int)
        w = (x - i)[..., None]
        if len(self.samples) == 1:
            return np.broadcast_to(self.samples[0], t.shape + self.samples.shape[1:]).copy()
        return (1 - w) * self.samples[i] + w * self.samples[i + 1]

    def restrict(self, a: float, b: float) -> "Trajectory":
        i, j = self.index(a), self.index(b)
        if j < i:
            raise ValueError("empty restriction")
        return Trajectory(self.space, self.t0 + i * self.dt, self.dt, self.samples[i : j + 1], self.symbol_id)

    def rebased(self, t0: float) -> "Trajectory":
        return Trajectory(self.space, t0, self.dt, self.samples, self.symbol_id)

    def validate(self, tol: float = 1e-9) -> None:
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("trajectory has non-finite samples")
        bad = ~self.space.contains(self.samples, tol)
        if np.any(bad):
            i = int(np.argmax(bad))
            raise OutsideX(f"sample at t={self.times[i]:.6g} leaves X")


@dataclass(frozen=True, eq=False)
class Ensemble:
    """Members recorded at common times ``t0 + dt * i`` (``i < R``)."""

    space: PhaseSpace
    t0: float
    dt: float
    samples: np.ndarray  # (m, R, D)
    symbol_ids: list[str]
    initial: PointCloud
    seed: int = 0
    horizon: float = 0.0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.samples.shape[1])

    def member(self, i: int) -> Trajectory:
        return Trajectory(self.space, self.t0, self.dt, self.samples[i], self.symbol_ids[i])

    def __iter__(self):
        return (self.member(i) for i in range(len(self)))

    def section(self, k: int) -> np.ndarray:
        return self.samples[:, k]


# --- systems -----------------------------------------------------------------


class EvolutionarySystem:
    """Interface implemented by every instance.

    ``flow`` must be a pure function of its arguments so that splitting a
    batch into fixed-size chunks gives bit-identical results in any process.
    """

    space: PhaseSpace
    dt: float
    kind: str = "abstract"
    seed: int = 0
    chunk: int = CHUNK  # members per work unit; part of the result's definition

    def sample_symbols(self, n: int | None = None) -> list:
        """Symbols for ensembles; autonomous systems return ``[None]``."""
        return [None]

    def branch_grid(self) -> list:
        """Branch labels for systems without uniqueness; ``[None]`` otherwise."""
        return [None]

    def sample_X(self, n: int) -> np.ndarray:
        raise NotImplementedError

    def flow(self, X0: np.ndarray, symbols: Sequence, branches: Sequence, steps: np.ndarray, t0: float = 0.0) -> np.ndarray:
        """States ``(m, len(steps), D)`` at times ``t0 + steps * dt`` (``steps`` sorted, >= 0)."""
        raise NotImplementedError

    def translate_symbol(self, sym, h: float):
        return None if sym is None else sym.translate(h)

    def label(self, sym, branch) -> str:
        s = "autonomous" if sym is None else sym.ident
        return s if branch is None else f"{s}|branch={branch}"

    def steps(self, t: float) -> int:
        k = int(round(t / self.dt))
        if abs(k * self.dt - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} is not a multiple of the step {self.dt}")
        return k


def _flow_chunk(args):
    sys, X0, syms, brs, steps, t0, offset = args
    try:
        return sys.flow(X0, syms, brs, steps, t0)
    except FloatingPointError as exc:
        raise NumericalFailure(f"integration failed for members {offset}..{offset + len(X0) - 1}: {exc}", offset, getattr(exc, "t", None)) from exc


def run_members(
    sys: EvolutionarySystem,
    X0: np.ndarray,
    symbols: Sequence,
    branches: Sequence,
    steps,
    t0: float = 0.0,
    workers: int | None = None,
) -> np.ndarray:
    """Integrate members ``(X0[i], symbols[i], branches[i])`` in fixed chunks."""
    X0 = np.atleast_2d(np.asarray(X0, float))
    m = len(X0)
    if not (len(symbols) == len(branches) == m):
        raise ValueError("members need one symbol and one branch each")
    steps = np.asarray(steps, dtype=int)
    if len(steps) == 0 or np.any(np.diff(steps) < 0) or steps[0] < 0:
        raise ValueError("record steps must be sorted and nonnegative")
    c = int(sys.chunk)
    jobs = [
        (sys, X0[s : s + c], list(symbols[s : s + c]), list(branches[s : s + c]), steps, t0, s)
        for s in range(0, m, c)
    ]
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(jobs) == 1:
        parts = [_flow_chunk(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            parts = list(ex.map(_flow_chunk, jobs))
    return np.concatenate(parts, axis=0)


def member_grid(X0: np.ndarray, symbols: Sequence, branches: Sequence):
    """All combinations in the fixed order point-major, then symbol, then branch."""
    X0 = np.atleast_2d(X0)
    xi, si, bi = np.meshgrid(np.arange(len(X0)), np.arange(len(symbols)), np.arange(len(branches)), indexing="ij")
    xi, si, bi = xi.ravel(), si.ravel(), bi.ravel()
    return X0[xi], [symbols[i] for i in si], [branches[i] for i in bi], xi


def _checked(sys: EvolutionarySystem, A: PointCloud) -> np.ndarray:
    if A.space != sys.space:
        raise ValueError("initial cloud lives in a different phase space")
    if A.empty:
        raise ValueError("initial cloud is empty")
    inside = sys.space.contains(A.points)
    if not np.all(inside):
        i = int(np.argmin(inside))
        raise OutsideX(f"initial point {i} has norm {float(sys.space.norm(A.points[i])):.6g} > R={sys.space.radius}")
    return A.points


def run_ensemble(
    sys: EvolutionarySystem,
    A: PointCloud,
    steps,
    symbols: Sequence | None = None,
    branches: Sequence | None = None,
    t0: float = 0.0,
    workers: int | None = None,
    stride_dt: float | None = None,
) -> Ensemble:
    """Product ensemble over points of ``A``, symbols and branches, recorded at ``steps``.

    ``steps`` should be an arithmetic progression when the result is used as
    trajectories; the ensemble grid is ``t0 + steps[0]*dt + i*stride``.
    """
    X = _checked(sys, A)
    symbols = sys.sample_symbols() if symbols is None else list(symbols)
    branches = sys.branch_grid() if branches is None else list(branches)
    X0, syms, brs, _ = member_grid(X, symbols, branches)
    steps = np.asarray(steps, dtype=int)
    out = run_members(sys, X0, syms, brs, steps, t0, workers)
    stride = int(steps[1] - steps[0]) if len(steps) > 1 else 1
    ids = [sys.label(s, b) for s, b in zip(syms, brs)]
    return Ensemble(
        sys.space,
        t0 + steps[0] * sys.dt,
        (stride * sys.dt) if stride_dt is None else stride_dt,
        out,
        ids,
        A,
        sys.seed,
        float(t0 + steps[-1] * sys.dt),
        {"n_points": len(X), "n_symbols": len(symbols), "n_branches": len(branches)},
    )


# --- reports -------------------------------------------------------------------


@dataclass
class Report:
    """Verdict with the stable schema ``{check, status, witnesses[], details}``."""

    check: str
    status: str
    witnesses: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"check": self.check, "status": self.status, "witnesses": _plain(self.witnesses), "details": _plain(self.details)}


def _plain(x: Any):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _verdict(ok: bool) -> str:
    return "pass" if ok else "fail"


# --- reachable sets and the semiprocess property ------------------------------


def reachable_set(
    sys: EvolutionarySystem,
    A: PointCloud,
    t: float,
    n_symbols: int | None = None,
    symbols: Sequence | None = None,
    workers: int | None = None,
) -> PointCloud:
    """``R(t)A`` over sampled points, symbols and branches."""
    if t < 0:
        raise ValueError("reachable sets need t >= 0")
    syms = sys.sample_symbols(n_symbols) if symbols is None else list(symbols)
    ens = run_ensemble(sys, A, [sys.steps(t)], syms, workers=workers)
    return PointCloud(sys.space, ens.samples[:, 0], A.metric_tag, {"t": t, "members": len(ens)})


def check_semiprocess_inclusion(
    sys: EvolutionarySystem,
    A: PointCloud,
    t: float,
    s: float,
    eps: float,
    n_symbols: int | None = None,
    resample_branches: bool = False,
    workers: int | None = None,
) -> Report:
    """Sampled test of ``R(t+s)A`` inside the ``eps``-neighbourhood of ``R(t)R(s)A``.

    Symbols are matched: the second stage restarts from ``u(s)`` under the
    translate ``T(s)sigma`` of the member's own symbol, on its own branch, or
    on every branch when ``resample_branches`` is set.
    """
    if t < 0 or s < 0:
        raise ValueError("t and s must be nonnegative")
    X = _checked(sys, A)
    syms = sys.sample_symbols(n_symbols)
    brs = sys.branch_grid()
    X0, msyms, mbrs, _ = member_grid(X, syms, brs)
    ks, kt = sys.steps(s), sys.steps(t)
    both = run_members(sys, X0, msyms, mbrs, [ks, ks + kt], workers=workers)
    left = both[:, 1]
    mid = both[:, 0]
    shifted = [sys.translate_symbol(g, s) for g in msyms]
    if resample_branches and len(brs) > 1:
        mids, ssyms, sbrs = [], [], []
        for i in range(len(mid)):
            for b in brs:
                mids.append(mid[i])
                ssyms.append(shifted[i])
                sbrs.append(b)
        right = run_members(sys, np.array(mids), ssyms, sbrs, [kt], workers=workers)[:, 0]
    else:
        right = run_members(sys, mid, shifted, mbrs, [kt], workers=workers)[:, 0]
    L = PointCloud(sys.space, left)
    Rc = PointCloud(sys.space, right)
    d = hausdorff_semidist(L, Rc)
    witnesses = []
    if d > eps:
        from .phase import _min_dists

        md = _min_dists(sys.space, left, dedup(right), "strong")
        for i in np.nonzero(md > eps)[0][:10]:
            witnesses.append({"member": int(i), "distance": float(md[i]), "symbol": sys.label(msyms[i], mbrs[i])})
    return Report("semiprocess", _verdict(d <= eps), witnesses, {"t": t, "s": s, "eps": eps, "semidist": d, "members": len(X0)})


# --- omega-limits and attractors -----------------------------------------------


def _window_steps(sys: EvolutionarySystem, T_burn: float, T_collect: float, stride: int) -> np.ndarray:
    if T_burn < 0:
        raise ValueError("burn-in must be nonnegative")
    kb, kc = sys.steps(T_burn), int(round(T_collect / sys.dt))
    if T_collect <= 0 or kc < 0:
        raise ValueError("empty collection window")
    return kb + np.arange(0, kc + 1, max(1, int(stride)))


def omega_limit_estimate(
    sys: EvolutionarySystem,
    A: PointCloud,
    metric: str,
    T_burn: float,
    T_collect: float,
    tol: float,
    n_symbols: int | None = None,
    symbols: Sequence | None = None,
    stride: int = 1,
    workers: int | None = None,
) -> PointCloud:
    """States on ``[T_burn, T_burn + T_collect]`` pruned to a first-seen ``tol/2``-net."""
    steps = _window_steps(sys, T_burn, T_collect, stride)
    syms = sys.sample_symbols(n_symbols) if symbols is None else list(symbols)
    ens = run_ensemble(sys, A, steps, syms, workers=workers)
    pts = ens.samples.reshape(-1, sys.space.coord_dim)
    if len(pts) == 0:
        raise ValueError("empty collection window")
    net = eps_net(sys.space, pts, tol / 2, metric)
    return PointCloud(
        sys.space,
        net,
        metric,
        {"T_burn": T_burn, "T_collect": T_collect, "tol": tol, "members": len(ens), "collected": len(pts)},
    )


@dataclass
class AttractorParams:
    n_initial: int = 64
    n_symbols: int | None = None
    T_burn: float = 30.0
    T_collect: float = 10.0
    tol: float = 0.01
    stride: int = 1
    certify_eps: tuple = ()
    certify_points: int = 8
    t_max: float | None = None


@dataclass
class AttractorEstimate:
    cloud: PointCloud
    metric_tag: str
    horizon: float
    certificates: list = field(default_factory=list)  # (eps, t0) pairs
    agreement: dict | None = None


def attractor_estimate(
    sys: EvolutionarySystem, metric: str, params: AttractorParams, workers: int | None = None
) -> AttractorEstimate:
    """omega-limit of a low-discrepancy sample of ``X``, with attraction certificates.

    For the strong metric the weak-metric net of the same samples is also
    formed, and the two are compared in the weak metric.
    """
    X = sys.sample_X(params.n_initial)
    A = PointCloud(sys.space, X, metric, {"sample": "X"})
    steps = _window_steps(sys, params.T_burn, params.T_collect, params.stride)
    syms = sys.sample_symbols(params.n_symbols)
    ens = run_ensemble(sys, A, steps, syms, workers=workers)
    pts = ens.samples.reshape(-1, sys.space.coord_dim)
    prov = {"T_burn": params.T_burn, "T_collect": params.T_collect, "tol": params.tol, "members": len(ens)}
    net = eps_net(sys.space, pts, params.tol / 2, metric)
    cloud = PointCloud(sys.space, net, metric, prov)
    agreement = None
    if metric == "strong":
        wnet = eps_net(sys.space, pts, params.tol / 2, "weak")
        gap = hausdorff(cloud.with_points(net), cloud.with_points(wnet), "weak")
        agreement = {"weak_gap": gap, "agree": bool(gap <= params.tol)}
    est = AttractorEstimate(cloud, metric, params.T_burn + params.T_collect, [], agreement)
    if params.certify_eps:
        B = PointCloud(sys.space, X[: params.certify_points], metric)
        t_max = params.t_max if params.t_max is not None else params.T_burn
        for e in params.certify_eps:
            rep = check_attracting(sys, est, B, e, t_max, n_symbols=params.n_symbols, workers=workers)
            est.certificates.append((float(e), rep.details.get("t0")))
    return est


def geometric_grid(t_max: float, dt: float, factor: float = GEOMETRIC_FACTOR) -> np.ndarray:
    """``0`` plus ``t_max * factor^-k`` down to one step, snapped to the step grid."""
    ts = [t_max]
    while ts[-1] / factor >= dt:
        ts.append(ts[-1] / factor)
    k = np.unique(np.round(np.asarray(ts) / dt).astype(int))
    return np.concatenate([[0], k[k > 0]])


def check_attracting(
    sys: EvolutionarySystem,
    est: AttractorEstimate,
    B: PointCloud,
    eps: float,
    t_max: float,
    n_symbols: int | None = None,
    symbols: Sequence | None = None,
    workers: int | None = None,
) -> Report:
    """Smallest grid time ``t0`` after which ``R(t)B`` stays within ``eps`` of the estimate."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    steps = geometric_grid(t_max, sys.dt)
    syms = sys.sample_symbols(n_symbols) if symbols is None else list(symbols)
    ens = run_ensemble(sys, B, steps, syms, workers=workers)
    cloud = est.cloud
    from .phase import _min_dists

    dists = []
    worst_pt = []
    target = dedup(cloud.points)
    for k in range(len(steps)):
        md = _min_dists(sys.space, dedup(ens.samples[:, k]), target, est.metric_tag)
        dists.append(float(md.max()))
        worst_pt.append(int(np.argmax(md)))
    dists = np.asarray(dists)
    times = steps * sys.dt
    bad = np.nonzero(dists >= eps)[0]
    series = [{"t": float(t), "semidist": float(d)} for t, d in zip(times, dists)]
    if len(bad) == 0:
        return Report("attracting", "pass", [], {"t0": 0.0, "eps": eps, "series": series})
    last = int(bad[-1])
    if last == len(steps) - 1:
        w = {"t": float(times[last]), "point": int(worst_pt[last]), "semidist": float(dists[last])}
        return Report("attracting", "fail", [w], {"t0": None, "eps": eps, "series": series})
    return Report("attracting", "pass", [], {"t0": float(times[last + 1]), "eps": eps, "series": series})


# --- kernel, tracking, quasi-invariance ----------------------------------------


def kernel_estimate(
    sys: EvolutionarySystem,
    A: PointCloud,
    T_big: float,
    window: float,
    n_symbols: int | None = None,
    symbols: Sequence | None = None,
    stride: int = 1,
    burn_in: float = 0.0,
    workers: int | None = None,
) -> Ensemble:
    """Tails on ``[T_big, T_big + window]`` re-based so the window midpoint is time 0.

    Limits of such tails are complete trajectories of the closure, so the
    tails stand in for its kernel.  Symbol labels are those of the translates
    matching the new time origin.
    """
    if T_big < burn_in:
        raise ValueError(f"horizon {T_big} is shorter than the burn-in {burn_in}")
    if not window > 0:
        raise ValueError("window must be positive")
    steps = _window_steps(sys, T_big, window, stride)
    syms = sys.sample_symbols(n_symbols) if symbols is None else list(symbols)
    ens = run_ensemble(sys, A, steps, syms, workers=workers)
    mid = (steps[0] + steps[-1]) / 2 * sys.dt
    brs = sys.branch_grid()
    ids = []
    for _ in range(len(A)):
        for g in syms:
            for b in brs:
                ids.append(sys.label(sys.translate_symbol(g, mid), b))
    return Ensemble(
        sys.space,
        steps[0] * sys.dt - mid,
        ens.dt,
        ens.samples,
        ids,
        A,
        sys.seed,
        float(window),
        {"T_big": T_big, "window": window, "origin": mid},
    )


def _window_sup(space: PhaseSpace, seg: np.ndarray, member: np.ndarray, metric: str, bound: float = np.inf):
    """``sup_j d(seg[j], member[o + j])`` at the minimizing offsets ``o``.

    A sup over every 16th sample is a lower bound; offsets are visited in
    order of that bound and skipped once it reaches ``bound`` or the best
    full sup found so far.  Skipped offsets come back as ``inf``, so the
    minimum (when below ``bound``) is exact.
    """
    nT, D = seg.shape
    n_off = len(member) - nT + 1
    if n_off <= 0:
        return np.empty(0)
    win = np.lib.stride_tricks.sliding_window_view(member, nT, axis=0)  # (n_off, D, nT)
    sub = np.arange(0, nT, 16)
    coarse = space.dist(np.swapaxes(win[:, :, sub], 1, 2), seg[sub][None], metric).max(axis=1)
    order = np.argsort(coarse, kind="stable")
    out = np.full(n_off, np.inf)
    best = bound
    for s in range(0, n_off, 32):
        idx = order[s : s + 32]
        idx = idx[coarse[idx] < best]
        if len(idx) == 0:
            break
        out[idx] = space.dist(np.swapaxes(win[idx], 1, 2), seg[None], metric).max(axis=1)
        best = min(best, float(out[idx].min()))
    return out


_BOXES: "weakref.WeakKeyDictionary[Ensemble, dict]" = weakref.WeakKeyDictionary()


def _member_boxes(kernel: Ensemble, n_off: int) -> tuple[np.ndarray, np.ndarray]:
    """Coordinate-wise bounds of each member's first ``n_off`` samples (cached per ensemble).

    Both metrics grow with coordinate-wise gaps, so the distance to the box
    bounds the distance to every sample in it.
    """
    cache = _BOXES.setdefault(kernel, {})
    if n_off not in cache:
        head = kernel.samples[:, :n_off]
        cache[n_off] = (head.min(axis=1), head.max(axis=1))
    return cache[n_off]


def check_tracking(
    u: Trajectory, kernel: Ensemble, eps: float, T: float, t_star: float, metric: str = "strong"
) -> Report:
    """Best kernel member and offset tracking ``u`` on ``[t_star, t_star + T]``."""
    if len(kernel) == 0:
        raise ValueError("kernel is empty")
    if not np.isclose(u.dt, kernel.dt, rtol=1e-9):
        raise ValueError("trajectory and kernel grids differ")
    if t_star + T > u.t_end + 1e-9 * u.dt:
        raise ValueError("trajectory does not extend beyond t_star + T")
    i0 = u.index(t_star)
    nT = int(round(T / u.dt)) + 1
    seg = u.samples[i0 : i0 + nT]
    n_off = kernel.samples.shape[1] - nT + 1
    if n_off <= 0:
        raise ValueError("kernel window is shorter than the tracking horizon")
    # the sup is at least the distance from the first sample to the member's bounding box
    lo, hi = _member_boxes(kernel, n_off)
    x0 = seg[0][None]
    lower = u.space.dist(np.clip(x0, lo, hi), x0, metric)
    best = (np.inf, -1, 0)
    for j in np.argsort(lower, kind="stable"):
        if lower[j] >= best[0]:
            break
        sups = _window_sup(u.space, seg, kernel.samples[j], metric, best[0])
        k = int(np.argmin(sups)) if len(sups) else 0
        if len(sups) and sups[k] < best[0]:
            best = (float(sups[k]), int(j), k)
    d, j, k = best
    w = {
        "member": j,
        "symbol": kernel.symbol_ids[j] if j >= 0 else None,
        "offset": float(kernel.t0 + k * kernel.dt) if j >= 0 else None,
        "sup_distance": d,
    }
    return Report("tracking", _verdict(d < eps), [w], {"eps": eps, "T": T, "t_star": t_star, "metric": metric})


def check_quasi_invariance(est: AttractorEstimate, kernel: Ensemble, tol: float, metric: str | None = None) -> Report:
    """Every cloud point lies on some kernel member that stays near the cloud."""
    if len(kernel) == 0:
        raise ValueError("kernel is empty")
    from .phase import _min_dists

    metric = metric or est.metric_tag
    space = est.cloud.space
    cloud = dedup(est.cloud.points)
    flat = kernel.samples.reshape(-1, space.coord_dim)
    R = kernel.samples.shape[1]
    # members that stay within tol of the cloud at every sampled time
    stays = np.array([_min_dists(space, kernel.samples[j], cloud, metric).max() < tol for j in range(len(kernel))])
    failures = []
    for i, a in enumerate(est.cloud.points):
        d = space.dist(flat, a[None], metric)
        ok = (d < tol) & np.repeat(stays, R)
        if not np.any(ok):
            failures.append({"point": i, "nearest": float(d.min())})
    return Report(
        "quasi-invariance",
        _verdict(not failures),
        failures[:20],
        {"tol": tol, "points": len(est.cloud), "failures": len(failures), "members_staying": int(stays.sum())},
    )


def a2_delta(norms: np.ndarray, dt: float, eps: float, cap_steps: int) -> tuple[int, np.ndarray]:
    """Largest ``k`` with ``n[i] <= n[i-m] + eps`` for all ``1 <= m < k``, capped.

    ``norms`` is ``(members, R)``.  Returns ``(k, D)`` with ``D[m] = max_i n[i]-n[i-m]``.
    """
    R = norms.shape[1]
    M = min(cap_steps, R - 1)
    D = np.full(M + 1, -np.inf)
    for m in range(1, M + 1):
        D[m] = np.max(norms[:, m:] - norms[:, :-m])
    bad = np.nonzero(D[1:] > eps)[0]
    k = int(bad[0]) + 1 if len(bad) else cap_steps
    return k, D


def check_energy_condition_A2(
    ensemble: Ensemble, eps: float, form: str = "norm", delta_cap: float = 1.0
) -> Report:
    """Largest grid ``delta`` with ``|u(t)| <= |u(t0)| + eps`` for grid ``t0`` in ``(t - delta, t)``.

    ``form="squared"`` tests ``|u(t)|^2 <= |u(t0)|^2 + eps``.  The exceptional
    set of starting times is replaced by the grid itself (every grid point is
    an admissible ``t0``).
    """
    if form not in ("norm", "squared"):
        raise ValueError("form must be 'norm' or 'squared'")
    n = ensemble.space.norm(ensemble.samples)
    if form == "squared":
        n = n * n
    cap = max(1, int(round(delta_cap / ensemble.dt)))
    k, D = a2_delta(n, ensemble.dt, eps, cap)
    delta = k * ensemble.dt
    witnesses = []
    if k < cap:
        m = k
        i = np.unravel_index(np.argmax(n[:, m:] - n[:, :-m]), n[:, m:].shape)
        witnesses.append({"member": int(i[0]), "t": float(ensemble.times[i[1] + m]), "t0": float(ensemble.times[i[1]]), "excess": float(D[m])})
    return Report(
        "energy-A2",
        _verdict(k > 1),
        witnesses,
        {"eps": eps, "delta": delta, "capped": k >= cap, "form": form, "admissible_t0": "grid points"},
    )
