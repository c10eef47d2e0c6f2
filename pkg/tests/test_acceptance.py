"""Acceptance criteria 1-11.

Every CLI-backed criterion runs its command at 1 and 8 workers; the verdict is
re-derived here from the written files against oracles that do not go through
the library's own comparison code.  One PASS/FAIL line per criterion is printed
in the terminal summary (and by each test when run with ``-s``).
"""

import functools
import json
import sys

import numpy as np
import pytest

from attractorlab import io
from attractorlab.cli import run
from attractorlab.config import load
from attractorlab.evsys import Trajectory
from attractorlab.nse.bilinear import bilinear_B, bilinear_direct
from attractorlab.nse.fields import SpectralField
from attractorlab.phase import PhaseSpace
from attractorlab.scenarios import Context, build_system, nse_config
from attractorlab.trajspace import traj_metric

from conftest import CONFIGS

RESULTS: dict[int, str] = {}
WORKERS = (1, 8)

RUNS = {
    "c1-attractor": ["attractor", "--config", "toy-linear.yaml"],
    "c2-attractor": ["attractor", "--config", "toy-setvalued.yaml"],
    "c2-tracking": ["check", "tracking", "--config", "toy-setvalued.yaml"],
    "c3-closure": ["check", "closure-equivalence", "--config", "toy-linear-quasiperiodic.yaml"],
    "c5-energy": ["check", "energy", "--config", "nse2d-energy.yaml"],
    "c6-absorbing": ["simulate", "--config", "nse2d-absorbing.yaml"],
    "c7-semiprocess-linear": ["check", "semiprocess", "--config", "toy-linear.yaml"],
    "c7-semiprocess-setvalued": ["check", "semiprocess", "--config", "toy-setvalued.yaml"],
    "c8-trajectory-linear": ["trajectory-attractor", "--config", "toy-linear-trajectory.yaml"],
    "c8-trajectory-setvalued": ["trajectory-attractor", "--config", "toy-setvalued-trajectory.yaml"],
}


class Lab:
    """Runs each command once per worker count, on demand."""

    def __init__(self, root):
        self.root = root
        self.done: dict = {}

    def out(self, key: str, workers: int = 1):
        if (key, workers) not in self.done:
            argv = list(RUNS[key])
            i = argv.index("--config")
            argv[i + 1] = str(CONFIGS / argv[i + 1])
            out = self.root / f"{key}-w{workers}"
            code = run(argv + ["--out", str(out), "--workers", str(workers)])
            self.done[key, workers] = (code, out)
        code, out = self.done[key, workers]
        assert code == 0, f"{key} exited with {code}"
        return out

    def both(self, key: str):
        return [self.out(key, w) for w in WORKERS]


@pytest.fixture(scope="module")
def lab(tmp_path_factory):
    return Lab(tmp_path_factory.mktemp("acceptance"))


def criterion(n: int, title: str):
    def wrap(fn):
        @functools.wraps(fn)
        def test(*args, **kwargs):
            try:
                ok, detail = fn(*args, **kwargs)
            except Exception as exc:
                ok, detail = False, f"{type(exc).__name__}: {exc}"
            line = f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
            RESULTS[n] = line
            print(line)
            assert ok, line

        return test

    return wrap


def load_json(path):
    return json.loads(path.read_text())


def manifest(out):
    return load_json(out / "manifest.json")


def interval_hausdorff(points: np.ndarray, lo: float, hi: float) -> float:
    """Hausdorff distance between a 1-D cloud and the interval [lo, hi]."""
    x = np.sort(points.ravel())
    outside = np.maximum(np.maximum(lo - x, x - hi), 0.0).max()
    inner = np.clip(x, lo, hi)
    gaps = np.diff(np.concatenate([[lo], inner, [hi]]))
    holes = max(gaps[0], gaps[-1], gaps[1:-1].max(initial=0.0) / 2)
    return float(max(outside, holes))


# --- 1 ------------------------------------------------------------------------------


@criterion(1, "toy-linear uniform attractor")
def test_criterion_1(lab):
    out = lab.out("c1-attractor")
    cfg = load(CONFIGS / "toy-linear.yaml")
    cloud = io.read_cloud(out / "attractor.csv").points
    a = np.sqrt(2) / 2
    d = interval_hausdorff(cloud, -a, a)
    wall = manifest(out)["runtime"]["wall_clock_s"]
    setup = (cfg.ensemble.n_initial, cfg.sampler.n_symbols, cfg.horizons.burn_in, cfg.toy.nu) == (64, 32, 30.0, 1.0)
    verdict = load_json(out / "verdict.json")["status"] == "pass"
    return setup and verdict and d <= 0.01 and wall <= 10.0, f"hausdorff={d:.4g} runtime={wall:.2f}s"


# --- 2 ------------------------------------------------------------------------------


@criterion(2, "set-valued toy attractor and strong tracking")
def test_criterion_2(lab):
    att, trk = lab.out("c2-attractor"), lab.out("c2-tracking")
    cfg = load(CONFIGS / "toy-setvalued.yaml")
    d = interval_hausdorff(io.read_cloud(att / "attractor.csv").points, -1.0, 1.0)
    rep = load_json(trk / "tracking.json")
    det = rep["details"]
    t_star = np.log(2 / 0.05) + 1
    setup = (
        cfg.setvalued.branches == 201
        and det["eps"] == 0.05
        and det["metric"] == "strong"
        and t_star <= det["t_star"] < t_star + cfg.setvalued.dt
        and det["tracked"] == cfg.checks.tracking_points * 201
    )
    wall = sum(manifest(o)["runtime"]["wall_clock_s"] for o in (att, trk))
    ok = setup and d <= 0.01 and rep["status"] == "pass" and det["worst"] < 0.05 and wall <= 10.0
    return ok, f"hausdorff={d:.4g} tracked={det['tracked']} worst={det['worst']:.4g} runtime={wall:.2f}s"


# --- 3 ------------------------------------------------------------------------------


@criterion(3, "closure equivalence, translates vs hull-net")
def test_criterion_3(lab):
    out = lab.out("c3-closure")
    a = io.read_cloud(out / "attractor_translates.csv").points[:, 0]
    b = io.read_cloud(out / "attractor_hull-net.csv").points[:, 0]
    diff = np.abs(a[:, None] - b[None, :])
    gap = float(max(diff.min(axis=1).max(), diff.min(axis=0).max()))
    rep = load_json(out / "closure.json")
    ok = gap <= 0.02 and rep["status"] == "pass" and rep["details"]["hausdorff"] == pytest.approx(gap)
    return ok, f"gap={gap:.4g}"


# --- 4 ------------------------------------------------------------------------------


def _trilinear(dim, K, n, rng):
    L = 2 * np.pi
    skew = diag = 0.0
    for _ in range(n):
        u, v, w = (SpectralField.random(dim, K, L, rng, slope=rng.uniform(0, 2)) for _ in range(3))
        buv = bilinear_B(u, v)
        scale = u.enstrophy_norm() * v.enstrophy_norm() * w.enstrophy_norm()
        skew = max(skew, abs(buv.inner(w) + bilinear_B(u, w).inner(v)) / scale)
        diag = max(diag, abs(buv.inner(v)) / (u.enstrophy_norm() * v.enstrophy_norm() ** 2))
    return skew, diag


@criterion(4, "bilinear identities")
def test_criterion_4():
    rng = np.random.default_rng(4)
    s3, d3 = _trilinear(3, 8, 200, rng)
    s2, d2 = _trilinear(2, 16, 200, rng)
    direct = 0.0
    for dim in (2, 3):
        for _ in range(2):
            u, v = (SpectralField.random(dim, 4, 2 * np.pi, rng) for _ in range(2))
            ref = bilinear_direct(u, v).coeffs
            direct = max(direct, np.max(np.abs(bilinear_B(u, v).coeffs - ref)) / np.max(np.abs(ref)))
    skew, diag = max(s3, s2), max(d3, d2)
    ok = skew <= 1e-10 and diag <= 1e-12 and direct <= 1e-12
    return ok, f"skew={skew:.2g} <B(u,v),v>={diag:.2g} direct={direct:.2g}"


# --- 5 ------------------------------------------------------------------------------


@criterion(5, "energy budget of a forced 2D run")
def test_criterion_5(lab):
    out = lab.out("c5-energy")
    cfg = load(CONFIGS / "nse2d-energy.yaml")
    c = nse_config(cfg)
    rep = load_json(out / "energy.json")["details"]
    first, half = rep["runs"]
    ratio = first["max_residual"] / half["max_residual"]
    order = 2.0 ** c.order
    setup = c.dim == 2 and c.grid == 64 and c.dealias == "two-thirds" and c.dt == 1e-3 and rep["t_end"] == 10.0
    setup = setup and cfg.symbol.kind == "quasi-periodic" and half["dt"] == c.dt / 2
    ok = setup and first["max_relative"] <= 1e-5 and order / 2 <= ratio <= order * 2
    return ok, f"grid={c.grid} residual={first['max_relative']:.3g} ratio={ratio:.4g} (order {c.order})"


# --- 6 ------------------------------------------------------------------------------


@criterion(6, "absorbing ball")
def test_criterion_6(lab):
    out = lab.out("c6-absorbing")
    rep = load_json(out / "absorbing.json")
    R = rep["details"]["radius"]
    ens = io.read_ensemble(out / "ensemble.bin")
    norms = ens.space.norm(ens.samples)
    times = ens.times
    enters = []
    for row in norms:
        inside = np.nonzero(row <= R)[0]
        if not len(inside) or np.any(row[inside[0] :] > R):
            enters.append(None)
        else:
            enters.append(float(times[inside[0]]))
    start = norms[:, 0] / R
    ok = (
        rep["status"] == "pass"
        and all(t is not None for t in enters)
        and np.allclose(start, 2.0)
        and times[-1] == pytest.approx(50.0)
    )
    t_enter = max(t for t in enters if t is not None) if any(t is not None for t in enters) else None
    return ok, f"R={R:.4g} t_enter={t_enter} members={len(enters)} max_after={rep['details']['max_norm_after_entry']:.4g}"


# --- 7 ------------------------------------------------------------------------------


@criterion(7, "semiprocess inclusion on the toys")
def test_criterion_7(lab):
    worst, pairs, ok = 0.0, set(), True
    for key in ("c7-semiprocess-linear", "c7-semiprocess-setvalued"):
        rep = load_json(lab.out(key) / "semiprocess.json")
        ok = ok and rep["status"] == "pass" and rep["details"]["eps"] <= 1e-6
        for p in rep["details"]["pairs"]:
            pairs.add((p["t"], p["s"]))
            worst = max(worst, p["semidist"])
    grid = {(t, s) for t in (0.5, 1.0, 2.0) for s in (0.5, 1.0, 2.0)}
    ok = ok and pairs == grid and worst <= 1e-6
    return ok, f"worst semidist={worst:.3g} over {len(pairs)} (t, s) pairs"


# --- 8 ------------------------------------------------------------------------------


@criterion(8, "trajectory attractor sections and translation stability")
def test_criterion_8(lab):
    ok, parts = True, []
    for key in ("c8-trajectory-linear", "c8-trajectory-setvalued"):
        out = lab.out(key)
        sec = load_json(out / "section_consistency.json")
        tr = load_json(out / "translation_stability.json")
        times = sorted(r["t"] for r in sec["details"]["sections"])
        shifts = sorted(r["s"] for r in tr["details"]["shifts"])
        hs = max(r["hausdorff"] for r in sec["details"]["sections"])
        ht = max(r["hausdorff"] for r in tr["details"]["shifts"])
        ok = ok and times == [0.0, 1.0, 5.0] and shifts == [0.25, 0.5, 1.0]
        ok = ok and sec["status"] == tr["status"] == "pass" and hs <= 0.01 and ht <= 0.01
        parts.append(f"{key.split('-')[-1]}: sections {hs:.3g}, shifts {ht:.3g}")
    return ok, "; ".join(parts)


# --- 9 ------------------------------------------------------------------------------


def _orbit_oracle(sys):
    S, p = sys.n_states, len(sys.word)
    seen = set()
    for b in range(sys.table.shape[0]):
        for x0 in range(S):
            for h in range(p):
                x, n = x0, 0
                for _ in range(2 * S * p):
                    if n >= S * p:
                        seen.add(int(x))
                    x = sys.table[b, sys.word[(h + n) % p], x]
                    n += 1
    return seen


@criterion(9, "omega-limit of a finite surrogate equals the orbit oracle")
def test_criterion_9(tmp_path):
    cfg_path = CONFIGS / "discrete.yaml"
    out = tmp_path / "omega"
    assert run(["omega", "--config", str(cfg_path), "--out", str(out)]) == 0
    sys = build_system(Context(load(cfg_path), CONFIGS))
    est = set(np.rint(io.read_cloud(out / "omega.csv").points[:, 0]).astype(int).tolist())
    oracle = _orbit_oracle(sys)
    small = sys.n_states <= 64 and sys.table.shape[1] <= 4
    ok = small and est == oracle and load_json(out / "verdict.json")["status"] == "pass"
    return ok, f"{len(est)} states, oracle {len(oracle)}, states={sys.n_states} symbols={sys.table.shape[1]}"


# --- 10 -----------------------------------------------------------------------------


@criterion(10, "determinism across worker counts 1 and 8")
def test_criterion_10(lab):
    differ = []
    for key in RUNS:
        a, b = (manifest(o) for o in lab.both(key))
        ra, rb = a.pop("runtime"), b.pop("runtime")
        if a != b or (ra["workers"], rb["workers"]) != WORKERS:
            differ.append(key)
    return not differ, f"{len(RUNS) - len(differ)}/{len(RUNS)} commands identical" + (f", differing: {differ}" if differ else "")


# --- 11 -----------------------------------------------------------------------------


def _axioms(d, xs, ys, zs):
    worst = 0.0
    for x, y, z in zip(xs, ys, zs):
        dxy, dyz, dxz = d(x, y), d(y, z), d(x, z)
        worst = max(worst, abs(dxy - d(y, x)), abs(d(x, x)), -min(dxy, 0.0), dxz - dxy - dyz)
    return worst


@criterion(11, "metric layer")
def test_criterion_11():
    rng = np.random.default_rng(11)
    space = PhaseSpace("nse2d", 1e6, 2, 8, 2 * np.pi)
    D = space.coord_dim
    scale = lambda n: 10.0 ** rng.uniform(-3, 1, size=(n, 1))
    a = rng.normal(size=(1000, D)) * scale(1000) / np.sqrt(D)
    b = rng.normal(size=(1000, D)) * scale(1000) / np.sqrt(D)
    ratio = float(np.max(space.weak(a, b) / (space.weight_sum * space.strong(a, b))))
    c = rng.normal(size=(1000, D)) * scale(1000) / np.sqrt(D)
    ws = _axioms(lambda x, y: float(space.strong(x, y)), a, b, c)
    ww = _axioms(lambda x, y: float(space.weak(x, y)), a, b, c)
    small = PhaseSpace("nse2d", 1e6, 2, 2, 2 * np.pi)
    n, dt = 41, 0.1
    paths = [
        Trajectory(small, 0.0, dt, rng.normal(size=(1, small.coord_dim)) * np.cumsum(rng.normal(size=(n, 1)), axis=0) * 0.3)
        for _ in range(3000)
    ]
    wt = _axioms(lambda u, v: traj_metric(u, v, "weak"), paths[0::3], paths[1::3], paths[2::3])
    worst = max(ws, ww, wt)
    ok = ratio <= 1.0 and worst <= 1e-12
    return ok, f"max d_w/(S_K d_s)={ratio:.4g} axiom defect: strong {ws:.2g}, weak {ww:.2g}, trajectory {wt:.2g}"


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
