"""Scenario orchestration: build systems from a :class:`RunConfig` and run commands.

Each ``cmd_*`` function writes its artifacts through an :class:`Output` and
returns a mapping of check name to status (``pass``/``fail``/``info``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig
from .evsys import (
    AttractorParams,
    Ensemble,
    EvolutionarySystem,
    Trajectory,
    attractor_estimate,
    check_semiprocess_inclusion,
    check_tracking,
    kernel_estimate,
    omega_limit_estimate,
    run_ensemble,
)
from .nse.energy import EnergyLedger, absorbing_radius
from .nse.energy import steady_state as nse_steady_state
from .nse.fields import SpectralField
from .nse.integrate import NSEConfig, integrate
from .nse.system import NSESystem, coeffs_to_coords, spectral_force
from .phase import PhaseSpace, PointCloud, hausdorff
from .symbols import (
    Constant,
    HullUnavailable,
    QuasiPeriodic,
    SignalBatch,
    SignalError,
    SymbolSignal,
    normality_profile,
    read_tabulated_csv,
    substream,
    translation_bound,
)
from .toys import (
    DiscreteSurrogate,
    LinearProcessSystem,
    SetValuedSystem,
    discrete_omega_oracle,
    exact_uniform_attractor,
)
from .trajspace import (
    TrajAttractorParams,
    check_section_consistency,
    check_translation_stability,
    trajectory_attractor_estimate,
)


class MissingPrerequisite(FileNotFoundError):
    """An input file named by the configuration or the command line is absent."""


@dataclass
class Output:
    """Output directory that remembers every file written through it."""

    root: Path
    files: list = field(default_factory=list)

    def __post_init__(self):
        self.root = Path(self.root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        p = self.root / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def json(self, name: str, obj) -> None:
        self.files.append(io.write_json(self.path(name), io._jsonable(obj)))

    def cloud(self, name: str, cloud: PointCloud) -> None:
        self.files.extend(io.write_cloud(self.path(name), cloud))

    def ensemble(self, name: str, ens: Ensemble, extra: dict | None = None) -> None:
        self.files.append(io.write_ensemble(self.path(name), ens, extra))


@dataclass
class Context:
    cfg: RunConfig
    base: Path = Path(".")
    workers: int | None = None
    ensemble_path: Path | None = None


# --- building -----------------------------------------------------------------


def _toy_symbol(ctx: Context) -> SymbolSignal:
    s, dim = ctx.cfg.symbol, ctx.cfg.toy.dim
    if s.kind == "zero":
        return Constant(value=np.zeros(dim), name=s.name)
    if s.kind == "constant":
        v = np.asarray(s.value if s.value is not None else [0.0] * dim, float)
        if v.shape != (dim,):
            raise ConfigError("symbol.value", f"expected {dim} components")
        return Constant(value=v, name=s.name)
    if s.kind == "quasi-periodic":
        if not s.terms:
            raise ConfigError("symbol.terms", "quasi-periodic symbols need at least one term")
        coefs, freqs, phases = [], [], []
        for i, term in enumerate(s.terms):
            if not isinstance(term, dict) or "frequency" not in term:
                raise ConfigError(f"symbol.terms[{i}]", "each term needs a frequency")
            a = np.broadcast_to(np.asarray(term.get("amplitude", 1.0), float), (dim,))
            coefs.append(a)
            freqs.append(float(term["frequency"]))
            phases.append(float(term.get("phase", 0.0)))
        return QuasiPeriodic(name=s.name, coefs=np.stack(coefs), freqs=freqs, phases=phases)
    path = (ctx.base / s.path).resolve()
    if not path.exists():
        raise MissingPrerequisite(f"tabulated symbol file {path} does not exist")
    try:
        g = read_tabulated_csv(path, name=s.name)
    except (SignalError, ValueError) as exc:
        raise ConfigError("symbol.path", str(exc)) from exc
    if g.shape != (dim,):
        raise ConfigError("symbol.path", f"table has {g.shape[0]} value columns, expected {dim}")
    return g


def nse_config(cfg: RunConfig) -> NSEConfig:
    n = cfg.nse
    try:
        return NSEConfig(n.nu, n.L, n.K, n.dt, 2 if cfg.instance == "nse2d" else 3, n.integrator, n.dealias)
    except ValueError as exc:
        raise ConfigError("nse", str(exc)) from exc


def nse_force(cfg: RunConfig) -> SymbolSignal:
    c, s = nse_config(cfg), cfg.symbol
    if s.kind == "tabulated":
        raise ConfigError("symbol.kind", "NSE forces are given as spectral terms")
    if s.kind == "zero":
        return spectral_force(c.dim, c.K, c.L, [], s.name)
    terms = []
    for i, term in enumerate(s.terms):
        if not isinstance(term, dict) or "mode" not in term:
            raise ConfigError(f"symbol.terms[{i}]", "each term needs a mode")
        t = dict(term)
        if s.kind == "constant":
            t["frequency"] = 0.0
        terms.append(t)
    try:
        return spectral_force(c.dim, c.K, c.L, terms, s.name)
    except (KeyError, ValueError) as exc:
        raise ConfigError("symbol.terms", str(exc)) from exc


def nse_radius(cfg: RunConfig) -> tuple[float, float, bool]:
    """``(absorbing radius, translation bound, unforced)`` from the force."""
    c, g = nse_config(cfg), nse_force(cfg)
    G = translation_bound(g)
    R, unforced = absorbing_radius(c, G)
    return R, G, unforced


def build_system(ctx: Context, sampler_mode: str | None = None, radius: float | None = None) -> EvolutionarySystem:
    cfg = ctx.cfg
    sm = sampler_mode or cfg.sampler.mode
    if cfg.instance == "toy-linear":
        t = cfg.toy
        return LinearProcessSystem(
            nu=t.nu,
            g=_toy_symbol(ctx),
            radius=t.radius,
            dt=t.dt,
            sampler_mode=sm,
            span=cfg.sampler.span,
            distribution=cfg.sampler.distribution,
            n_symbols=cfg.sampler.n_symbols,
            seed=cfg.seed,
        )
    if cfg.instance == "toy-setvalued":
        s = cfg.setvalued
        return SetValuedSystem(m=s.branches, radius=s.radius, dt=s.dt, seed=cfg.seed)
    if cfg.instance == "discrete":
        d = cfg.discrete
        try:
            if d.table is not None:
                return DiscreteSurrogate(table=np.asarray(d.table), word=tuple(d.word or (0,)), seed=cfg.seed)
            rng = substream(d.table_seed, "discrete/table")
            sys = DiscreteSurrogate.random(rng, d.states, d.symbols, d.period, d.branches)
            sys.seed = cfg.seed
            return sys
        except ValueError as exc:
            raise ConfigError("discrete", str(exc)) from exc
    c = nse_config(cfg)
    g = nse_force(cfg)
    if radius is None:
        if cfg.nse.radius is not None:
            radius = cfg.nse.radius
        else:
            R, _, unforced = nse_radius(cfg)
            radius = cfg.nse.fallback_radius if unforced else R
    return NSESystem(
        cfg=c,
        g=g,
        radius=radius,
        sampler_mode=sm,
        span=cfg.sampler.span,
        distribution=cfg.sampler.distribution,
        n_symbols=cfg.sampler.n_symbols,
        seed=cfg.seed,
    )


def initial_cloud(ctx: Context, sys: EvolutionarySystem, n: int | None = None) -> PointCloud:
    e = ctx.cfg.ensemble
    if e.points is not None and n is None:
        pts = np.asarray(e.points, float).reshape(len(e.points), -1)
        return PointCloud(sys.space, pts, ctx.cfg.metric, {"sample": "explicit"})
    return PointCloud(sys.space, sys.sample_X(n or e.n_initial), ctx.cfg.metric, {"sample": "X"})


def _attractor_params(cfg: RunConfig, certify: bool = True) -> AttractorParams:
    h = cfg.horizons
    return AttractorParams(
        n_initial=cfg.ensemble.n_initial,
        n_symbols=cfg.sampler.n_symbols,
        T_burn=h.burn_in,
        T_collect=h.collect,
        tol=cfg.tolerances.net,
        stride=h.stride,
        certify_eps=(cfg.tolerances.attract_eps,) if certify else (),
        t_max=h.t_max,
    )


def oracle_cloud(ctx: Context, sys: EvolutionarySystem) -> PointCloud | None:
    """Exact attractor (or omega-limit of X) where one is available."""
    cfg = ctx.cfg
    if isinstance(sys, LinearProcessSystem):
        try:
            return exact_uniform_attractor(sys, resolution=cfg.tolerances.oracle / 10)
        except HullUnavailable:
            return None
    if isinstance(sys, SetValuedSystem):
        pts = np.linspace(-1.0, 1.0, int(np.ceil(2.0 / (cfg.tolerances.oracle / 10))) + 1)[:, None]
        return PointCloud(sys.space, pts, "strong", {"oracle": "interval [-1, 1]"})
    if isinstance(sys, DiscreteSurrogate):
        states = sorted(discrete_omega_oracle(sys))
        return PointCloud(sys.space, np.asarray(states, float)[:, None], "strong", {"oracle": "cycle states"})
    if isinstance(sys, NSESystem):
        if sys.unforced:
            return PointCloud(sys.space, np.zeros((1, sys.space.coord_dim)), cfg.metric, {"oracle": "zero"})
        if isinstance(sys.g, Constant):
            try:
                u = nse_steady_state(sys.cfg, sys.g.value)
            except RuntimeError:
                return None
            return PointCloud(sys.space, coeffs_to_coords(u)[None], cfg.metric, {"oracle": "steady state"})
    return None


def _compare(name: str, est: PointCloud, oracle: PointCloud | None, tol: float, exact: bool = False) -> dict:
    if oracle is None:
        return {"check": name, "status": "info", "witnesses": [], "details": {"oracle": None}}
    if exact:
        a = set(np.rint(est.points[:, 0]).astype(int).tolist())
        b = set(np.rint(oracle.points[:, 0]).astype(int).tolist())
        ok = a == b
        return {
            "check": name,
            "status": "pass" if ok else "fail",
            "witnesses": [] if ok else [{"estimate_only": sorted(a - b), "oracle_only": sorted(b - a)}],
            "details": {"estimate": sorted(a), "oracle": sorted(b)},
        }
    d = hausdorff(est, oracle, est.metric_tag)
    return {
        "check": name,
        "status": "pass" if d <= tol else "fail",
        "witnesses": [] if d <= tol else [{"hausdorff": d}],
        "details": {"hausdorff": d, "tol": tol, "oracle_points": len(oracle)},
    }


# --- commands -----------------------------------------------------------------


def cmd_simulate(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    h = cfg.horizons
    verdicts = {}
    extra = {}
    if cfg.instance in ("nse2d", "nse3d"):
        R, G, unforced = nse_radius(cfg)
        factor = cfg.ensemble.initial_norm_factor
        R_ball = cfg.nse.fallback_radius if unforced else R
        radius = R_ball * max(1.0, factor or 1.0) if cfg.nse.radius is None else cfg.nse.radius
        sys = build_system(ctx, radius=radius)
        A = initial_cloud(ctx, sys)
        if factor is not None:
            nrm = sys.space.norm(A.points)
            nrm[nrm == 0] = 1.0
            A = A.with_points(A.points * (factor * R_ball / nrm)[:, None], initial_norm=factor * R_ball)
        extra = {"absorbing_radius": R, "translation_bound": G, "unforced": unforced}
    else:
        sys = build_system(ctx)
        A = initial_cloud(ctx, sys)
    n = sys.steps(h.t_end)
    steps = np.arange(0, n + 1, h.record_stride)
    if steps[-1] != n:
        steps = np.append(steps, n)
    ens = run_ensemble(sys, A, steps, sys.sample_symbols(), workers=ctx.workers)
    out.ensemble("ensemble.bin", ens, extra)
    norms = sys.space.norm(ens.samples)
    times = ens.times
    summary = {"members": len(ens), "samples": len(times), "final_norm_max": float(norms[:, -1].max())}
    if cfg.instance in ("nse2d", "nse3d") and not extra["unforced"]:
        R = extra["absorbing_radius"]
        inside = norms <= R
        # first sampled time from which the member stays inside the ball
        later_out = np.flip(np.logical_or.accumulate(np.flip(~inside, axis=1), axis=1), axis=1)
        entered = ~later_out
        rows = []
        for i in range(len(ens)):
            k = np.nonzero(entered[i])[0]
            first_in = np.nonzero(inside[i])[0]
            rows.append(
                {
                    "member": i,
                    "initial_norm": float(norms[i, 0]),
                    "t_first_inside": float(times[first_in[0]]) if len(first_in) else None,
                    "t_enter": float(times[k[0]]) if len(k) else None,
                }
            )
        ok = all(r["t_enter"] is not None and r["t_enter"] == r["t_first_inside"] for r in rows)
        rep = {
            "check": "absorbing-ball",
            "status": "pass" if ok else "fail",
            "witnesses": [r for r in rows if r["t_enter"] is None or r["t_enter"] != r["t_first_inside"]],
            "details": {"radius": R, "t_end": float(times[-1]), "members": rows, "max_norm_after_entry": _after_entry(norms, entered)},
        }
        out.json("absorbing.json", rep)
        verdicts["absorbing-ball"] = rep["status"]
    out.json("summary.json", summary)
    return verdicts


def _after_entry(norms: np.ndarray, entered: np.ndarray) -> float | None:
    vals = norms[entered]
    return float(vals.max()) if vals.size else None


def cmd_omega(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    h = cfg.horizons
    sys = build_system(ctx)
    A = initial_cloud(ctx, sys)
    cloud = omega_limit_estimate(
        sys, A, cfg.metric, h.burn_in, h.collect, cfg.tolerances.net, stride=h.stride, workers=ctx.workers
    )
    out.cloud("omega.csv", cloud)
    rep = None
    if isinstance(sys, DiscreteSurrogate) and len(A) == sys.n_states:
        rep = _compare("omega-oracle", cloud, oracle_cloud(ctx, sys), 0.0, exact=True)
    elif cfg.ensemble.points is None:
        rep = _compare("omega-oracle", cloud, oracle_cloud(ctx, sys), cfg.tolerances.oracle)
    verdicts = {}
    if rep is not None:
        out.json("verdict.json", rep)
        verdicts[rep["check"]] = rep["status"]
    return verdicts


def cmd_attractor(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    sys = build_system(ctx)
    est = attractor_estimate(sys, cfg.metric, _attractor_params(cfg), workers=ctx.workers)
    out.cloud("attractor.csv", est.cloud)
    certs = [{"eps": e, "t0": t0} for e, t0 in est.certificates]
    cert_ok = all(c["t0"] is not None for c in certs)
    out.json(
        "certificates.json",
        {
            "check": "attracting",
            "status": "pass" if cert_ok else "fail",
            "witnesses": [c for c in certs if c["t0"] is None],
            "details": {"certificates": certs, "weak_agreement": est.agreement, "horizon": est.horizon},
        },
    )
    rep = _compare("attractor-oracle", est.cloud, oracle_cloud(ctx, sys), cfg.tolerances.oracle, isinstance(sys, DiscreteSurrogate))
    out.json("verdict.json", rep)
    return {"attracting": "pass" if cert_ok else "fail", rep["check"]: rep["status"]}


def cmd_trajectory_attractor(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    h, tol = cfg.horizons, cfg.tolerances
    sys = build_system(ctx)
    params = TrajAttractorParams(
        n_initial=cfg.ensemble.n_initial,
        n_symbols=cfg.sampler.n_symbols,
        T_burn=h.burn_in,
        H=h.H,
        offset_span=h.offset_span,
        offset_step=h.offset_step,
        max_shift=max([h.max_shift] + [float(s) for s in cfg.checks.shifts]),
        tol=tol.net,
        metric="weak",
    )
    est = trajectory_attractor_estimate(sys, params, workers=ctx.workers)
    members = est.members()
    ids = [est.symbol_ids[t] for t in est.picks[:, 0]]
    X0 = PointCloud(sys.space, members[:, 0])
    out.ensemble(
        "members.bin",
        Ensemble(sys.space, 0.0, est.dt, members, ids, X0, cfg.seed, est.H, {"picks": est.picks.tolist(), **est.meta}),
    )
    att = attractor_estimate(sys, cfg.metric, _attractor_params(cfg, certify=False), workers=ctx.workers)
    out.cloud("attractor.csv", att.cloud)
    index = []
    for i, t in enumerate(cfg.checks.section_times):
        name = f"sections/section_{i:02d}.csv"
        out.cloud(name, est.section(float(t)))
        index.append({"t": float(t), "file": name})
    out.json("sections.json", {"H": est.H, "dt": est.dt, "members": len(est), "sections": index})
    sec = check_section_consistency(est, att.cloud, cfg.checks.section_times, tol.section, cfg.metric)
    tr = check_translation_stability(est, cfg.checks.shifts, tol.translation, "weak")
    out.json("section_consistency.json", sec.to_dict())
    out.json("translation_stability.json", tr.to_dict())
    return {sec.check: sec.status, tr.check: tr.status}


def cmd_info(ctx: Context) -> dict:
    cfg = ctx.cfg
    sys = build_system(ctx)
    sp = sys.space
    info = {
        "instance": cfg.instance,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "space": sp.to_dict(),
        "coordinates": sp.coord_dim,
        "dt": sys.dt,
        "weak_weight_sum": sp.weight_sum,
        "weak_tail_bound": sp.weak_tail_bound,
    }
    if isinstance(sys, NSESystem):
        R, G, unforced = nse_radius(cfg)
        info.update(
            grid=sys.cfg.grid,
            lambda1=sys.cfg.lambda1,
            integrator=sys.cfg.integrator,
            order=sys.cfg.order,
            translation_bound=G,
            absorbing_radius=R,
            unforced=unforced,
        )
    elif isinstance(sys, LinearProcessSystem):
        info.update(translation_bound=translation_bound(sys.g), autonomous=sys.autonomous)
    elif isinstance(sys, SetValuedSystem):
        info.update(branches=sys.m)
    else:
        info.update(states=sys.n_states, word=list(sys.word), branches=int(sys.table.shape[0]))
    return info


# --- checks -------------------------------------------------------------------


def check_energy(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    if cfg.instance not in ("nse2d", "nse3d"):
        raise ConfigError("instance", "the energy check needs an NSE instance")
    c = nse_config(cfg)
    g = nse_force(cfg)
    force = None if isinstance(g, Constant) and g.is_zero else g
    rng = substream(cfg.seed, "energy/initial")
    u0 = SpectralField.random(c.dim, c.K, c.L, rng, slope=1.0, norm=cfg.checks.initial_norm)
    t_end = cfg.horizons.t_end
    runs = []
    dts = [c.dt, c.dt / 2] if cfg.checks.energy_refine else [c.dt]
    for dt in dts:
        cc = NSEConfig(c.nu, c.L, c.K, dt, c.dim, c.integrator, c.dealias)
        n = int(round(t_end / dt))
        ledger = EnergyLedger(cc, force)
        integrate(u0.coeffs[None], cc, None if force is None else SignalBatch([force]), [n], observer=ledger)
        res = ledger.result()
        runs.append({"dt": dt, "steps": n, "max_residual": res.max_pair, "max_relative": res.max_relative})
    ok = runs[0]["max_relative"] <= cfg.tolerances.energy
    details = {"tol": cfg.tolerances.energy, "runs": runs, "order": c.order, "integrator": c.integrator, "t_end": t_end}
    witnesses = [] if ok else [runs[0]]
    if len(runs) == 2:
        ratio = runs[0]["max_residual"] / runs[1]["max_residual"] if runs[1]["max_residual"] > 0 else float("inf")
        target = 2.0**c.order
        conv = target / 2 <= ratio <= target * 2
        details.update(ratio=ratio, expected_ratio=target, convergence=conv)
        if not conv:
            witnesses.append({"ratio": ratio, "expected": target})
        ok = ok and conv
    rep = {"check": "energy", "status": "pass" if ok else "fail", "witnesses": witnesses, "details": details}
    out.json("energy.json", rep)
    return {"energy": rep["status"]}


def _tracked(ctx: Context, sys: EvolutionarySystem, t_needed: float) -> list[Trajectory]:
    if ctx.ensemble_path is not None:
        p = Path(ctx.ensemble_path)
        if not p.exists():
            raise MissingPrerequisite(f"ensemble file {p} does not exist")
        ens = io.read_ensemble(p)
        if ens.space != sys.space:
            raise ConfigError("--ensemble", "ensemble phase space does not match the configuration")
        return list(ens)
    A = initial_cloud(ctx, sys, ctx.cfg.checks.tracking_points)
    steps = np.arange(0, sys.steps(t_needed) + 1)
    ens = run_ensemble(sys, A, steps, sys.sample_symbols(), workers=ctx.workers)
    return list(ens)


def check_tracking_cmd(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    ch, h = cfg.checks, cfg.horizons
    sys = build_system(ctx)
    eps = cfg.tolerances.tracking
    t_star = ch.t_star if ch.t_star is not None else float(np.log(2 * sys.space.radius / eps) + 1)
    t_star = float(np.ceil(t_star / sys.dt - 1e-9) * sys.dt)  # first grid time not before t_star
    if h.kernel_window < ch.T:
        raise ConfigError("horizons.kernel_window", "kernel window must cover the tracking horizon")
    us = _tracked(ctx, sys, t_star + ch.T)
    A = initial_cloud(ctx, sys, ch.kernel_points)
    kernel = kernel_estimate(sys, A, h.kernel_T, h.kernel_window, stride=1, workers=ctx.workers)
    rows, failed = [], []
    for i, u in enumerate(us):
        rep = check_tracking(u, kernel, eps, ch.T, t_star, ch.tracking_metric)
        w = {"member": i, "symbol": u.symbol_id, **{k: v for k, v in rep.witnesses[0].items() if k != "member"}}
        w["kernel_member"] = rep.witnesses[0]["member"]
        rows.append(w)
        if not rep.passed:
            failed.append(w)
    rep = {
        "check": "tracking",
        "status": "pass" if not failed else "fail",
        "witnesses": failed[:50],
        "details": {
            "eps": eps,
            "t_star": t_star,
            "T": ch.T,
            "metric": ch.tracking_metric,
            "tracked": len(us),
            "kernel_members": len(kernel),
            "worst": max(r["sup_distance"] for r in rows),
        },
    }
    out.json("tracking.json", rep)
    return {"tracking": rep["status"]}


def check_normality_cmd(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    if cfg.instance in ("nse2d", "nse3d"):
        g = nse_force(cfg)
    elif cfg.instance == "toy-linear":
        g = _toy_symbol(ctx)
    else:
        raise ConfigError("instance", "normality needs a forced instance (toy-linear or NSE)")
    prof = normality_profile(g, [float(e) for e in cfg.checks.eps_grid], window=cfg.checks.normality_window)
    ok = prof.normal_on_window
    rep = {
        "check": "normality",
        "status": "pass" if ok else "fail",
        "witnesses": [{"eps": e, "delta": d} for e, d in prof.table if d <= 0],
        "details": {**prof.to_dict(), "translation_bound": translation_bound(g)},
    }
    out.json("normality.json", rep)
    return {"normality": rep["status"]}


def check_semiprocess_cmd(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    sys = build_system(ctx)
    A = initial_cloud(ctx, sys, cfg.checks.semiprocess_points)
    rows = []
    ok = True
    for t in cfg.checks.semiprocess_times:
        for s in cfg.checks.semiprocess_times:
            rep = check_semiprocess_inclusion(
                sys, A, float(t), float(s), cfg.tolerances.semiprocess,
                resample_branches=cfg.checks.resample_branches, workers=ctx.workers,
            )
            rows.append({"t": float(t), "s": float(s), "status": rep.status, **rep.details})
            ok = ok and rep.passed
    rep = {
        "check": "semiprocess",
        "status": "pass" if ok else "fail",
        "witnesses": [r for r in rows if r["status"] != "pass"],
        "details": {"eps": cfg.tolerances.semiprocess, "pairs": rows},
    }
    out.json("semiprocess.json", rep)
    return {"semiprocess": rep["status"]}


def check_closure_cmd(ctx: Context, out: Output) -> dict:
    cfg = ctx.cfg
    params = _attractor_params(cfg, certify=False)
    clouds = {}
    for mode in ("translates", "hull-net"):
        sys = build_system(ctx, sampler_mode=mode)
        try:
            est = attractor_estimate(sys, cfg.metric, params, workers=ctx.workers)
        except HullUnavailable as exc:
            raise ConfigError("symbol.kind", f"closure equivalence needs a hull: {exc}") from exc
        clouds[mode] = est.cloud
        out.cloud(f"attractor_{mode}.csv", est.cloud)
    gap = hausdorff(clouds["translates"], clouds["hull-net"], cfg.metric)
    ok = gap <= cfg.tolerances.closure
    rep = {
        "check": "closure-equivalence",
        "status": "pass" if ok else "fail",
        "witnesses": [] if ok else [{"hausdorff": gap}],
        "details": {"hausdorff": gap, "tol": cfg.tolerances.closure, "points": {k: len(v) for k, v in clouds.items()}},
    }
    out.json("closure.json", rep)
    return {"closure-equivalence": rep["status"]}


CHECKS = {
    "energy": check_energy,
    "tracking": check_tracking_cmd,
    "normality": check_normality_cmd,
    "semiprocess": check_semiprocess_cmd,
    "closure-equivalence": check_closure_cmd,
}

COMMANDS = {
    "simulate": cmd_simulate,
    "omega": cmd_omega,
    "attractor": cmd_attractor,
    "trajectory-attractor": cmd_trajectory_attractor,
}


def phase_space_of(cfg: RunConfig) -> PhaseSpace:
    return build_system(Context(cfg)).space
