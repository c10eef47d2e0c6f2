import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractorlab.evsys import Trajectory, run_ensemble
from attractorlab.phase import PhaseSpace, PointCloud, hausdorff
from attractorlab.symbols import Constant, QuasiPeriodic
from attractorlab.toys import LinearProcessSystem, SetValuedSystem, exact_uniform_attractor
from attractorlab.trajspace import (
    TrajAttractorParams,
    check_section_consistency,
    check_translation_stability,
    check_uniform_traj_attraction,
    sup_net,
    tail_bound,
    traj_hausdorff,
    traj_metric,
    trajectory_attractor_estimate,
    translate_traj,
)

TOY = PhaseSpace("toy", 10.0, 1)
DT = 0.01
SIN = QuasiPeriodic(name="sin", coefs=[[1.0]], freqs=[1.0], phases=[0.0])


def traj(values, dt=DT):
    return Trajectory(TOY, 0.0, dt, np.asarray(values, float).reshape(-1, 1))


def const(c, H=16.0):
    return traj(np.full(int(round(H / DT)) + 1, c))


def test_metric_of_identical_trajectories_is_zero():
    u = traj(np.sin(np.arange(1601) * DT))
    assert traj_metric(u, u) == 0.0


def test_metric_between_constants_at_distance_one():
    H = 16.0
    d = traj_metric(const(0.0, H), const(1.0, H))
    assert d == pytest.approx(0.5 * (1 - tail_bound(H)), abs=1e-15)
    assert abs(d - 0.5) <= tail_bound(H)


def test_metric_blockwise_difference():
    t = np.arange(801) * DT
    bump = np.where((t >= 2) & (t <= 3), np.sin(np.pi * (t - 2)), 0.0)
    u, v = traj(np.zeros_like(t)), traj(bump)
    # direct summation over blocks T = 1..8 of 2^-T s_T / (1 + s_T)
    oracle = 0.0
    for T in range(1, 9):
        s = max(abs(bump[i]) for i in range(len(t)) if t[i] <= T + 1e-12)
        oracle += 2.0**-T * s / (1 + s)
    assert traj_metric(u, v) == pytest.approx(oracle, abs=1e-15)
    assert oracle == pytest.approx(sum(2.0**-T * 0.5 for T in range(3, 9)))


def test_metric_requires_matching_horizons():
    with pytest.raises(ValueError):
        traj_metric(const(0.0, 4.0), const(0.0, 5.0))
    with pytest.raises(ValueError):
        traj_metric(const(0.0, 0.5), const(1.0, 0.5))


paths = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(
    lambda c: traj(c[0] + c[1] * np.sin(np.arange(301) * DT * c[2]))
)


@given(paths, paths, paths)
@settings(max_examples=40)
def test_metric_axioms(u, v, w):
    duv, dvw, duw = traj_metric(u, v), traj_metric(v, w), traj_metric(u, w)
    assert duv == traj_metric(v, u)
    assert 0 <= duv < 1
    assert duw <= duv + dvw + 1e-15


def test_translate_examples():
    sys = LinearProcessSystem(g=SIN, dt=DT)
    u = run_ensemble(sys, PointCloud(sys.space, [[1.0]]), np.arange(0, 501), sys.sample_symbols(1)).member(0)
    assert np.array_equal(translate_traj(u, 0.0).samples, u.samples)
    moved = translate_traj(u, 1.0)
    assert np.array_equal(moved.samples, u.samples[100:])
    assert moved.t0 == 0.0 and moved.t_end == pytest.approx(u.t_end - 1.0)
    c = const(0.3, 4.0)
    assert np.array_equal(translate_traj(c, 2.0).samples[:, 0], np.full(201, 0.3))
    with pytest.raises(ValueError):
        translate_traj(c, 3.5)
    with pytest.raises(ValueError):
        translate_traj(c, 0.005)


@given(st.integers(0, 200), st.integers(0, 200))
@settings(max_examples=30)
def test_translate_semigroup(a, b):
    u = traj(np.cos(np.arange(601) * DT))
    lhs = translate_traj(translate_traj(u, a * DT), b * DT)
    rhs = translate_traj(u, (a + b) * DT)
    assert np.array_equal(lhs.samples, rhs.samples)


def test_sup_net_separation():
    rng = np.random.default_rng(0)
    trajs = rng.normal(size=(60, 20, 1))
    keep = sup_net(TOY, trajs, 1.0, "strong")
    kept = trajs[keep]
    for i in range(len(kept)):
        for j in range(i):
            assert np.max(np.abs(kept[i] - kept[j])) >= 0.5
    # every candidate is covered
    for x in trajs:
        assert np.min(np.max(np.abs(kept - x), axis=(1, 2))) < 0.5


def test_setvalued_trajectory_attractor_is_constants():
    sys = SetValuedSystem(m=21)
    est = trajectory_attractor_estimate(sys, TrajAttractorParams(n_initial=2, T_burn=20.0, H=3.0, offset_span=0.5, tol=0.01))
    assert np.max(np.ptp(est.members()[:, :, 0], axis=1)) < 1e-8
    net = sys.exact_attractor()
    for t in (0.0, 1.5, 3.0):
        assert hausdorff(est.section(t), net) <= 1e-8


def test_toy_linear_sections_and_translation():
    sys = LinearProcessSystem(g=SIN, dt=DT, n_symbols=4)
    p = TrajAttractorParams(n_initial=2, T_burn=25.0, H=4.0, offset_span=2 * np.pi, offset_step=0.02, tol=0.01, metric="strong")
    est = trajectory_attractor_estimate(sys, p)
    exact = exact_uniform_attractor(sys, 1e-3)
    rep = check_section_consistency(est, exact, [0.0, 1.0, 4.0], 0.01)
    assert rep.passed, rep.details
    rep = check_translation_stability(est, [0.25, 0.5, 1.0], 0.01, "strong")
    assert rep.passed, rep.details


def test_unforced_trajectory_attractor_is_the_zero_trajectory():
    sys = LinearProcessSystem(g=Constant(value=np.zeros(1)), dt=DT)
    est = trajectory_attractor_estimate(sys, TrajAttractorParams(n_initial=5, T_burn=40.0, H=2.0, offset_span=1.0, tol=0.01))
    assert len(est) == 1 and np.max(np.abs(est.members())) < 1e-15


def test_traj_hausdorff_symmetric():
    A = np.stack([np.full((201, 1), c) for c in (0.0, 1.0)])
    B = np.stack([np.full((201, 1), 0.0)])
    d = traj_hausdorff(TOY, A, B, DT, "strong")
    assert d == traj_hausdorff(TOY, B, A, DT, "strong") == pytest.approx(0.5 * (1 - 0.25))


def test_uniform_attraction_trivial():
    sys = LinearProcessSystem(g=Constant(value=np.zeros(1)), dt=DT)
    est = trajectory_attractor_estimate(sys, TrajAttractorParams(n_initial=3, T_burn=40.0, H=2.0, offset_span=1.0, tol=0.01))
    rep = check_uniform_traj_attraction(sys, est, 0.01, A=PointCloud(sys.space, [[0.0]]), t_max=2.0)
    assert rep.passed and rep.details["t0"] == 0.0


def test_uniform_attraction_toy_linear_rate():
    sys = LinearProcessSystem(g=SIN, dt=DT, n_symbols=8)
    p = TrajAttractorParams(n_initial=2, T_burn=25.0, H=3.0, offset_span=2 * np.pi, offset_step=0.01, tol=0.002, metric="weak")
    est = trajectory_attractor_estimate(sys, p)
    A = PointCloud(sys.space, [[2.0], [-2.0]])
    rep = check_uniform_traj_attraction(sys, est, 0.01, "weak", A=A, t_max=12.0, n_symbols=4)
    # the metric is at most sup |u - v| / 2 summed with weight < 1, and transients are <= 2.71 e^{-t}
    t0 = rep.details["t0"]
    assert rep.passed
    assert t0 <= 1.25 * np.log(2.71 / 0.01) + DT
    assert t0 >= np.log(1.29 * 0.5 / 0.01) / 1.25 - 1.0


def test_uniform_attraction_setvalued_strong():
    sys = SetValuedSystem(m=21)
    est = trajectory_attractor_estimate(sys, TrajAttractorParams(n_initial=2, T_burn=20.0, H=2.0, offset_span=0.1, tol=0.005))
    eps = 0.01
    rep = check_uniform_traj_attraction(sys, est, eps, "strong", A=PointCloud(sys.space, [[2.0], [-2.0]]), t_max=10.0)
    t0 = rep.details["t0"]
    predicted = np.log(2 / eps)
    assert predicted / 1.25 <= t0 <= predicted * 1.25 + DT
