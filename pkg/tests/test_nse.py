import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attractorlab.nse.bilinear import TruncationMismatch, bilinear_B, bilinear_direct
from attractorlab.evsys import Trajectory
from attractorlab.nse.energy import EnergyLedger, absorbing_radius, energy_budget, steady_state
from attractorlab.nse.fields import FieldError, SpectralField, leray_project, stokes_eigenvalues
from attractorlab.nse.integrate import NSEConfig, integrate
from attractorlab.nse.modes import grid_size, mode_set
from attractorlab.phase import PhaseSpace
from attractorlab.nse.system import spectral_force
from attractorlab.symbols import translation_bound


def shear(K, L, a=1.0):
    return SpectralField.from_modes(2, K, L, {(0, 1): [a, 0.0]})


@pytest.mark.parametrize("L", [2 * np.pi, np.pi])
def test_norms_of_a_single_mode(L):
    a = 0.3 - 0.4j
    u = SpectralField.from_modes(2, 4, L, {(1, 0): [0.0, a]})
    assert u.l2_norm() == pytest.approx(np.sqrt(2) * abs(a), rel=1e-14)
    lam = (2 * np.pi / L) ** 2
    assert u.enstrophy_norm() == pytest.approx(np.sqrt(lam) * u.l2_norm(), rel=1e-14)
    assert u.dual_norm() == pytest.approx(u.l2_norm() / np.sqrt(lam), rel=1e-14)
    # physical-space quadrature is exact for trigonometric polynomials
    N = 16
    phys = u.to_physical(N)
    assert np.sum(phys**2) * (L / N) ** 2 == pytest.approx(u.l2_norm() ** 2, rel=1e-12)


def test_leray_projection_example():
    modes = mode_set(3, 2)
    raw = np.zeros((modes.n, 3), complex)
    i, _ = modes.index((1, 0, 0))
    raw[i] = [1.0, 1.0, 0.0]
    u = leray_project(raw, 3, 2, 2 * np.pi)
    assert np.allclose(u.coeffs[i], [0.0, 1.0, 0.0], atol=1e-15)
    again = leray_project(u.coeffs, 3, 2, 2 * np.pi)
    assert np.array_equal(again.coeffs, u.coeffs)
    u.validate()


def test_validate_rejects_compressible_fields():
    with pytest.raises(FieldError):
        SpectralField.from_modes(2, 2, 2 * np.pi, {(1, 0): [1.0, 0.0]}).validate()
    with pytest.raises(FieldError):
        SpectralField(2, 2, 1.0, np.zeros((3, 2)))


def test_shear_flow_is_a_nonlinear_fixed_point():
    u = shear(6, 2 * np.pi)
    assert np.max(np.abs(bilinear_B(u, u).coeffs)) < 1e-14


def test_mismatched_truncations_are_refused():
    with pytest.raises(TruncationMismatch):
        bilinear_B(shear(4, 1.0), shear(5, 1.0))


fields = st.tuples(st.sampled_from([2, 3]), st.integers(0, 2**31 - 1))


@given(fields)
@settings(max_examples=20)
def test_trilinear_skew_symmetry(case):
    dim, seed = case
    K, L = (5, 2 * np.pi) if dim == 2 else (3, 3.0)
    rng = np.random.default_rng(seed)
    u, v, w = (SpectralField.random(dim, K, L, rng, slope=1.0) for _ in range(3))
    b1 = bilinear_B(u, v).inner(w)
    b2 = bilinear_B(u, w).inner(v)
    scale = u.enstrophy_norm() * v.l2_norm() * w.l2_norm()
    assert abs(b1 + b2) <= 1e-12 * scale
    assert abs(bilinear_B(u, v).inner(v)) <= 1e-12 * scale


@pytest.mark.parametrize("dim,K", [(2, 4), (3, 2)])
def test_pseudospectral_matches_triad_sum(dim, K):
    rng = np.random.default_rng(7)
    L = 2 * np.pi if dim == 2 else 1.5
    for _ in range(3):
        u, v = SpectralField.random(dim, K, L, rng), SpectralField.random(dim, K, L, rng)
        fast, slow = bilinear_B(u, v).coeffs, bilinear_direct(u, v).coeffs
        assert np.max(np.abs(fast - slow)) <= 1e-12 * max(1.0, np.max(np.abs(slow)))


def test_two_mode_triad():
    """u = (0, a) on k=(1,0) and v = (b, 0) on q=(0,1): B lands on (1,1) and (1,-1) only."""
    L = 2 * np.pi
    u = SpectralField.from_modes(2, 3, L, {(1, 0): [0.0, 1.0]})
    v = SpectralField.from_modes(2, 3, L, {(0, 1): [1.0, 0.0]})
    b = bilinear_B(u, v)
    modes = b.modes
    nz = {tuple(modes.kappa[i]) for i in np.nonzero(np.abs(b.coeffs).sum(axis=1) > 1e-14)[0]}
    assert nz == {(1, 1), (-1, 1)}
    assert np.allclose(b.coeffs, bilinear_direct(u, v).coeffs, atol=1e-15)


def test_grid_sizes():
    # even and 7-smooth: 25 -> 26 = 2 * 13 is skipped
    assert grid_size(8) == 28 and grid_size(21) == 64
    assert grid_size(8, "none") == 18


def test_if_rk4_integrates_stokes_decay_exactly():
    cfg = NSEConfig(nu=0.1, L=2 * np.pi, K=4, dt=0.05, integrator="if-rk4")
    u = shear(4, cfg.L, 2.0)
    out = integrate(u.coeffs[None], cfg, None, [0, 40])
    lam = stokes_eigenvalues(u.modes, cfg.L)[:, None]
    exact = u.coeffs * np.exp(-cfg.nu * lam * 2.0)
    assert np.max(np.abs(out[-1, 0] - exact)) <= 1e-14


@pytest.mark.parametrize("integrator", ["if-rk4", "imex-cn"])
def test_stokes_steady_state(integrator):
    cfg = NSEConfig(nu=0.5, L=2 * np.pi, K=4, dt=0.01, integrator=integrator)
    g = shear(4, cfg.L, 0.7).coeffs
    lam = stokes_eigenvalues(mode_set(2, 4), cfg.L)[:, None]
    target = g / (cfg.nu * lam)
    out = integrate(np.zeros((1,) + g.shape, complex), cfg, lambda t: g[None], [4000])
    assert np.max(np.abs(out[-1, 0] - target)) < 1e-7
    assert np.max(np.abs(steady_state(cfg, g) - target)) < 1e-12


def test_steady_state_solves_the_stationary_equation():
    cfg = NSEConfig(nu=0.5, L=2 * np.pi, K=6, dt=0.01)
    rng = np.random.default_rng(3)
    g = SpectralField.random(2, 6, cfg.L, rng, slope=2.0, norm=0.5)
    u = SpectralField(2, 6, cfg.L, steady_state(cfg, g.coeffs))
    lam = stokes_eigenvalues(u.modes, cfg.L)[:, None]
    res = cfg.nu * lam * u.coeffs + bilinear_B(u, u).coeffs - g.coeffs
    assert np.max(np.abs(res)) < 1e-11


def _order_ratio(integrator, dt):
    rng = np.random.default_rng(11)
    u0 = SpectralField.random(2, 6, 2 * np.pi, rng, slope=1.0, norm=3.0).coeffs[None]
    g = SpectralField.random(2, 6, 2 * np.pi, rng, slope=1.0, norm=1.0).coeffs[None]
    force = lambda t: g * np.cos(t)
    T = 0.8

    def run(h):
        cfg = NSEConfig(nu=0.05, L=2 * np.pi, K=6, dt=h, integrator=integrator)
        return integrate(u0, cfg, force, [int(round(T / h))])[-1]

    ref = run(dt / 16)
    e1, e2 = np.max(np.abs(run(dt) - ref)), np.max(np.abs(run(dt / 2) - ref))
    return e1 / e2


def test_if_rk4_is_fourth_order():
    assert 12 < _order_ratio("if-rk4", 0.1) < 20


def test_imex_cn_is_second_order():
    assert 3.4 < _order_ratio("imex-cn", 0.05) < 4.6


def test_unforced_energy_decays_at_least_at_the_poincare_rate():
    cfg = NSEConfig(nu=0.05, L=2 * np.pi, K=6, dt=0.01)
    u0 = SpectralField.random(2, 6, cfg.L, np.random.default_rng(5), slope=1.0, norm=4.0)
    steps = np.arange(0, 301, 10)
    out = integrate(u0.coeffs[None], cfg, None, steps)
    e = np.sqrt(2 * np.sum(np.abs(out[:, 0]) ** 2, axis=(1, 2)))
    assert np.all(np.diff(e) <= 1e-12)
    bound = e[0] * np.exp(-cfg.nu * cfg.lambda1 * steps * cfg.dt)
    assert np.all(e <= bound * (1 + 1e-9))


@pytest.mark.parametrize("forced", [False, True])
def test_energy_ledger_closes(forced):
    cfg = NSEConfig(nu=0.05, L=2 * np.pi, K=6, dt=0.005)
    rng = np.random.default_rng(2)
    u0 = SpectralField.random(2, 6, cfg.L, rng, slope=1.0, norm=2.0)
    g = spectral_force(2, 6, cfg.L, [{"mode": [1, 1], "vector": [1, -1], "amplitude": 1.0, "frequency": 1.0}]) if forced else None
    force = None if g is None else (lambda t: np.asarray(g(t))[None])
    hermite, trap = EnergyLedger(cfg, g), EnergyLedger(cfg, g, quadrature="trapezoid")
    integrate(u0.coeffs[None], cfg, force, [400], observer=lambda i, t, U: (hermite(i, t, U), trap(i, t, U)))
    assert hermite.result().max_relative < 1e-6
    assert hermite.result().max_relative < trap.result().max_relative


@pytest.mark.parametrize("quadrature", ["hermite", "trapezoid"])
def test_energy_budget_on_stored_trajectory_matches_streaming_ledger(quadrature):
    cfg = NSEConfig(nu=0.05, L=2 * np.pi, K=5, dt=0.01)
    u0 = SpectralField.random(2, 5, cfg.L, np.random.default_rng(7), slope=1.0, norm=1.5)
    g = spectral_force(2, 5, cfg.L, [{"mode": [1, 2], "vector": [2, -1], "amplitude": 0.8, "frequency": 1.3}])
    ledger = EnergyLedger(cfg, g, quadrature=quadrature)
    steps = np.arange(201)
    U = integrate(u0.coeffs[None], cfg, lambda t: np.asarray(g(t))[None], steps, observer=ledger)[:, 0]
    space = PhaseSpace("nse2d", 10.0, K=5, L=cfg.L)
    traj = Trajectory(space, 0.0, cfg.dt, np.ascontiguousarray(U).view(float).reshape(len(U), -1))
    offline, streamed = energy_budget(traj, g, cfg, quadrature), ledger.result()
    np.testing.assert_allclose(offline.residual, streamed.residual, atol=1e-13)
    with pytest.raises(ValueError):
        energy_budget(traj, g, NSEConfig(nu=0.05, L=2 * np.pi, K=4, dt=0.01))


def test_absorbing_radius():
    cfg = NSEConfig(nu=0.5, L=2 * np.pi, K=4, dt=0.01)
    assert absorbing_radius(cfg, 0.0) == (0.0, True)
    g = spectral_force(2, 4, cfg.L, [{"mode": [0, 1], "vector": [1, 0], "amplitude": 0.7}])
    R, unforced = absorbing_radius(cfg, translation_bound(g))
    assert not unforced
    steady = steady_state(cfg, g.value)
    assert np.sqrt(2 * np.sum(np.abs(steady) ** 2)) <= R
    with pytest.raises(ValueError):
        absorbing_radius(cfg, -1.0)


def test_energy_residual_single_mode_linear_run():
    cfg = NSEConfig(nu=0.3, L=2 * np.pi, K=3, dt=1e-4)
    ledger = EnergyLedger(cfg, None, stride=10)
    integrate(shear(3, cfg.L, 1.0).coeffs[None], cfg, None, [10000], observer=ledger)
    assert ledger.result().max_pair <= 1e-10


def test_unforced_trapezoid_residual_is_second_order():
    u0 = SpectralField.random(2, 6, 2 * np.pi, np.random.default_rng(4), slope=1.0, norm=2.0)
    res = []
    for dt in (0.02, 0.01):
        cfg = NSEConfig(nu=0.05, L=2 * np.pi, K=6, dt=dt)
        ledger = EnergyLedger(cfg, None, quadrature="trapezoid")
        integrate(u0.coeffs[None], cfg, None, [int(round(2.0 / dt))], observer=ledger)
        res.append(ledger.result().max_pair)
    assert 3.0 < res[0] / res[1] < 5.0
