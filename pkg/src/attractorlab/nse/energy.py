"""Energy bookkeeping, absorbing radius, and a steady-state oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bilinear import bilinear_arrays
from .fields import SpectralField, inner, project, stokes_eigenvalues
from .integrate import NSEConfig
from .modes import grid_map, mode_set


@dataclass
class EnergyResidual:
    """Residual ``r(0, t)`` of the energy balance along a sampled run.

    ``r(t0, t) = r(0, t) - r(0, t0)``, so ``max_pair`` is the worst residual
    over all sampled pairs ``t0 <= t``.
    """

    times: np.ndarray
    residual: np.ndarray
    initial_energy: float

    @property
    def max_pair(self) -> float:
        r = self.residual
        lo = np.minimum.accumulate(r)
        hi = np.maximum.accumulate(r)
        return float(max(np.max(r - lo), np.max(hi - r)))

    @property
    def max_relative(self) -> float:
        return self.max_pair / self.initial_energy if self.initial_energy > 0 else self.max_pair


def _rates(cfg: NSEConfig, U: np.ndarray, t, g) -> tuple[np.ndarray, ...]:
    """Integrands of the balance and their time derivatives for states ``(m, n, d)``.

    Derivatives use the Galerkin right-hand side ``-nu A u - B(u, u) + g``.
    """
    modes = mode_set(cfg.dim, cfg.K)
    lam = stokes_eigenvalues(modes, cfg.L)[:, None]
    t = np.atleast_1d(np.asarray(t, float))
    G = np.zeros_like(U) if g is None else np.asarray(g(t), complex).reshape(U.shape)
    dG = np.zeros_like(U) if g is None else np.asarray(g.derivative(t), complex).reshape(U.shape)
    du = -cfg.nu * lam * U + G
    if cfg.nonlinear:
        du = du - bilinear_arrays(grid_map(cfg.dim, cfg.K, cfg.grid), cfg.L, U)
    energy = inner(U, U)
    ens = inner(lam * U, U)
    work = inner(G, U)
    return energy, ens, 2.0 * inner(lam * U, du), work, inner(dG, U) + inner(G, du)


def _cumulative(t, f, df) -> np.ndarray:
    """Endpoint-corrected trapezoid rule ``h/2 (f0 + f1) - h^2/12 (f1' - f0')``, O(h^4)."""
    h = np.diff(t)
    pieces = 0.5 * h * (f[1:] + f[:-1])
    if df is not None:
        pieces = pieces - h * h / 12.0 * (df[1:] - df[:-1])
    return np.concatenate([[0.0], np.cumsum(pieces)])


QUADRATURES = ("hermite", "trapezoid")


def energy_residual(t, energy, enstrophy, work, nu, d_enstrophy=None, d_work=None) -> EnergyResidual:
    """Residual from sampled integrands; derivatives switch on the corrected rule."""
    t = np.asarray(t, float)
    dis = _cumulative(t, np.asarray(enstrophy), None if d_enstrophy is None else np.asarray(d_enstrophy))
    inp = _cumulative(t, np.asarray(work), None if d_work is None else np.asarray(d_work))
    energy = np.asarray(energy)
    r = energy + 2 * nu * dis - energy[0] - 2 * inp
    return EnergyResidual(t, r, float(energy[0]))


class EnergyLedger:
    """Streaming quadrature of the energy balance for one run.

    Used as the ``observer`` of :func:`attractorlab.nse.integrate.integrate`
    so long runs never store full fields.  ``g`` is the forcing signal (or
    ``None``); only the first member of a stacked state is tracked.
    """

    def __init__(self, cfg: NSEConfig, g=None, stride: int = 1, quadrature: str = "hermite"):
        if quadrature not in QUADRATURES:
            raise ValueError(f"unknown quadrature {quadrature!r}")
        self.cfg = cfg
        self.g = g
        self.stride = stride
        self.quadrature = quadrature
        self.times: list[float] = []
        self.rows: list[tuple[float, ...]] = []

    def __call__(self, i: int, t: float, U: np.ndarray) -> None:
        if i % self.stride:
            return
        u = (U[:1] if U.ndim == 3 else U[None]).astype(complex)
        vals = _rates(self.cfg, u, t, self.g)
        self.times.append(t)
        self.rows.append(tuple(float(v[0]) for v in vals))

    def result(self) -> EnergyResidual:
        e, ens, dens, work, dwork = (np.asarray(c) for c in zip(*self.rows))
        if self.quadrature == "trapezoid":
            dens = dwork = None
        return energy_residual(self.times, e, ens, work, self.cfg.nu, dens, dwork)


def energy_budget(traj, g, cfg: NSEConfig, quadrature: str = "hermite") -> EnergyResidual:
    """Residual ``|u(t)|^2 + 2 nu int ||u||^2 - |u(t0)|^2 - 2 int <g, u>`` along ``traj``.

    ``traj`` is an :class:`attractorlab.evsys.Trajectory` on a spectral space
    whose time origin matches the symbol ``g`` (``None`` for no forcing).
    Pairs ``(t0, t)`` follow from differences of the returned ``r(0, t)``.
    """
    if quadrature not in QUADRATURES:
        raise ValueError(f"unknown quadrature {quadrature!r}")
    space = traj.space
    if not space.spectral or (space.dim, space.K, space.L) != (cfg.dim, cfg.K, cfg.L):
        raise ValueError("trajectory grid does not match the NSE configuration")
    n = len(traj.samples)
    U = np.ascontiguousarray(traj.samples).view(complex).reshape(n, -1, cfg.dim)
    e, ens, dens, work, dwork = _rates(cfg, U, traj.times, g)
    if quadrature == "trapezoid":
        dens = dwork = None
    return energy_residual(traj.times, e, ens, work, cfg.nu, dens, dwork)


def absorbing_radius(cfg: NSEConfig, gbound: float) -> tuple[float, bool]:
    """Radius ``R`` of a uniformly absorbing ball and a flag for the unforced case.

    From ``d/dt|u|^2 + nu lam1 |u|^2 <= ||g||_{V'}^2 / nu`` and a unit-window
    Gronwall argument with ``a = nu lam1``:

        R^2 = (G / nu) * max((1 + 1/(1 - e^{-a})) / a,  1/(1 - e^{-a}) + 1/a)

    The first form is the documented constant; it stops bounding the sharp
    limit ``G / (nu (1 - e^{-a}))`` once ``a`` exceeds about 1.84, so the
    second (always valid) form takes over for ``a > 1`` where it is larger.
    """
    if gbound < 0:
        raise ValueError("translation bound must be nonnegative")
    if gbound == 0:
        return 0.0, True
    a = cfg.nu * cfg.lambda1
    q = 1.0 / (1.0 - np.exp(-a))
    factor = max((1.0 + q) / a, q + 1.0 / a)
    return float(np.sqrt(gbound / cfg.nu * factor)), False


def steady_state(
    cfg: NSEConfig, g: np.ndarray, damping: float = 0.5, tol: float = 1e-13, max_iter: int = 5000
) -> np.ndarray:
    """Damped fixed point of ``u = (nu A)^{-1} (g - B(u, u))`` for a constant force.

    Converges for small Grashof numbers; raises if it does not.
    """
    modes = mode_set(cfg.dim, cfg.K)
    gm = grid_map(cfg.dim, cfg.K, cfg.grid)
    lam = stokes_eigenvalues(modes, cfg.L)[:, None]
    g = project(modes, np.asarray(g, complex))
    u = g / (cfg.nu * lam)
    for _ in range(max_iter):
        target = (g - bilinear_arrays(gm, cfg.L, u[None])[0]) / (cfg.nu * lam)
        new = (1 - damping) * u + damping * target
        if np.max(np.abs(new - u)) < tol * max(1.0, np.max(np.abs(new))):
            return project(modes, new)
        u = new
    raise RuntimeError("steady-state iteration did not converge")


def as_field(cfg: NSEConfig, c: np.ndarray) -> SpectralField:
    return SpectralField(cfg.dim, cfg.K, cfg.L, c)
