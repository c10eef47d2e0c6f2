"""Time stepping for the truncated system ``du/dt + nu A u + B(u, u) = g``.

Two schemes, both treating viscosity implicitly or exactly and the advection
and forcing explicitly:

``if-rk4``
    Integrating-factor (Lawson) RK4.  The viscous factor ``exp(-nu lam dt)``
    is applied exactly, so pure Stokes decay is reproduced to round-off.
``imex-cn``
    Crank-Nicolson for viscosity with a Heun predictor-corrector for the
    explicit part; second order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .bilinear import bilinear_arrays
from .fields import SpectralField, project, stokes_eigenvalues
from .modes import grid_map, grid_size, mode_set

INTEGRATORS = ("if-rk4", "imex-cn")


class BlowUp(FloatingPointError):
    def __init__(self, t: float, where: str = ""):
        super().__init__(f"non-finite state at t={t:.6g}{' ' + where if where else ''}")
        self.t = t
        self.where = where

    def __reduce__(self):
        return type(self), (self.t, self.where)


@dataclass(frozen=True)
class NSEConfig:
    nu: float
    L: float
    K: int
    dt: float
    dim: int = 2
    integrator: str = "if-rk4"
    dealias: str = "two-thirds"
    nonlinear: bool = True

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")
        if not self.dt > 0:
            raise ValueError("time step must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"unknown integrator {self.integrator!r}")
        grid_size(self.K, self.dealias)

    @property
    def lambda1(self) -> float:
        return (2 * np.pi / self.L) ** 2

    @property
    def grid(self) -> int:
        return grid_size(self.K, self.dealias)

    @property
    def order(self) -> int:
        return 4 if self.integrator == "if-rk4" else 2


@dataclass(eq=False)
class Stepper:
    """Advances stacks of stored coefficients ``(m, n, d)`` by one step."""

    cfg: NSEConfig
    lam: np.ndarray = field(init=False)

    def __post_init__(self):
        c = self.cfg
        self.modes = mode_set(c.dim, c.K)
        self.gm = grid_map(c.dim, c.K, c.grid)
        self.lam = stokes_eigenvalues(self.modes, c.L)[:, None]
        x = c.nu * self.lam * c.dt
        self.E = np.exp(-x)
        self.E2 = np.exp(-x / 2)
        self.cn_minus = 1 - x / 2
        self.cn_plus = 1 + x / 2

    def rhs(self, U: np.ndarray, force: np.ndarray | None) -> np.ndarray:
        out = -bilinear_arrays(self.gm, self.cfg.L, U) if self.cfg.nonlinear else np.zeros_like(U)
        if force is not None:
            out = out + force
        return out

    def step(self, U: np.ndarray, t: float, force: Callable[[float], np.ndarray] | None) -> np.ndarray:
        h = self.cfg.dt
        f = (lambda s: None) if force is None else force
        if self.cfg.integrator == "if-rk4":
            E, E2 = self.E, self.E2
            k1 = self.rhs(U, f(t))
            k2 = self.rhs(E2 * (U + 0.5 * h * k1), f(t + 0.5 * h))
            k3 = self.rhs(E2 * U + 0.5 * h * k2, f(t + 0.5 * h))
            k4 = self.rhs(E * U + h * E2 * k3, f(t + h))
            new = E * U + (h / 6) * (E * k1 + 2 * E2 * (k2 + k3) + k4)
        else:
            n0 = self.rhs(U, f(t))
            pred = (self.cn_minus * U + h * n0) / self.cn_plus
            n1 = self.rhs(pred, f(t + h))
            new = (self.cn_minus * U + 0.5 * h * (n0 + n1)) / self.cn_plus
        new = project(self.modes, new)
        if not np.all(np.isfinite(new)):
            raise BlowUp(t + h)
        return new


def step(u: SpectralField, t: float, cfg: NSEConfig, g=None) -> SpectralField:
    """One step of the configured scheme; ``g`` is a signal with spectral codomain."""
    st = _stepper(cfg)
    force = None if g is None else (lambda s: np.asarray(g(s))[None])
    out = st.step(u.coeffs[None], t, force)[0]
    return SpectralField(u.dim, u.K, u.L, out)


_STEPPERS: dict = {}


def _stepper(cfg: NSEConfig) -> Stepper:
    if cfg not in _STEPPERS:
        _STEPPERS[cfg] = Stepper(cfg)
    return _STEPPERS[cfg]


def integrate(
    U0: np.ndarray,
    cfg: NSEConfig,
    force: Callable[[float], np.ndarray] | None,
    record_steps,
    t0: float = 0.0,
    observer: Callable[[int, float, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Integrate stacks ``(m, n, d)`` and return states at ``record_steps`` (sorted ints).

    ``observer(i, t, U)`` is called at every step index ``i`` including 0.
    """
    st = _stepper(cfg)
    rec = np.asarray(record_steps, dtype=int)
    out = np.empty((len(rec),) + U0.shape, complex)
    U = np.array(U0, dtype=complex)
    j = 0
    last = int(rec[-1]) if len(rec) else 0
    i = 0
    while True:
        t = t0 + i * cfg.dt
        if observer is not None:
            observer(i, t, U)
        while j < len(rec) and rec[j] == i:
            out[j] = U
            j += 1
        if i >= last:
            break
        U = st.step(U, t, force)
        i += 1
    return out
