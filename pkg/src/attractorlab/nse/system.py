"""The truncated Navier-Stokes equations as an evolutionary system."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from ..evsys import EvolutionarySystem
from ..phase import PhaseSpace
from ..symbols import Constant, QuasiPeriodic, SignalBatch, SymbolSignal, SymbolSpaceSampler, sample_symbols
from .fields import project, stokes_eigenvalues
from .integrate import NSEConfig, integrate
from .modes import mode_set


def dual_weights(dim: int, K: int, L: float) -> np.ndarray:
    """Weights turning ``sum w |g_k|^2`` over stored modes into ``||g||_{V'}^2``."""
    return (2.0 / stokes_eigenvalues(mode_set(dim, K), L))[:, None]


def spectral_force(dim: int, K: int, L: float, terms: Sequence[dict], name: str = "g") -> SymbolSignal:
    """Force from terms ``{mode, vector, amplitude, frequency, phase}``.

    Each term puts ``amplitude * P v / |P v|`` on one mode (and its conjugate
    partner), modulated by ``sin(frequency t + phase)``; a zero frequency
    means a time-constant term.  Only constant terms give a ``Constant``.
    """
    modes = mode_set(dim, K)
    coefs, freqs, phases = [], [], []
    for term in terms:
        i, conj = modes.index(tuple(int(c) for c in term["mode"]))
        v = np.zeros((modes.n, dim), complex)
        vec = np.asarray(term.get("vector", [0.0] * dim), complex)
        if vec.shape != (dim,):
            raise ValueError(f"force vector must have {dim} components")
        v[i] = np.conj(vec) if conj else vec
        pv = project(modes, v)
        nrm = np.linalg.norm(pv[i])
        if nrm == 0:
            raise ValueError(f"force vector is parallel to its wavevector {term['mode']}")
        coefs.append(float(term.get("amplitude", 1.0)) * pv / nrm)
        w = float(term.get("frequency", 0.0))
        freqs.append(w)
        phases.append(float(term.get("phase", 0.0)) if w != 0 else np.pi / 2)
    weights = dual_weights(dim, K, L)
    if not coefs:
        return Constant(value=np.zeros((modes.n, dim), complex), codomain="spectral", weights=weights, name=name)
    if all(w == 0 for w in freqs):
        return Constant(value=np.sum(coefs, axis=0), codomain="spectral", weights=weights, name=name)
    return QuasiPeriodic(
        codomain="spectral", weights=weights, name=name, coefs=np.stack(coefs), freqs=freqs, phases=phases
    )


def coords_to_coeffs(X: np.ndarray, dim: int) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=float)
    return X.view(complex).reshape(X.shape[:-1] + (-1, dim))


def coeffs_to_coords(U: np.ndarray) -> np.ndarray:
    U = np.ascontiguousarray(U, dtype=complex)
    return U.view(float).reshape(U.shape[:-2] + (-1,))


@dataclass(eq=False)
class NSESystem(EvolutionarySystem):
    cfg: NSEConfig = None
    g: SymbolSignal | None = None
    radius: float = 1.0
    sampler_mode: str = "translates"
    span: float | None = None
    distribution: str = "uniform"
    n_symbols: int = 1
    seed: int = 0
    chunk: int = 8

    def __post_init__(self):
        if self.cfg is None:
            raise ValueError("NSE systems need a configuration")
        c = self.cfg
        self.space = PhaseSpace("nse2d" if c.dim == 2 else "nse3d", self.radius, c.dim, c.K, c.L)
        self.dt = c.dt
        self.kind = self.space.kind
        if self.g is not None and self.g.shape != (mode_set(c.dim, c.K).n, c.dim):
            raise ValueError("force does not match the truncation")

    @property
    def unforced(self) -> bool:
        return self.g is None or (isinstance(self.g, Constant) and self.g.is_zero)

    def sample_symbols(self, n=None):
        if self.unforced:
            return [None]
        if isinstance(self.g, Constant):
            return [self.g]
        s = SymbolSpaceSampler(self.g, self.sampler_mode, self.span, self.distribution, self.seed)
        return sample_symbols(s, self.n_symbols if n is None else n)

    def sample_X(self, n):
        """Halton directions over the stored coordinates, projected, at radii ``R (i+1)/n``."""
        D = self.space.coord_dim
        h = qmc.Halton(d=D, scramble=False).random(n + 1)[1:] * 2 - 1
        U = project(self.space.modes, coords_to_coeffs(h, self.cfg.dim))
        X = coeffs_to_coords(U)
        nrm = self.space.norm(X)
        nrm[nrm == 0] = 1.0
        r = self.radius * (np.arange(n) + 1) / n
        return X * (r / nrm)[:, None]

    def flow(self, X0, symbols, branches, steps, t0=0.0):
        U0 = coords_to_coeffs(X0, self.cfg.dim)
        live = [g for g in symbols if g is not None]
        force = None if not live or len(live) != len(symbols) else SignalBatch(symbols)
        if force is not None and force.all_zero:
            force = None
        out = integrate(U0, self.cfg, force, steps, t0)  # (R, m, n, d)
        return coeffs_to_coords(np.swapaxes(out, 0, 1))
