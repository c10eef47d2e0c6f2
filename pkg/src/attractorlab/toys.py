"""Analytically solvable evolutionary systems.

``LinearProcessSystem``
    ``u' = -nu u + g(t)`` in ``R^n``: unique trajectories, nonautonomous
    through the symbol ``g``.  Integrated with RK4 so the numerical pipeline
    stays independent of the closed-form complete trajectory used as oracle.
``SetValuedSystem``
    ``u(t) = theta + (u(t0) - theta) e^{-(t - t0)}`` with ``theta`` fixed per
    trajectory on a grid of ``[-1, 1]``: no uniqueness, attractor ``[-1, 1]``.
``DiscreteSurrogate``
    A finite-state, discrete-time system driven by a periodic word of symbols,
    with optional branching.  Its omega-limit has an exact graph oracle.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import qmc

from .evsys import EvolutionarySystem, Trajectory
from .phase import PhaseSpace, PointCloud, eps_net
from .symbols import (
    Constant,
    HullUnavailable,
    QuasiPeriodic,
    SignalBatch,
    SignalError,
    SymbolSignal,
    SymbolSpaceSampler,
    Tabulated,
    hull_net,
    sample_symbols,
)


def _box_sample(n: int, dim: int, radius: float) -> np.ndarray:
    """Uniform grid on ``[-R, R]`` (dim 1) or a Halton sample of the ball."""
    if dim == 1:
        return np.linspace(-radius, radius, n)[:, None]
    h = qmc.Halton(d=dim, scramble=False).random(4 * n + 1)[1:] * 2 - 1
    h = h[np.sum(h * h, axis=1) <= 1][:n]
    return radius * h


# --- linear process -------------------------------------------------------------


@dataclass(eq=False)
class LinearProcessSystem(EvolutionarySystem):
    nu: float = 1.0
    g: SymbolSignal = field(default_factory=lambda: Constant(value=np.zeros(1)))
    radius: float = 2.0
    dt: float = 0.01
    sampler_mode: str = "translates"
    span: float | None = None
    distribution: str = "uniform"
    n_symbols: int = 32
    seed: int = 0
    kind: str = "toy-linear"
    chunk: int = 1024

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError("decay rate must be positive")
        shape = self.g.shape
        if len(shape) != 1:
            raise ValueError("toy symbols must be vector valued")
        self.space = PhaseSpace("toy", self.radius, shape[0])

    @property
    def autonomous(self) -> bool:
        return isinstance(self.g, Constant)

    def sampler(self) -> SymbolSpaceSampler:
        return SymbolSpaceSampler(self.g, self.sampler_mode, self.span, self.distribution, self.seed)

    def sample_symbols(self, n=None):
        if self.autonomous:
            return [self.g]
        return sample_symbols(self.sampler(), self.n_symbols if n is None else n)

    def sample_X(self, n):
        return _box_sample(n, self.space.dim, self.radius)

    def flow(self, X0, symbols, branches, steps, t0=0.0):
        u = np.array(X0, float)
        force = SignalBatch(symbols)
        h, nu = self.dt, self.nu
        out = np.empty((len(u), len(steps), u.shape[1]))
        j, i = 0, 0
        while True:
            while j < len(steps) and steps[j] == i:
                out[:, j] = u
                j += 1
            if j == len(steps):
                return out
            t = t0 + i * h
            f0, f1, f2 = force(t), force(t + 0.5 * h), force(t + h)
            k1 = -nu * u + f0
            k2 = -nu * (u + 0.5 * h * k1) + f1
            k3 = -nu * (u + 0.5 * h * k2) + f1
            k4 = -nu * (u + h * k3) + f2
            u = u + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(u)):
                raise FloatingPointError(f"non-finite state at t={t + h:.6g}")
            i += 1


class CompleteTrajectory:
    """The bounded solution ``u*(t) = int_{-inf}^t e^{-nu (t - s)} g(s) ds``."""

    def __init__(self, nu: float, g: SymbolSignal, tail_tol: float = 1e-12):
        self.nu = nu
        self.g = g
        self.tail_tol = tail_tol
        if isinstance(g, Tabulated) and not np.all(np.isfinite(g.values)):
            raise SignalError("tabulated symbol is unbounded")

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        g, nu = self.g, self.nu
        if isinstance(g, Constant):
            return np.broadcast_to(np.asarray(g.value) / nu, t.shape + g.shape).copy()
        if isinstance(g, QuasiPeriodic):
            arg = np.multiply.outer(t, g.freqs) + g.phases
            w = g.freqs
            basis = (nu * np.sin(arg) - w * np.cos(arg)) / (nu * nu + w * w)
            return np.tensordot(basis, g.coefs, axes=(-1, 0))
        return self._quadrature(t)

    def _quadrature(self, t: np.ndarray) -> np.ndarray:
        # truncate the memory where e^{-nu W} sup|g| / nu drops below tail_tol
        gmax = float(np.max(np.abs(self.g.values)))
        W = max(1.0, np.log(max(gmax / (self.nu * self.tail_tol), 1.0)) / self.nu)
        s = np.linspace(-W, 0.0, int(W * 2000) + 1)
        ker = np.exp(self.nu * s)
        flat = np.atleast_1d(t)
        vals = np.stack([trapezoid(ker[:, None] * self.g(ti + s).reshape(len(s), -1), s, axis=0) for ti in flat])
        vals = vals.reshape(flat.shape + self.g.shape)
        return vals.reshape(t.shape + self.g.shape)

    def trajectory(self, space: PhaseSpace, t0: float, dt: float, n: int) -> Trajectory:
        times = t0 + dt * np.arange(n)
        return Trajectory(space, t0, dt, self(times).reshape(n, -1), f"u*[{self.g.ident}]")


def exact_complete_trajectory(sys: LinearProcessSystem, symbol: SymbolSignal | None = None) -> CompleteTrajectory:
    return CompleteTrajectory(sys.nu, sys.g if symbol is None else symbol)


def exact_uniform_attractor(sys: LinearProcessSystem, resolution: float = 1e-3, max_points: int = 2_000_000) -> PointCloud:
    """Net of ``{u*_sigma(0) : sigma in hull}`` by a sweep of the phase torus."""
    g = sys.g
    space = sys.space
    if isinstance(g, Constant):
        return PointCloud(space, (np.asarray(g.value) / sys.nu)[None], provenance={"oracle": "constant"})
    if not isinstance(g, QuasiPeriodic):
        raise HullUnavailable(f"hull is not computable for {type(g).__name__} signals")
    w = g.distinct_frequencies()
    if len(w) == 0:
        return PointCloud(space, np.zeros((1, space.dim)), provenance={"oracle": "zero"})
    amp = float(np.sum(np.linalg.norm(g.coefs.reshape(len(g.freqs), -1), axis=1)))
    per = int(np.ceil(2 * np.pi * amp / resolution)) + 1
    per = min(per, int(max_points ** (1.0 / len(w))))
    axes = [np.linspace(0, 2 * np.pi, per, endpoint=False)] * len(w)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(w))
    # phases of each term for every torus point
    term_phase = np.zeros((len(grid), len(g.freqs)))
    for j, wj in enumerate(w):
        sel = np.isclose(np.abs(g.freqs), wj)
        term_phase[:, sel] = grid[:, [j]] * np.sign(g.freqs[sel])
    arg = g.phases + term_phase
    f = g.freqs
    basis = (sys.nu * np.sin(arg) - f * np.cos(arg)) / (sys.nu**2 + f**2)
    pts = np.tensordot(basis, g.coefs, axes=(-1, 0)).reshape(len(grid), -1)
    net = eps_net(space, pts, resolution)
    return PointCloud(space, net, provenance={"oracle": "torus sweep", "per_axis": per, "resolution": resolution})


# --- set-valued system ----------------------------------------------------------


@dataclass(eq=False)
class SetValuedSystem(EvolutionarySystem):
    m: int = 201
    radius: float = 2.0
    dt: float = 0.01
    seed: int = 0
    kind: str = "toy-setvalued"
    chunk: int = 4096

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("need at least one branch")
        self.space = PhaseSpace("toy", self.radius, 1)

    def branch_grid(self):
        return [float(x) for x in self.thetas]

    @property
    def thetas(self) -> np.ndarray:
        return np.linspace(-1.0, 1.0, self.m) if self.m > 1 else np.zeros(1)

    def sample_X(self, n):
        return _box_sample(n, 1, self.radius)

    def flow(self, X0, symbols, branches, steps, t0=0.0):
        th = np.asarray(branches, float)[:, None, None]
        e = np.exp(-np.asarray(steps) * self.dt)[None, :, None]
        x = np.asarray(X0, float)[:, None, :]
        return th + (x - th) * e

    def label(self, sym, branch):
        return f"theta={branch:.17g}"

    def exact_attractor(self) -> PointCloud:
        return PointCloud(self.space, self.thetas[:, None], provenance={"oracle": "constants"})


def setvalued_trajectories(sys: SetValuedSystem, u0: float, t0: float, t1: float) -> list[Trajectory]:
    """One exact trajectory per branch on ``[t0, t1]``."""
    if abs(u0) > sys.radius:
        raise ValueError(f"u0={u0} is outside X=[-{sys.radius}, {sys.radius}]")
    n = int(round((t1 - t0) / sys.dt)) + 1
    s = sys.dt * np.arange(n)
    return [
        Trajectory(sys.space, t0, sys.dt, (th + (u0 - th) * np.exp(-s))[:, None], sys.label(None, th))
        for th in sys.thetas
    ]


# --- discrete surrogate -----------------------------------------------------------


@dataclass(frozen=True)
class WordSymbol:
    """The periodic symbol sequence ``word[(shift + n) mod p]``."""

    word: tuple
    shift: int = 0

    def at(self, n) -> np.ndarray:
        return np.asarray(self.word)[(self.shift + np.asarray(n, int)) % len(self.word)]

    def translate(self, h) -> "WordSymbol":
        return WordSymbol(self.word, int(self.shift + int(round(h))) % len(self.word))

    @property
    def ident(self) -> str:
        return f"word@h={self.shift}"


@dataclass(eq=False)
class DiscreteSurrogate(EvolutionarySystem):
    """``x_{n+1} = table[b, word[n], x_n]`` on states ``0..S-1`` (``dt = 1``)."""

    table: np.ndarray = field(default_factory=lambda: np.zeros((1, 1, 1), int))  # (branches, symbols, states)
    word: tuple = (0,)
    seed: int = 0
    kind: str = "discrete"
    chunk: int = 4096

    def __post_init__(self):
        t = np.asarray(self.table, int)
        if t.ndim != 3:
            raise ValueError("transition table must be (branches, symbols, states)")
        nb, ns, S = t.shape
        if S > 64 or ns > 4:
            raise ValueError("surrogate is limited to 64 states and 4 symbols")
        if np.any(t < 0) or np.any(t >= S):
            raise ValueError("transition table points outside the state set")
        if any(not 0 <= w < ns for w in self.word):
            raise ValueError("word uses an undefined symbol")
        self.table = t
        self.word = tuple(int(w) for w in self.word)
        self.dt = 1.0
        self.space = PhaseSpace("toy", float(max(S - 1, 1)), 1)

    @classmethod
    def random(cls, rng: np.random.Generator, states: int, symbols: int, period: int, branches: int = 1):
        table = rng.integers(0, states, size=(branches, symbols, states))
        word = tuple(int(w) for w in rng.integers(0, symbols, size=period))
        return cls(table=table, word=word)

    @property
    def n_states(self) -> int:
        return self.table.shape[2]

    def sample_symbols(self, n=None):
        return [WordSymbol(self.word, h) for h in range(len(self.word))]

    def branch_grid(self):
        return list(range(self.table.shape[0])) if self.table.shape[0] > 1 else [None]

    def sample_X(self, n=None):
        return np.arange(self.n_states, dtype=float)[:, None]

    def flow(self, X0, symbols, branches, steps, t0=0.0):
        x = np.rint(np.asarray(X0)[:, 0]).astype(int)
        b = np.array([0 if br is None else br for br in branches], int)
        shifts = np.array([s.shift for s in symbols], int)
        word = np.asarray(self.word)
        out = np.empty((len(x), len(steps), 1))
        j, n = 0, 0
        base = int(round(t0))
        while True:
            while j < len(steps) and steps[j] == n:
                out[:, j, 0] = x
                j += 1
            if j == len(steps):
                return out
            sym = word[(shifts + base + n) % len(word)]
            x = self.table[b, sym, x]
            n += 1

    def label(self, sym, branch):
        s = sym.ident
        return s if branch is None else f"{s}|branch={branch}"


def discrete_omega_oracle(sys: DiscreteSurrogate) -> set[int]:
    """States on cycles of the (state, phase) graph of each branch.

    Every node is a start (all states, all word shifts), so the omega-limit of
    the whole state set is the projection of the recurrent nodes.
    """
    S, p = sys.n_states, len(sys.word)
    out: set[int] = set()
    for b in range(sys.table.shape[0]):
        nxt = lambda node: (int(sys.table[b, sys.word[node[1]], node[0]]), (node[1] + 1) % p)
        color: dict = {}
        for start in ((s, h) for s in range(S) for h in range(p)):
            if start in color:
                continue
            path, node = [], start
            while node not in color:
                color[node] = ("open", start)
                path.append(node)
                node = nxt(node)
            if color[node] == ("open", start):
                # closed a new cycle: everything from node's first visit on
                i = path.index(node)
                out.update(n[0] for n in path[i:])
            for n in path:
                color[n] = "done"
    return out
