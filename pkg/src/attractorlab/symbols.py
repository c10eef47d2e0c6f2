"""Time-dependent forces and the translation semigroup acting on them.

A signal maps ``t`` to an array of a fixed ``shape`` (a toy state vector or a
stored spectral coefficient array).  Squared norms are weighted sums
``sum(w * |g|^2)``; spectral signals carry the dual-norm weights so that
``sq_norm`` is ``||g||_{V'}^2``.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.stats import qmc


class HullUnavailable(ValueError):
    pass


class SignalError(ValueError):
    pass


def _weighted_sq(values: np.ndarray, weights, ndim: int) -> np.ndarray:
    a = np.abs(values) ** 2
    if weights is not None:
        a = a * weights
    axes = tuple(range(a.ndim - ndim, a.ndim))
    return np.sum(a, axis=axes)


@dataclass(frozen=True, eq=False)
class SymbolSignal:
    codomain: str = "toy"
    weights: np.ndarray | None = None
    name: str = "g"
    shift: float = 0.0

    @property
    def shape(self) -> tuple[int, ...]:
        raise NotImplementedError

    def __call__(self, t):
        raise NotImplementedError

    def translate(self, h: float) -> "SymbolSignal":
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    @property
    def ident(self) -> str:
        return f"{self.name}@h={self.shift:.17g}"

    def sq_norm(self, t) -> np.ndarray:
        v = self(t)
        return _weighted_sq(v, self.weights, len(self.shape))

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Constant(SymbolSignal):
    value: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @property
    def shape(self):
        return np.shape(self.value)

    def __call__(self, t):
        v = np.asarray(self.value)
        if np.ndim(t) == 0:
            return v.copy()
        return np.broadcast_to(v, (len(t),) + v.shape).copy()

    def translate(self, h):
        return replace(self, shift=self.shift + h)

    def derivative(self, t):
        return np.zeros_like(self(t))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.value)

    def to_dict(self):
        return {"kind": "constant", "name": self.name, "shift": self.shift}


@dataclass(frozen=True, eq=False)
class QuasiPeriodic(SymbolSignal):
    """``g(t) = sum_j c_j sin(w_j t + p_j)``; translation shifts the phases exactly."""

    coefs: np.ndarray = field(default_factory=lambda: np.zeros((0, 1)))
    freqs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    phases: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        c = np.asarray(self.coefs)
        object.__setattr__(self, "coefs", c if np.iscomplexobj(c) else c.astype(float))
        object.__setattr__(self, "freqs", np.asarray(self.freqs, dtype=float))
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))
        if not (len(self.coefs) == len(self.freqs) == len(self.phases)):
            raise SignalError("quasi-periodic terms need matching coefs/freqs/phases")

    @property
    def shape(self):
        return np.shape(self.coefs)[1:]

    def __call__(self, t):
        s = np.sin(np.multiply.outer(np.asarray(t, float), self.freqs) + self.phases)
        return np.tensordot(s, self.coefs, axes=(-1, 0))

    def translate(self, h):
        return replace(self, phases=self.phases + self.freqs * h, shift=self.shift + h)

    def derivative(self, t):
        c = np.cos(np.multiply.outer(np.asarray(t, float), self.freqs) + self.phases) * self.freqs
        return np.tensordot(c, self.coefs, axes=(-1, 0))

    def with_phases(self, phases, label: str) -> "QuasiPeriodic":
        return replace(self, phases=np.asarray(phases, float), name=label, shift=0.0)

    def distinct_frequencies(self) -> np.ndarray:
        w = np.unique(np.abs(self.freqs))
        return w[w > 0]

    def period(self) -> float:
        w = self.distinct_frequencies()
        return float(2 * np.pi / w.min()) if len(w) else 1.0

    def to_dict(self):
        return {
            "kind": "quasi-periodic",
            "name": self.name,
            "shift": self.shift,
            "freqs": self.freqs.tolist(),
            "phases": self.phases.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Tabulated(SymbolSignal):
    """Piecewise-linear signal through ``(times[i], values[i])``.

    Outside the table the end values are held constant.  Translation shifts
    the time grid, so translates are exact copies of the interpolant.
    """

    times: np.ndarray = field(default_factory=lambda: np.zeros(2))
    values: np.ndarray = field(default_factory=lambda: np.zeros((2, 1)))

    def __post_init__(self):
        t = np.asarray(self.times, float)
        v = np.asarray(self.values, float)
        if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
            raise SignalError("tabulated times must be strictly increasing")
        if len(v) != len(t):
            raise SignalError("tabulated values must match the time grid")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape[1:]

    def __call__(self, t):
        flat = self.values.reshape(len(self.times), -1)
        tt = np.atleast_1d(np.asarray(t, float))
        out = np.stack([np.interp(tt, self.times, flat[:, j]) for j in range(flat.shape[1])], -1)
        out = out.reshape((len(tt),) + self.shape)
        return out[0] if np.ndim(t) == 0 else out

    def translate(self, h):
        return replace(self, times=self.times - h, shift=self.shift + h)

    def derivative(self, t):
        # slope of the segment containing t (right-continuous); zero outside the table
        tt = np.atleast_1d(np.asarray(t, float))
        slopes = np.diff(self.values, axis=0) / np.diff(self.times).reshape((-1,) + (1,) * len(self.shape))
        j = np.searchsorted(self.times, tt, side="right") - 1
        inside = (j >= 0) & (j < len(slopes))
        out = np.where(
            inside.reshape((-1,) + (1,) * len(self.shape)), slopes[np.clip(j, 0, len(slopes) - 1)], 0.0
        )
        return out[0] if np.ndim(t) == 0 else out

    def to_dict(self):
        return {"kind": "tabulated", "name": self.name, "shift": self.shift}


def translate(g: SymbolSignal, h: float) -> SymbolSignal:
    """``translate(g, h)(t) == g(t + h)``."""
    return g.translate(h)


def read_tabulated_csv(path, codomain: str = "toy", name: str = "tab") -> Tabulated:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return Tabulated(codomain=codomain, name=name, times=data[:, 0], values=data[:, 1:])


# --- translation boundedness and normality ---------------------------------


def _default_span(g: SymbolSignal) -> float:
    if isinstance(g, QuasiPeriodic):
        return g.period()
    if isinstance(g, Tabulated):
        return max(float(g.times[-1] - g.times[0]) - 1.0, 0.0)
    return 1.0


def _cumulative(g: SymbolSignal, t_lo: float, t_hi: float, per_unit: int):
    n = max(2, int(np.ceil((t_hi - t_lo) * per_unit)) + 1)
    s = np.linspace(t_lo, t_hi, n)
    f = g.sq_norm(s)
    if not np.all(np.isfinite(f)):
        raise SignalError("signal is not square integrable on the sampled range")
    return s, cumulative_trapezoid(f, s, initial=0.0)


def translation_bound(
    g: SymbolSignal, window_count: int = 64, span: float | None = None, per_unit: int = 512
) -> float:
    """Largest trapezoid-rule value of ``int_t^{t+1} |g|^2`` over sampled window starts.

    Window starts are ``t0 + span * i / window_count``; ``span`` defaults to
    the longest period (quasi-periodic), or the table extent (tabulated).
    """
    span = _default_span(g) if span is None else span
    t_lo = float(g.times[0]) if isinstance(g, Tabulated) else 0.0
    s, C = _cumulative(g, t_lo, t_lo + span + 1.0, per_unit)
    starts = t_lo + span * np.arange(window_count) / window_count
    return float(np.max(np.interp(starts + 1.0, s, C) - np.interp(starts, s, C)))


@dataclass
class NormalityProfile:
    table: list[tuple[float, float]]
    window: float
    span: float
    step: float

    @property
    def normal_on_window(self) -> bool:
        return all(d > 0 for _, d in self.table)

    def to_dict(self) -> dict:
        return {
            "table": [[e, d] for e, d in self.table],
            "window": self.window,
            "span": self.span,
            "step": self.step,
            "verdict": "normal on tested window" if self.normal_on_window else "not normal",
        }


def normality_profile(
    g: SymbolSignal,
    eps_grid: Sequence[float],
    window: float = 1.0,
    span: float | None = None,
    per_unit: int = 512,
) -> NormalityProfile:
    """For each ``eps`` the largest grid ``delta <= window`` with
    ``sup_t int_t^{t+delta} |g|^2 <= eps`` (``t`` sampled on the quadrature grid)."""
    if any(e <= 0 for e in eps_grid):
        raise ValueError("eps values must be positive")
    span = _default_span(g) if span is None else span
    t_lo = float(g.times[0]) if isinstance(g, Tabulated) else 0.0
    s, C = _cumulative(g, t_lo, t_lo + span + window, per_unit)
    h = s[1] - s[0]
    n_start = int(np.searchsorted(s, t_lo + span, side="right"))
    n_delta = int(round(window / h))
    # worst window integral for each delta = k*h
    worst = np.zeros(n_delta + 1)
    for k in range(1, n_delta + 1):
        m = min(n_start, len(C) - k)
        worst[k] = np.max(C[k : k + m] - C[:m])
    worst = np.maximum.accumulate(worst)
    table = []
    for e in eps_grid:
        k = int(np.searchsorted(worst, e, side="right")) - 1
        table.append((float(e), float(min(k * h, window))))
    return NormalityProfile(table, window, span, h)


# --- symbol spaces ---------------------------------------------------------


def substream(seed: int, name: str) -> np.random.Generator:
    """Named, worker-independent random stream derived from the run seed."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode())]))


@dataclass(frozen=True, eq=False)
class SymbolSpaceSampler:
    """Draws symbols from the translates of ``base`` or from a net of its hull."""

    base: SymbolSignal
    mode: str = "translates"  # "translates" | "hull-net"
    span: float | None = None
    distribution: str = "uniform"  # "uniform" | "grid"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("translates", "hull-net"):
            raise ValueError(f"unknown sampler mode {self.mode!r}")
        if self.distribution not in ("uniform", "grid"):
            raise ValueError(f"unknown shift distribution {self.distribution!r}")

    @property
    def shift_span(self) -> float:
        return _default_span(self.base) if self.span is None else float(self.span)


def sample_symbols(s: SymbolSpaceSampler, n: int) -> list[SymbolSignal]:
    if n < 1:
        raise ValueError("need at least one symbol")
    if s.mode == "translates":
        if s.distribution == "grid":
            shifts = s.shift_span * np.arange(n) / n
        else:
            shifts = substream(s.seed, "symbols/translates").uniform(0.0, s.shift_span, n)
        return [s.base.translate(float(h)) for h in shifts]
    return hull_net(s.base, n)


def hull_net(base: SymbolSignal, n: int) -> list[SymbolSignal]:
    """``n`` elements of a net of the closure of ``{base(. + h)}``.

    For quasi-periodic signals the hull is the torus of independent phase
    shifts, one per distinct frequency (frequencies are taken to be
    rationally independent).  One frequency gives a uniform phase net,
    several give an unscrambled Halton net of the torus.
    """
    if isinstance(base, Constant):
        return [base] * n
    if not isinstance(base, QuasiPeriodic):
        raise HullUnavailable(f"hull is not computable for {type(base).__name__} signals")
    w = base.distinct_frequencies()
    m = len(w)
    if m == 0:
        return [base] * n
    if m == 1:
        net = (np.arange(n) / n)[:, None]
    else:
        net = qmc.Halton(d=m, scramble=False).random(n + 1)[1:]
    out = []
    for row in net:
        dphi = 2 * np.pi * row
        shift = np.zeros_like(base.phases)
        for j, wj in enumerate(w):
            shift[np.isclose(np.abs(base.freqs), wj)] = dphi[j] * np.sign(
                base.freqs[np.isclose(np.abs(base.freqs), wj)]
            )
        label = f"{base.name}@phi=(" + ",".join(f"{x:.6f}" for x in dphi) + ")"
        out.append(base.with_phases(base.phases + shift, label))
    return out


# --- batched evaluation for integrators ------------------------------------


class SignalBatch:
    """Evaluate a list of signals at a common time, stacked on axis 0."""

    def __init__(self, signals: Sequence[SymbolSignal]):
        self.signals = list(signals)
        self._qp = None
        self._const = None
        if self.signals and all(isinstance(g, Constant) for g in self.signals):
            self._const = np.stack([np.asarray(g.value) for g in self.signals])
        elif self.signals and all(isinstance(g, QuasiPeriodic) for g in self.signals):
            g0 = self.signals[0]
            same = all(
                g.coefs is g0.coefs or (g.coefs.shape == g0.coefs.shape and np.array_equal(g.coefs, g0.coefs))
                for g in self.signals
            ) and all(np.array_equal(g.freqs, g0.freqs) for g in self.signals)
            if same:
                self._qp = (g0.coefs, g0.freqs, np.stack([g.phases for g in self.signals]))

    @property
    def all_zero(self) -> bool:
        return self._const is not None and not np.any(self._const)

    def __call__(self, t: float) -> np.ndarray:
        if self._const is not None:
            return self._const
        if self._qp is not None:
            coefs, freqs, phases = self._qp
            s = np.sin(freqs * t + phases)  # (m, nterms)
            return (s @ coefs.reshape(len(coefs), -1)).reshape((len(s),) + coefs.shape[1:])
        return np.stack([g(t) for g in self.signals])
