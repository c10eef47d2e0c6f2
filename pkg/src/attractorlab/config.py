"""Run configuration: a YAML key tree mapped onto nested dataclasses.

Every field has a default except ``instance`` and ``seed``.  Loading rejects
unknown keys and wrong types with the dotted path of the offending field.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import yaml

INSTANCES = ("toy-linear", "toy-setvalued", "nse2d", "nse3d", "discrete")


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class ToySection:
    nu: float = 1.0
    dim: int = 1
    radius: float = 2.0
    dt: float = 0.01


@dataclass
class SetValuedSection:
    branches: int = 201
    radius: float = 2.0
    dt: float = 0.01


@dataclass
class NSESection:
    nu: float = 0.05
    L: float = 6.283185307179586
    K: int = 8
    dt: float = 0.001
    integrator: str = "imex-cn"
    dealias: str = "two-thirds"
    radius: Optional[float] = None  # None: from the absorbing-radius bound
    fallback_radius: float = 1.0  # used when the force vanishes


@dataclass
class DiscreteSection:
    states: int = 40
    symbols: int = 3
    period: int = 5
    branches: int = 1
    table_seed: int = 0
    table: Optional[list] = None  # explicit (branches, symbols, states) table
    word: Optional[list] = None


@dataclass
class SymbolSection:
    kind: str = "zero"  # zero | constant | quasi-periodic | tabulated
    value: Optional[list] = None
    terms: list = field(default_factory=list)
    path: Optional[str] = None
    name: str = "g"


@dataclass
class SamplerSection:
    mode: str = "translates"
    distribution: str = "uniform"
    span: Optional[float] = None
    n_symbols: int = 32


@dataclass
class EnsembleSection:
    n_initial: int = 64
    initial_norm_factor: Optional[float] = None  # NSE: start on the sphere of radius factor * R
    points: Optional[list] = None  # explicit initial points (toys)


@dataclass
class HorizonSection:
    burn_in: float = 30.0
    collect: float = 6.283185307179586
    stride: int = 1
    t_end: float = 10.0
    record_stride: int = 1
    H: float = 16.0
    offset_span: float = 6.283185307179586
    offset_step: float = 0.05
    max_shift: float = 1.0
    t_max: float = 20.0
    kernel_T: float = 30.0
    kernel_window: float = 12.0


@dataclass
class ToleranceSection:
    net: float = 0.01
    oracle: float = 0.01
    attract_eps: float = 0.05
    semiprocess: float = 1e-6
    tracking: float = 0.05
    energy: float = 1e-5
    section: float = 0.01
    translation: float = 0.01
    closure: float = 0.02
    quasi_invariance: float = 0.02


@dataclass
class CheckSection:
    t_star: Optional[float] = None
    T: float = 5.0
    tracking_points: int = 8
    kernel_points: int = 2
    semiprocess_points: int = 8
    tracking_metric: str = "strong"
    semiprocess_times: list = field(default_factory=lambda: [0.5, 1.0, 2.0])
    resample_branches: bool = False
    eps_grid: list = field(default_factory=lambda: [0.01, 0.1, 1.0])
    normality_window: float = 1.0
    section_times: list = field(default_factory=lambda: [0.0, 1.0, 5.0])
    shifts: list = field(default_factory=lambda: [0.25, 0.5, 1.0])
    energy_refine: bool = True
    initial_norm: float = 1.0


@dataclass
class RunConfig:
    instance: str
    seed: int
    metric: str = "strong"
    toy: ToySection = field(default_factory=ToySection)
    setvalued: SetValuedSection = field(default_factory=SetValuedSection)
    nse: NSESection = field(default_factory=NSESection)
    discrete: DiscreteSection = field(default_factory=DiscreteSection)
    symbol: SymbolSection = field(default_factory=SymbolSection)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    horizons: HorizonSection = field(default_factory=HorizonSection)
    tolerances: ToleranceSection = field(default_factory=ToleranceSection)
    checks: CheckSection = field(default_factory=CheckSection)
    out: Optional[str] = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def _convert(tp, value, path: str):
    origin = typing.get_origin(tp)
    if origin in (Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _convert(args[0], value, path)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(path, "expected a mapping")
        return _build(tp, value, path)
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, "expected true or false")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if tp is list or origin is list:
        if not isinstance(value, list):
            raise ConfigError(path, "expected a list")
        return value
    return value


def _build(cls, data: dict, path: str = ""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names:
            raise ConfigError(f"{path}{key}", "unknown field")
    kwargs = {}
    for f in dataclasses.fields(cls):
        p = f"{path}{f.name}"
        if f.name in data:
            kwargs[f.name] = _convert(hints[f.name], data[f.name], p + "." if dataclasses.is_dataclass(hints[f.name]) else p)
        elif f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
            raise ConfigError(p, "required field is missing")
    return cls(**kwargs)


def _positive(path: str, v):
    if v is not None and not v > 0:
        raise ConfigError(path, "must be positive")


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.instance not in INSTANCES:
        raise ConfigError("instance", f"must be one of {', '.join(INSTANCES)}")
    if cfg.metric not in ("strong", "weak"):
        raise ConfigError("metric", "must be 'strong' or 'weak'")
    for name in ("net", "oracle", "attract_eps", "semiprocess", "tracking", "energy", "section", "translation", "closure", "quasi_invariance"):
        _positive(f"tolerances.{name}", getattr(cfg.tolerances, name))
    _positive("toy.nu", cfg.toy.nu)
    _positive("toy.dt", cfg.toy.dt)
    _positive("toy.radius", cfg.toy.radius)
    _positive("setvalued.dt", cfg.setvalued.dt)
    _positive("setvalued.branches", cfg.setvalued.branches)
    _positive("nse.nu", cfg.nse.nu)
    _positive("nse.L", cfg.nse.L)
    _positive("nse.K", cfg.nse.K)
    _positive("nse.dt", cfg.nse.dt)
    _positive("nse.radius", cfg.nse.radius)
    if cfg.nse.integrator not in ("if-rk4", "imex-cn"):
        raise ConfigError("nse.integrator", "must be 'if-rk4' or 'imex-cn'")
    if cfg.nse.dealias not in ("two-thirds", "none"):
        raise ConfigError("nse.dealias", "must be 'two-thirds' or 'none'")
    if cfg.symbol.kind not in ("zero", "constant", "quasi-periodic", "tabulated"):
        raise ConfigError("symbol.kind", "must be zero, constant, quasi-periodic or tabulated")
    if cfg.symbol.kind == "tabulated" and not cfg.symbol.path:
        raise ConfigError("symbol.path", "tabulated symbols need a CSV path")
    if cfg.sampler.mode not in ("translates", "hull-net"):
        raise ConfigError("sampler.mode", "must be 'translates' or 'hull-net'")
    if cfg.sampler.distribution not in ("uniform", "grid"):
        raise ConfigError("sampler.distribution", "must be 'uniform' or 'grid'")
    _positive("sampler.n_symbols", cfg.sampler.n_symbols)
    _positive("ensemble.n_initial", cfg.ensemble.n_initial)
    for name in ("tracking_points", "kernel_points", "semiprocess_points", "T", "normality_window"):
        _positive(f"checks.{name}", getattr(cfg.checks, name))
    h = cfg.horizons
    for name in ("collect", "t_end", "H", "offset_step", "t_max", "kernel_window"):
        _positive(f"horizons.{name}", getattr(h, name))
    if h.H < 1:
        raise ConfigError("horizons.H", "trajectory horizon must be at least 1")
    if cfg.checks.tracking_metric not in ("strong", "weak"):
        raise ConfigError("checks.tracking_metric", "must be 'strong' or 'weak'")
    for i, e in enumerate(cfg.checks.eps_grid):
        if not isinstance(e, (int, float)) or not e > 0:
            raise ConfigError(f"checks.eps_grid[{i}]", "must be a positive number")
    return cfg


def from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "configuration must be a mapping")
    return validate(_build(RunConfig, data))


def load(path: str | Path) -> RunConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("", f"invalid YAML: {exc}") from exc
    return from_dict(data or {})


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
