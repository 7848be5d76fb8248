"""Trial configuration schema, YAML I/O and dotted-path overrides."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from ..frontend import DEFAULT_PA, PaParams
from ..io import read_pa_params

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "WaveformSection",
    "ArraySection",
    "ChannelSection",
    "LinkSection",
    "FrontendSection",
    "DacSection",
    "StochasticSection",
    "MetricsSection",
    "TrialConfig",
    "SweepAxis",
    "SweepSpec",
    "load_config",
    "dump_config",
    "config_from_dict",
    "config_to_dict",
    "with_overrides",
    "config_hash",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


def _pairs(values) -> list[list[float]]:
    return [[float(complex(v).real), float(complex(v).imag)] for v in values]


@dataclass
class WaveformSection:
    qam_order: int = 64
    symbols: int = 1000
    rolloff: float = 0.22
    osr: int = 5
    span_symbols: int = 16


@dataclass
class ArraySection:
    n_antennas: int = 64
    spacing: float = 0.5


@dataclass
class ChannelSection:
    n_users: int = 4
    kappa: float = 0.0
    placement: str = "uniform"  # uniform | pinned
    theta_range: list[float] = field(default_factory=lambda: [-30.0, 30.0])
    phi_range: list[float] = field(default_factory=lambda: [-60.0, 60.0])
    pair_separation_deg: float | None = None
    pinned_theta: list[float] | None = None
    pinned_phi: list[float] | None = None


@dataclass
class LinkSection:
    snr_db: float | None = 10.0
    precoder: str = "rzf"  # rzf | zf
    noise_injection: str = "symbol"  # symbol | oversampled


@dataclass
class FrontendSection:
    enabled: bool = False
    chi: list[list[float]] = field(default_factory=lambda: _pairs(DEFAULT_PA.chi))
    eta: list[list[float]] = field(default_factory=lambda: _pairs(DEFAULT_PA.eta))
    gamma: list[list[float]] = field(default_factory=lambda: _pairs(DEFAULT_PA.gamma))
    backoff_db: float = 8.0
    chain_gain_calibration: bool = True
    coupling: bool = True
    c0_db: float = -17.0
    decay_exp: float = 3.0
    ref_distance: float = 0.5
    max_spectral_radius: float = 0.9
    mode: str = "fixed_point"  # fixed_point | linearized
    pattern_exponent: float = 1.5
    pa_file: str | None = None
    s_matrix_file: str | None = None

    def pa_params(self) -> PaParams:
        if self.pa_file:
            return read_pa_params(self.pa_file)
        to_c = lambda pairs: [complex(a, b) for a, b in pairs]
        return PaParams(chi=to_c(self.chi), eta=to_c(self.eta), gamma=to_c(self.gamma))


@dataclass
class DacSection:
    enabled: bool = False
    bits: int = 6
    clip: float = 3.0
    dither: str = "none"  # none | uniform | nspd


@dataclass
class StochasticSection:
    model: str = "none"  # none | additive | multiplicative
    nu: float = 0.0
    sigma_a2: float = 0.0
    sigma_phi2: float = 0.0
    normalize: bool = True


@dataclass
class MetricsSection:
    rho: str = "gain"  # gain | lmmse
    per_user_rho: bool = True
    discard_edge_symbols: bool = True
    emissions: bool = False
    angular_step_deg: float = 2.0
    segment: int = 256
    overlap: float = 0.5
    useful_theta: list[float] = field(default_factory=lambda: [-30.0, 30.0])
    useful_phi: list[float] = field(default_factory=lambda: [-60.0, 60.0])


@dataclass
class TrialConfig:
    schema_version: int = SCHEMA_VERSION
    master_seed: int = 0
    realizations: int = 200
    waveform: WaveformSection = field(default_factory=WaveformSection)
    array: ArraySection = field(default_factory=ArraySection)
    channel: ChannelSection = field(default_factory=ChannelSection)
    link: LinkSection = field(default_factory=LinkSection)
    frontend: FrontendSection = field(default_factory=FrontendSection)
    dac: DacSection = field(default_factory=DacSection)
    stochastic: StochasticSection = field(default_factory=StochasticSection)
    metrics: MetricsSection = field(default_factory=MetricsSection)

    def validate(self) -> "TrialConfig":
        def need(cond: bool, msg: str):
            if not cond:
                raise ConfigError(msg)

        need(self.schema_version == SCHEMA_VERSION,
             f"unsupported schema_version {self.schema_version} (expected {SCHEMA_VERSION})")
        need(0 <= self.master_seed < 2**64, "master_seed must be an unsigned 64-bit integer")
        need(self.realizations >= 1, "realizations must be >= 1")
        M, K = self.array.n_antennas, self.channel.n_users
        need(M >= 1 and K >= 1, "n_antennas and n_users must be >= 1")
        need(M >= K, f"need at least as many antennas as users (M={M}, K={K})")
        need(self.array.spacing > 0, "array spacing must be positive")
        need(self.channel.kappa >= 0, "kappa must be non-negative")
        need(self.channel.placement in ("uniform", "pinned"), "placement must be uniform or pinned")
        if self.channel.placement == "pinned":
            th, ph = self.channel.pinned_theta, self.channel.pinned_phi
            need(th is not None and ph is not None and len(th) == len(ph) == K,
                 "pinned placement needs pinned_theta/pinned_phi with one entry per user")
        need(self.link.precoder in ("rzf", "zf"), "precoder must be rzf or zf")
        need(self.link.noise_injection in ("symbol", "oversampled"),
             "noise_injection must be symbol or oversampled")
        need(self.frontend.mode in ("fixed_point", "linearized"), "frontend mode must be fixed_point or linearized")
        need(self.dac.dither in ("none", "uniform", "nspd"), "dither must be none, uniform or nspd")
        need(1 <= self.dac.bits <= 16, "dac bits must be in 1..16")
        need(self.dac.clip > 0, "dac clip must be positive")
        if self.dac.enabled and self.dac.dither == "nspd":
            need(M > K, "nspd dithering requires M > K")
        need(self.stochastic.model in ("none", "additive", "multiplicative"),
             "stochastic model must be none, additive or multiplicative")
        need(self.metrics.rho in ("gain", "lmmse"), "rho must be gain or lmmse")
        need(self.waveform.symbols >= 1, "symbols must be >= 1")
        return self


def config_to_dict(cfg: TrialConfig) -> dict:
    return dataclasses.asdict(cfg)


_SECTIONS = {
    "waveform": WaveformSection,
    "array": ArraySection,
    "channel": ChannelSection,
    "link": LinkSection,
    "frontend": FrontendSection,
    "dac": DacSection,
    "stochastic": StochasticSection,
    "metrics": MetricsSection,
}


def config_from_dict(data: dict | None) -> TrialConfig:
    data = dict(data or {})
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            cls = _SECTIONS[key]
            names = {f.name for f in dataclasses.fields(cls)}
            unknown = set(value or {}) - names
            if unknown:
                raise ConfigError(f"unknown keys in [{key}]: {sorted(unknown)}")
            kwargs[key] = cls(**(value or {}))
        elif key in ("schema_version", "master_seed", "realizations"):
            kwargs[key] = int(value)
        else:
            raise ConfigError(f"unknown top-level key {key!r}")
    return TrialConfig(**kwargs).validate()


def load_config(path: str | Path) -> TrialConfig:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    try:
        return config_from_dict(data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: TrialConfig, path: str | Path | None = None) -> str:
    text = yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def with_overrides(cfg: TrialConfig, overrides: dict[str, Any]) -> TrialConfig:
    """Copy of ``cfg`` with dotted-path fields replaced, e.g. ``{"array.spacing": 0.35}``."""
    out = copy.deepcopy(cfg)
    for path, value in overrides.items():
        obj = out
        parts = path.split(".")
        for name in parts[:-1]:
            if not hasattr(obj, name):
                raise ConfigError(f"unknown config path {path!r}")
            obj = getattr(obj, name)
        if not hasattr(obj, parts[-1]):
            raise ConfigError(f"unknown config path {path!r}")
        setattr(obj, parts[-1], value)
    return out.validate()


def config_hash(cfg: TrialConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class SweepAxis:
    path: str
    values: list


@dataclass
class SweepSpec:
    axes: list[SweepAxis]
    cross: bool = True
    realizations: int | None = None

    def __post_init__(self):
        if not self.axes:
            raise ConfigError("a sweep needs at least one axis")
        if not self.cross and len({len(a.values) for a in self.axes}) > 1:
            raise ConfigError("zipped sweep axes must have equal length")
        for a in self.axes:
            if not a.values:
                raise ConfigError(f"sweep axis {a.path!r} is empty")

    def points(self) -> list[dict[str, Any]]:
        if self.cross:
            import itertools

            combos = itertools.product(*(a.values for a in self.axes))
        else:
            combos = zip(*(a.values for a in self.axes))
        return [dict(zip((a.path for a in self.axes), combo)) for combo in combos]

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        try:
            axes = [SweepAxis(path=a["path"], values=list(a["values"])) for a in data["axes"]]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed sweep spec: {exc}") from exc
        return cls(axes=axes, cross=bool(data.get("cross", True)), realizations=data.get("realizations"))
