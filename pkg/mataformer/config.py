import dataclasses
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional

import tomli

from mataformer.consts import (
    ALPHA_BASE,
    DEFAULT_BETA,
    DEFAULT_CATEGORIES,
    DEFAULT_HORIZONS,
    GAMMA_MU,
    LAMBDA_MU,
    TAU,
    TIME_ENCODING_HORIZON,
    TIME_ENCODING_SCALE,
)
from mataformer.errors import ConfigError


class TimeMode(str, Enum):
    MATA = "mata"
    SINUSOIDAL = "sinusoidal"
    NONE = "none"


class ResidualMode(str, Enum):
    """Which query-conditioned residuals stay live in the temporal bias"""

    FULL = "full"
    #: delta_mu frozen at 0, delta_alpha learned
    STATIC_PEAK = "static-peak"
    #: delta_alpha frozen at 0, delta_mu learned
    STATIC_SLOPE = "static-slope"
    #: both frozen, per-head static priors only
    STATIC = "static"


class FeedForward(str, Enum):
    GATED = "gated"
    PLAIN = "plain"


class LossMode(str, Enum):
    MSE = "mse"
    FOCAL = "focal"
    BCE = "bce"


def _enum(cls: type[Enum], key: str, value: Any) -> Any:
    try:
        return cls(value)
    except ValueError:
        allowed = [m.value for m in cls]  # type: ignore[attr-defined]
        raise ConfigError(key, f"{value!r} is not one of {allowed}")


def _require(cond: bool, key: str, reason: str) -> None:
    if not cond:
        raise ConfigError(key, reason)


@dataclass
class ModelConfig:
    """ModelConfig describes the MATA-Former stack; defaults are desk scale"""

    d_model: int = field(kw_only=True, default=64)
    n_layers: int = field(kw_only=True, default=2)
    n_heads: int = field(kw_only=True, default=4)
    d_ff: int = field(kw_only=True, default=172)
    #: number of risks R
    n_risks: int = field(kw_only=True, default=8)
    #: prediction horizons K in hours
    horizons: tuple[int, ...] = field(kw_only=True, default=DEFAULT_HORIZONS)
    #: embedding dimension of the input events
    input_dim: int = field(kw_only=True, default=64)
    tau: float = field(kw_only=True, default=TAU)
    gamma_mu: float = field(kw_only=True, default=GAMMA_MU)
    lam: float = field(kw_only=True, default=LAMBDA_MU)
    alpha_base: float = field(kw_only=True, default=ALPHA_BASE)
    time_mode: TimeMode = field(kw_only=True, default=TimeMode.MATA)
    residual_mode: ResidualMode = field(kw_only=True, default=ResidualMode.FULL)
    ffn: FeedForward = field(kw_only=True, default=FeedForward.GATED)
    #: embedding scale gamma of the sinusoidal ablation path
    time_encoding_scale: float = field(kw_only=True, default=TIME_ENCODING_SCALE)
    time_encoding_horizon: float = field(kw_only=True, default=TIME_ENCODING_HORIZON)
    #: seed for parameter initialization
    seed: int = field(kw_only=True, default=0)

    def __post_init__(self):
        self.horizons = tuple(int(h) for h in self.horizons)
        self.time_mode = _enum(TimeMode, "model.time_mode", self.time_mode)
        self.residual_mode = _enum(ResidualMode, "model.residual_mode", self.residual_mode)
        self.ffn = _enum(FeedForward, "model.ffn", self.ffn)

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads

    @property
    def output_dim(self) -> int:
        return self.n_risks * len(self.horizons)

    def validate(self) -> "ModelConfig":
        _require(self.d_model > 0, "model.d_model", "must be positive")
        _require(self.n_layers >= 0, "model.n_layers", "must be >= 0")
        _require(self.n_heads >= 2, "model.n_heads", "must be >= 2")
        _require(
            self.d_model % self.n_heads == 0,
            "model.d_model",
            f"{self.d_model} is not divisible by n_heads={self.n_heads}",
        )
        _require(self.d_ff > 0, "model.d_ff", "must be positive")
        _require(self.n_risks > 0, "model.n_risks", "must be positive")
        _require(len(self.horizons) > 0, "model.horizons", "must not be empty")
        _require(all(h > 0 for h in self.horizons), "model.horizons", "must be positive")
        _require(self.input_dim >= 2, "model.input_dim", "must be >= 2")
        _require(self.tau > 0, "model.tau", "must be positive")
        _require(self.gamma_mu > 0, "model.gamma_mu", "must be positive")
        _require(self.alpha_base > 0, "model.alpha_base", "must be positive")
        if self.time_mode == TimeMode.SINUSOIDAL:
            _require(
                self.input_dim % 2 == 0,
                "model.input_dim",
                "must be even for the sinusoidal time encoding",
            )
        return self


@dataclass
class TrainConfig:
    """TrainConfig holds optimization settings; defaults are desk scale"""

    base_lr: float = field(kw_only=True, default=1e-3)
    #: learning-rate ratio of the residual projection network to the backbone
    predictor_lr_multiplier: float = field(kw_only=True, default=10.0)
    weight_decay: float = field(kw_only=True, default=0.01)
    warmup_ratio: float = field(kw_only=True, default=0.05)
    max_epochs: int = field(kw_only=True, default=20)
    #: epochs without validation improvement before stopping
    early_stop_patience: int = field(kw_only=True, default=4)
    batch_size: int = field(kw_only=True, default=4)
    seed: int = field(kw_only=True, default=0)
    loss_mode: LossMode = field(kw_only=True, default=LossMode.MSE)
    focal_gamma: float = field(kw_only=True, default=2.0)
    focal_alpha: float = field(kw_only=True, default=0.25)
    #: binarization threshold of the early-stopping metric
    beta: float = field(kw_only=True, default=DEFAULT_BETA)
    folds: int = field(kw_only=True, default=4)

    def __post_init__(self):
        self.loss_mode = _enum(LossMode, "train.loss_mode", self.loss_mode)

    def validate(self) -> "TrainConfig":
        _require(self.base_lr > 0, "train.base_lr", "must be positive")
        _require(
            self.predictor_lr_multiplier > 0,
            "train.predictor_lr_multiplier",
            "must be positive",
        )
        _require(self.weight_decay >= 0, "train.weight_decay", "must be >= 0")
        _require(0 <= self.warmup_ratio < 0.5, "train.warmup_ratio", "must lie in [0, 0.5)")
        _require(self.max_epochs >= 1, "train.max_epochs", "must be >= 1")
        _require(self.early_stop_patience >= 1, "train.early_stop_patience", "must be >= 1")
        _require(self.batch_size >= 1, "train.batch_size", "must be >= 1")
        _require(self.focal_gamma >= 0, "train.focal_gamma", "must be >= 0")
        _require(0 < self.focal_alpha < 1, "train.focal_alpha", "must lie in (0, 1)")
        _require(0 < self.beta < 1, "train.beta", "must lie in (0, 1)")
        _require(self.folds >= 2, "train.folds", "must be >= 2")
        return self


@dataclass
class LagSpec:
    """LagSpec plants one risk: a trigger event type opens an interval after a lag"""

    trigger_type: int = field(kw_only=True)
    #: seconds from the trigger to the interval start
    lag: int = field(kw_only=True)
    #: half width of the uniform jitter added to the lag, seconds
    jitter: int = field(kw_only=True, default=0)
    #: interval duration, seconds
    duration: int = field(kw_only=True, default=7200)


def default_lag_table() -> list[LagSpec]:
    # lags span minutes, about an hour, and about a day
    lags = (600, 1200, 3600, 3600, 10800, 21600, 72000, 72000)
    durations = (7200, 7200, 10800, 10800, 14400, 14400, 21600, 21600)
    return [
        LagSpec(trigger_type=3 * r, lag=lag, jitter=lag // 10, duration=dur)
        for r, (lag, dur) in enumerate(zip(lags, durations))
    ]


@dataclass
class SynthConfig:
    """SynthConfig parameterizes the planted-lag synthetic cohort"""

    n_patients: int = field(kw_only=True, default=200)
    mean_events_per_patient: int = field(kw_only=True, default=64)
    n_event_types: int = field(kw_only=True, default=24)
    n_risks: int = field(kw_only=True, default=8)
    lag_table: list[LagSpec] = field(kw_only=True, default_factory=default_lag_table)
    #: median inter-event gap in seconds (log-normal)
    gap_median: float = field(kw_only=True, default=900.0)
    gap_sigma: float = field(kw_only=True, default=1.5)
    #: per event and risk, probability that the event fires that risk's trigger
    trigger_probability: float = field(kw_only=True, default=5e-4)
    #: weight of the event-type and trigger coordinates before normalization
    signal_strength: float = field(kw_only=True, default=1.0)
    embedding_dim: int = field(kw_only=True, default=64)
    categories: tuple[str, ...] = field(kw_only=True, default=DEFAULT_CATEGORIES)
    seed: int = field(kw_only=True, default=0)

    def __post_init__(self):
        self.lag_table = [
            spec if isinstance(spec, LagSpec) else LagSpec(**spec) for spec in self.lag_table
        ]
        self.categories = tuple(self.categories)

    def validate(self) -> "SynthConfig":
        _require(self.n_patients >= 1, "synth.n_patients", "must be >= 1")
        _require(self.mean_events_per_patient >= 1, "synth.mean_events_per_patient", "must be >= 1")
        _require(self.n_event_types >= 1, "synth.n_event_types", "must be >= 1")
        _require(
            len(self.lag_table) == self.n_risks,
            "synth.lag_table",
            f"has {len(self.lag_table)} entries for {self.n_risks} risks",
        )
        for r, spec in enumerate(self.lag_table):
            key = f"synth.lag_table[{r}]"
            _require(spec.lag > 0, key, "lag must be positive")
            _require(0 <= spec.jitter < spec.lag, key, "jitter must lie in [0, lag)")
            _require(spec.duration >= 0, key, "duration must be >= 0")
            _require(
                0 <= spec.trigger_type < self.n_event_types,
                key,
                f"trigger type {spec.trigger_type} outside [0, {self.n_event_types})",
            )
        _require(self.gap_median > 0, "synth.gap_median", "must be positive")
        _require(self.gap_sigma >= 0, "synth.gap_sigma", "must be >= 0")
        _require(
            0 <= self.trigger_probability <= 1, "synth.trigger_probability", "must lie in [0, 1]"
        )
        _require(self.signal_strength >= 0, "synth.signal_strength", "must be >= 0")
        _require(
            self.embedding_dim >= self.n_event_types + self.n_risks,
            "synth.embedding_dim",
            "must hold one coordinate per event type and per risk",
        )
        _require(len(self.categories) > 0, "synth.categories", "must not be empty")
        return self


@dataclass
class LabelConfig:
    horizons: tuple[int, ...] = field(kw_only=True, default=DEFAULT_HORIZONS)
    #: separator inserted between metric segments when textualizing
    separator: str = field(kw_only=True, default="")
    categories: tuple[str, ...] = field(kw_only=True, default=DEFAULT_CATEGORIES)

    def __post_init__(self):
        self.horizons = tuple(int(h) for h in self.horizons)
        self.categories = tuple(self.categories)

    def validate(self) -> "LabelConfig":
        _require(len(self.horizons) > 0, "labels.horizons", "must not be empty")
        _require(all(h > 0 for h in self.horizons), "labels.horizons", "must be positive")
        _require(self.separator in ("", " "), "labels.separator", "must be '' or ' '")
        _require(len(self.categories) > 0, "labels.categories", "must not be empty")
        return self


@dataclass
class ExperimentConfig:
    """ExperimentConfig bundles every section of a config.toml"""

    model: ModelConfig = field(kw_only=True, default_factory=ModelConfig)
    train: TrainConfig = field(kw_only=True, default_factory=TrainConfig)
    synth: SynthConfig = field(kw_only=True, default_factory=SynthConfig)
    labels: LabelConfig = field(kw_only=True, default_factory=LabelConfig)

    def validate(self) -> "ExperimentConfig":
        self.model.validate()
        self.train.validate()
        self.synth.validate()
        self.labels.validate()
        if self.model.horizons != self.labels.horizons:
            raise ConfigError("model.horizons", "must equal labels.horizons")
        return self


_SECTIONS: dict[str, type] = {
    "model": ModelConfig,
    "train": TrainConfig,
    "synth": SynthConfig,
    "labels": LabelConfig,
}


def _build(section: str, cls: type, raw: Any) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError(section, "must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown key")
    try:
        return cls(**raw)
    except TypeError as e:
        raise ConfigError(section, str(e))


def config_from_dict(raw: dict[str, Any]) -> ExperimentConfig:
    for section in raw:
        if section not in _SECTIONS:
            raise ConfigError(section, f"unknown section, expected one of {sorted(_SECTIONS)}")
    parts = {name: _build(name, cls, raw[name]) for name, cls in _SECTIONS.items() if name in raw}
    return ExperimentConfig(**parts).validate()


def load_config(path: Optional[str | Path]) -> ExperimentConfig:
    """load_config reads a TOML file with optional [model], [train], [synth] and [labels] sections

    A missing path yields the desk-scale defaults.
    """
    if path is None:
        return ExperimentConfig().validate()
    try:
        with open(path, "rb") as f:
            raw = tomli.load(f)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(str(path), f"invalid TOML: {e}")
    except UnicodeDecodeError as e:
        raise ConfigError(str(path), f"invalid UTF-8: {e.reason}")
    return config_from_dict(raw)


def _plain(value: Any) -> Any:
    match value:
        case Enum():
            return value.value
        case tuple() | list():
            return [_plain(v) for v in value]
        case _ if dataclasses.is_dataclass(value):
            return {k: _plain(v) for k, v in dataclasses.asdict(value).items()}
        case _:
            return value


def config_to_dict(config: Any) -> dict[str, Any]:
    """config_to_dict renders a config dataclass as plain JSON/msgpack-friendly values"""
    return {f.name: _plain(getattr(config, f.name)) for f in dataclasses.fields(config)}
