"""Experiment configuration and its text format.

Grammar (one setting per line)::

    # comment                       full-line comments only
    section.key = value             whitespace around '=' is ignored
    section.list_key = 1, 2, 3      comma-separated for list fields
    section.optional_key = none     clears an optional field

Booleans accept true/false, yes/no, on/off, 1/0 (case-insensitive).
Blank lines are skipped. Unknown sections or keys, repeated keys and
unparsable values raise ConfigError carrying the line number and key.

Values are layered: dataclass defaults (the ``desk`` preset), then the
named preset, then the config file, then command-line overrides.
"""
from __future__ import annotations

import logging
import math
import types
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping, Union, get_args, get_origin, get_type_hints

from ..analysis.bound import BoundInputs, derive_constants
from ..data.datasets import PartitionConfig
from ..decision.optimizer import Budget, OptimizerOptions
from ..decision.schemes import FIXED_POWER_W, SCHEMES
from ..errors import ConfigError, FeelSimError
from ..execution.fedsim import TrainConfig
from ..system.wireless import HardwareSpec, build_profiles
from .presets import MNIST_LENET, NOISE_PSD, PATH_LOSS, PRESETS, SERVER_POWER, SYSTEM_POWER_CAP

logger = logging.getLogger(__name__)

SWEEP_AXES = ("sigma", "E0", "T0")
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


@dataclass(frozen=True)
class DatasetSection:
    kind: str = "synthetic"  # synthetic | idx
    num_samples: int = 2000
    feature_dim: int = 20
    num_classes: int = 10
    class_separation: float = 3.0
    seed: int = 7
    images_path: str | None = None
    labels_path: str | None = None


@dataclass(frozen=True)
class PartitionSection:
    num_clients: int = 10
    sigma: float = 5.0
    train_fraction: float = 0.8
    smoothing_eps: float = 0.5
    test_sampling: str = "local"
    min_samples_per_client: int = 2
    max_retries: int = 100


@dataclass(frozen=True)
class ChannelSection:
    path_loss: float = PATH_LOSS
    noise_psd: float = NOISE_PSD
    client_noise_psd: float | None = None  # none: same as noise_psd
    downlink_bandwidth: float | None = None  # none: hardware.uplink_bandwidth
    server_power: float = SERVER_POWER
    power_cap: float = SYSTEM_POWER_CAP  # upper limit on hardware.p_max


@dataclass(frozen=True)
class BoundSection:
    lipschitz: float = 10.0
    grad_sq_bound: float = 100.0
    model_sq_bound: float = 50.0
    loss_gap: float | None = None  # none: initial global training loss
    normalize_phi: bool = False


@dataclass(frozen=True)
class BudgetSection:
    energy: float = 250.0
    delay: float = 150.0
    energy_per_round: tuple[float, ...] | None = None
    delay_per_round: tuple[float, ...] | None = None


@dataclass(frozen=True)
class OptimizerSection:
    lambda_max: float = 0.5
    selection_mode: str = "auto"
    exhaustive_limit: int = 16
    outer_max_iter: int = 30
    outer_tol: float = 1e-9
    sca_max_iter: int = 50
    sca_tol: float = 1e-6
    selection_max_iter: int = 20
    energy_weight: float = 0.5
    delay_weight: float = 0.5
    fixed_power: float = FIXED_POWER_W


@dataclass(frozen=True)
class TrainSection:
    learning_rate: float = 0.01
    rounds: int = 100
    model: str = "softmax"
    hidden_units: int = 32
    workers: int = 1


@dataclass(frozen=True)
class RunSection:
    schemes: tuple[str, ...] = ("proposed",)
    seeds: tuple[int, ...] = (0,)
    output: str | None = None  # none: FEEL_OUTPUT_DIR
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    partition: PartitionSection = field(default_factory=PartitionSection)
    hardware: HardwareSpec = MNIST_LENET
    channel: ChannelSection = field(default_factory=ChannelSection)
    bound: BoundSection = field(default_factory=BoundSection)
    budget: BudgetSection = field(default_factory=BudgetSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    train: TrainSection = field(default_factory=TrainSection)
    run: RunSection = field(default_factory=RunSection)

    def partition_config(self, seed: int) -> PartitionConfig:
        p = self.partition
        return PartitionConfig(
            num_clients=p.num_clients,
            dirichlet_sigma=p.sigma,
            train_fraction=p.train_fraction,
            smoothing_eps=p.smoothing_eps,
            rng_seed=seed,
            test_sampling=p.test_sampling,
            min_samples_per_client=p.min_samples_per_client,
            max_retries=p.max_retries,
        )

    def train_config(self, seed: int) -> TrainConfig:
        t = self.train
        return TrainConfig(
            learning_rate=t.learning_rate,
            batch_size=self.hardware.batch_size,
            num_rounds=t.rounds,
            model=t.model,
            hidden_units=t.hidden_units,
            rng_seed=seed,
            workers=t.workers,
        )

    def bound_inputs(self, loss_gap: float) -> BoundInputs:
        b = self.bound
        return BoundInputs(
            lipschitz=b.lipschitz,
            grad_sq_bound=b.grad_sq_bound,
            model_sq_bound=b.model_sq_bound,
            learning_rate=self.train.learning_rate,
            batch_size=self.hardware.batch_size,
            last_round=self.train.rounds - 1,
            loss_gap=loss_gap if b.loss_gap is None else b.loss_gap,
        )

    def budget_limits(self) -> Budget:
        b = self.budget
        return Budget(total_energy=b.energy, total_delay=b.delay,
                      energy_per_round=b.energy_per_round, delay_per_round=b.delay_per_round)

    def optimizer_options(self) -> OptimizerOptions:
        o = self.optimizer
        return OptimizerOptions(
            lambda_max=o.lambda_max,
            selection_mode=o.selection_mode,
            exhaustive_limit=o.exhaustive_limit,
            outer_max_iter=o.outer_max_iter,
            outer_tol=o.outer_tol,
            sca_max_iter=o.sca_max_iter,
            sca_tol=o.sca_tol,
            selection_max_iter=o.selection_max_iter,
            energy_weight=o.energy_weight,
            delay_weight=o.delay_weight,
        )

    @property
    def downlink_bandwidth(self) -> float:
        bw = self.channel.downlink_bandwidth
        return self.hardware.uplink_bandwidth if bw is None else bw


SECTIONS = tuple(f.name for f in fields(ExperimentConfig))


def _section_types(section: str) -> dict:
    section_cls = type(getattr(ExperimentConfig(), section))
    return get_type_hints(section_cls)


def _scalar(raw: str, kind: type):
    if kind is bool:
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if kind is int:
        return int(raw)
    if kind is float:
        value = float(raw)
        if not math.isfinite(value):
            raise ValueError(f"expected a finite number, got {raw!r}")
        return value
    if not raw:
        raise ValueError("empty value")
    return raw


def _convert(raw: str, hint):
    if get_origin(hint) in (Union, types.UnionType):
        if raw.lower() in ("none", ""):
            return None
        hint = next(a for a in get_args(hint) if a is not type(None))
    if get_origin(hint) is tuple:
        kind = get_args(hint)[0]
        items = [item.strip() for item in raw.split(",")]
        if any(not item for item in items):
            raise ValueError(f"empty list element in {raw!r}")
        return tuple(_scalar(item, kind) for item in items)
    return _scalar(raw, hint)


def _apply(cfg: ExperimentConfig, key: str, raw: str, line: int | None = None) -> ExperimentConfig:
    section, sep, name = key.partition(".")
    if not sep or section not in SECTIONS:
        raise ConfigError(f"unknown section in key {key!r}; expected one of {', '.join(SECTIONS)}",
                          line=line, field=key)
    hints = _section_types(section)
    if name not in hints:
        raise ConfigError(f"unknown key {name!r} in section '{section}'", line=line, field=key)
    try:
        value = _convert(raw.strip(), hints[name])
    except ValueError as exc:
        raise ConfigError(f"invalid value {raw.strip()!r}: {exc}", line=line, field=key) from exc
    return replace(cfg, **{section: replace(getattr(cfg, section), **{name: value})})


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    seen: dict[str, int] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, raw = stripped.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"expected 'section.key = value', got {stripped!r}", line=number)
        if key in seen:
            raise ConfigError(f"duplicate key (first set on line {seen[key]})", line=number, field=key)
        seen[key] = number
        cfg = _apply(cfg, key, raw, line=number)
    return cfg


def apply_overrides(cfg: ExperimentConfig, overrides: Mapping[str, object]) -> ExperimentConfig:
    """Apply key -> value pairs; values that are not strings are formatted first."""
    for key, value in overrides.items():
        cfg = _apply(cfg, key, value if isinstance(value, str) else format_value(value))
    return cfg


def preset_config(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}", field="preset")
    return apply_overrides(ExperimentConfig(), PRESETS[name])


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Build every runtime object once so bad values fail before any run starts."""
    unknown = [s for s in cfg.run.schemes if s not in SCHEMES]
    if unknown:
        raise ConfigError(f"unknown scheme(s) {unknown}; expected one of {', '.join(SCHEMES)}",
                          field="run.schemes")
    if not cfg.run.schemes or not cfg.run.seeds:
        raise ConfigError("need at least one scheme and one seed", field="run")
    if cfg.run.workers < 1:
        raise ConfigError(f"workers must be >= 1, got {cfg.run.workers}", field="run.workers")
    if cfg.dataset.kind not in ("synthetic", "idx"):
        raise ConfigError(f"unknown dataset kind {cfg.dataset.kind!r}", field="dataset.kind")
    if cfg.dataset.kind == "idx" and not (cfg.dataset.images_path and cfg.dataset.labels_path):
        raise ConfigError("idx datasets need images_path and labels_path", field="dataset")
    try:
        cfg.partition_config(cfg.run.seeds[0])
        cfg.train_config(cfg.run.seeds[0])
        derive_constants(cfg.bound_inputs(1.0))
        build_profiles(cfg.hardware, cfg.partition.num_clients, p_cap=cfg.channel.power_cap)
        cfg.budget_limits().per_round(cfg.train.rounds)
        cfg.optimizer_options()
    except FeelSimError as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path: str | Path | None = None, preset: str = "desk",
                overrides: Mapping[str, object] | None = None,
                defaults: Mapping[str, object] | None = None) -> ExperimentConfig:
    """Preset, then ``defaults`` (process settings), then the file, then ``overrides``."""
    cfg = preset_config(preset)
    if defaults:
        cfg = apply_overrides(cfg, defaults)
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        cfg = parse_config_text(text, cfg)
        logger.info(f"Loaded experiment config from {path}")
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return validate(cfg)


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (tuple, list)):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render every setting in the grammar accepted by ``parse_config_text``."""
    lines = []
    for section in SECTIONS:
        lines.append(f"# {section}")
        values = getattr(cfg, section)
        for f in fields(values):
            lines.append(f"{section}.{f.name} = {format_value(getattr(values, f.name))}")
        lines.append("")
    return "\n".join(lines)
