"""
⚙️ Pipeline configuration - constants, config dataclasses and config files

The module-level constants are the defaults. The frozen dataclasses group
them per concern and validate themselves; `load_config_file` merges a JSON
file over the defaults (flags are applied on top of that by the CLI).
"""

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from src.core.enums import Variant
from src.utils.errors import InvalidArgumentError

VERSION = "0.1.0"

# Welch settings
WELCH_WINDOW_LEN = 200
WELCH_OVERLAP_POINTS = 8
WELCH_FFT_LEN = 1000
F_LO_HZ = 0.5
F_HI_HZ = 70.0

# Band generator settings
BAND_WINDOW_LENGTHS = (1, 5, 10, 15, 20)  # in PSD bins (= Hz on the 1 Hz grid)
BAND_INCREMENT = 1

# Classifier settings
N_CLASSES = 13
N_CHANNELS = 30
N_BINS = 70  # P for the default Welch grid
BRANCH_KERNELS = (3, 9, 15)
BRANCH_KERNELS_LITERAL = (3, 8, 15)
BRANCH_FILTERS = 8
TRUNK_KERNEL = 3
TRUNK_FILTERS = 16
FC_HIDDEN = (512, 128)
POOL_SIZE = (2, 2)
DROPOUT = 0.25
BN_MOMENTUM = 0.1
BN_EPS = 1e-5
FUSION_INIT = (0.5, 0.5, 0.0)  # w_max, w_avg, bias

# Training settings
EPOCHS = 500
BATCH_SIZE = 39
LEARNING_RATE = 1e-4
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
N_FOLDS = 10
REPORT_EVERY = 10  # epochs between progress log lines

# Synthetic data settings
SYNTH_BASE_HZ = 5.0
SYNTH_SPACING_HZ = 4.0
SYNTH_BANDWIDTH_HZ = 1.0
SYNTH_NOISE_SIGMA = 1.0


@dataclass(frozen=True)
class WelchConfig:
    """
    📈 Welch periodogram settings (window and FFT lengths in samples)
    """
    window_len: int = WELCH_WINDOW_LEN
    overlap_points: int = WELCH_OVERLAP_POINTS
    fft_len: int = WELCH_FFT_LEN
    f_lo_hz: float = F_LO_HZ
    f_hi_hz: float = F_HI_HZ

    @property
    def hop(self) -> int:
        return self.window_len - self.overlap_points

    def validate(self, rate_hz: Optional[float] = None) -> None:
        """
        ✅ Checks the invariants, optionally against a sampling rate

        Raises:
            InvalidArgumentError: If any invariant is violated
        """
        if not 0 <= self.overlap_points < self.window_len <= self.fft_len:
            raise InvalidArgumentError(
                "need 0 <= overlap_points < window_len <= fft_len, got "
                f"{self.overlap_points}, {self.window_len}, {self.fft_len}"
            )
        if not self.f_lo_hz < self.f_hi_hz:
            raise InvalidArgumentError(f"f_lo_hz {self.f_lo_hz} must be below f_hi_hz {self.f_hi_hz}")
        if rate_hz is not None:
            if not rate_hz > 0:
                raise InvalidArgumentError(f"sampling rate must be positive, got {rate_hz}")
            if self.f_hi_hz > rate_hz / 2:
                raise InvalidArgumentError(f"f_hi_hz {self.f_hi_hz} is above Nyquist ({rate_hz / 2} Hz)")


@dataclass(frozen=True)
class BandGenConfig:
    """
    🎚️ Sliding-window band generator settings (widths and increment in PSD bins)
    """
    window_lengths: Tuple[int, ...] = BAND_WINDOW_LENGTHS
    increment_g: int = BAND_INCREMENT

    def validate(self) -> None:
        if not self.window_lengths:
            raise InvalidArgumentError("at least one window length is required")
        if any(length < 1 for length in self.window_lengths):
            raise InvalidArgumentError(f"window lengths must be >= 1, got {self.window_lengths}")
        if self.increment_g < 1:
            raise InvalidArgumentError(f"increment must be >= 1, got {self.increment_g}")


@dataclass(frozen=True)
class ModelConfig:
    """
    🧠 Network settings

    `n_bins` is P, the PSD width; the classifier input width is K (band
    variants) or P (OESCN_a2). Hidden FC widths are configured, the last FC
    layer always has `n_classes` outputs.
    """
    variant: Variant = Variant.OESCN
    n_classes: int = N_CLASSES
    channels: int = N_CHANNELS
    n_bins: int = N_BINS
    bands: BandGenConfig = field(default_factory=BandGenConfig)
    branch_kernels: Tuple[int, ...] = BRANCH_KERNELS
    branch_filters: int = BRANCH_FILTERS
    trunk_kernel: int = TRUNK_KERNEL
    trunk_filters: int = TRUNK_FILTERS
    fc_hidden: Tuple[int, ...] = FC_HIDDEN
    pool: Tuple[int, int] = POOL_SIZE
    dropout: float = DROPOUT
    dropout_keep_literal: bool = False
    literal_kernels: bool = False
    attention_scale: Optional[float] = None

    @property
    def fc_sizes(self) -> Tuple[int, ...]:
        return tuple(self.fc_hidden) + (self.n_classes,)

    @property
    def kernels(self) -> Tuple[int, ...]:
        return BRANCH_KERNELS_LITERAL if self.literal_kernels else tuple(self.branch_kernels)

    @property
    def drop_probability(self) -> float:
        """Literal reading treats the configured figure as a keep probability"""
        return 1.0 - self.dropout if self.dropout_keep_literal else self.dropout

    @property
    def scale(self) -> float:
        return self.attention_scale if self.attention_scale is not None else math.sqrt(self.channels)

    def validate(self) -> None:
        if self.n_classes < 2:
            raise InvalidArgumentError(f"need at least 2 classes, got {self.n_classes}")
        if self.channels < 1 or self.n_bins < 2:
            raise InvalidArgumentError(f"bad input geometry C={self.channels}, P={self.n_bins}")
        if self.branch_filters < 1 or self.trunk_filters < 1 or not self.kernels:
            raise InvalidArgumentError("filter counts must be >= 1 and at least one branch is required")
        if any(size < 1 for size in self.fc_hidden):
            raise InvalidArgumentError(f"FC widths must be >= 1, got {self.fc_hidden}")
        if not 0.0 <= self.drop_probability < 1.0:
            raise InvalidArgumentError(f"drop probability must be in [0, 1), got {self.drop_probability}")
        if self.attention_scale is not None and not self.attention_scale > 0:
            raise InvalidArgumentError(f"attention scale must be positive, got {self.attention_scale}")
        self.bands.validate()


@dataclass(frozen=True)
class TrainConfig:
    """
    🏋️ Training protocol settings
    """
    epochs: int = EPOCHS
    batch_size: int = BATCH_SIZE
    lr: float = LEARNING_RATE
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    seed: int = 0
    fold_seed: int = 0
    folds: int = N_FOLDS
    stratified: bool = True
    report_every: int = REPORT_EVERY
    workers: int = 1

    def validate(self) -> None:
        if self.epochs < 1:
            raise InvalidArgumentError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise InvalidArgumentError(f"batch size must be >= 2 for batch norm, got {self.batch_size}")
        if self.lr < 0:
            raise InvalidArgumentError(f"learning rate must be >= 0, got {self.lr}")
        if self.folds < 2:
            raise InvalidArgumentError(f"need at least 2 folds, got {self.folds}")
        if self.workers < 1:
            raise InvalidArgumentError(f"workers must be >= 1, got {self.workers}")


@dataclass(frozen=True)
class Component:
    """
    🎵 One oscillation component of a class signature
    """
    center_hz: float
    bandwidth_hz: float
    amplitude: float
    channels: Tuple[int, ...]


@dataclass(frozen=True)
class SynthSpec:
    """
    🧪 Synthetic dataset description

    `signatures[k]` lists the oscillation components of class k. When left
    empty, `resolved_signatures` builds one component per class at
    SYNTH_BASE_HZ + k * SYNTH_SPACING_HZ on every channel.
    """
    n_classes: int = 4
    trials_per_class: int = 20
    channels: int = 8
    samples: int = 2000
    rate_hz: float = 1000.0
    noise_sigma: float = SYNTH_NOISE_SIGMA
    signatures: Tuple[Tuple[Component, ...], ...] = ()
    subject_id: str = "synthetic"

    def resolved_signatures(self) -> Tuple[Tuple[Component, ...], ...]:
        if self.signatures:
            return self.signatures
        every_channel = tuple(range(self.channels))
        return tuple(
            (Component(SYNTH_BASE_HZ + k * SYNTH_SPACING_HZ, SYNTH_BANDWIDTH_HZ, 1.0, every_channel),)
            for k in range(self.n_classes)
        )

    def validate(self, f_lo_hz: float = F_LO_HZ, f_hi_hz: float = F_HI_HZ) -> None:
        """
        ✅ Checks counts, geometry and that every component sits inside the band

        Raises:
            InvalidArgumentError: If the spec cannot produce a valid dataset
        """
        if self.n_classes < 1 or self.trials_per_class < 1:
            raise InvalidArgumentError(
                f"need >= 1 class and trial per class, got {self.n_classes} x {self.trials_per_class}"
            )
        if self.channels < 1 or self.samples < 1 or not self.rate_hz > 0:
            raise InvalidArgumentError(
                f"bad geometry C={self.channels}, T={self.samples}, rate={self.rate_hz}"
            )
        if self.noise_sigma < 0:
            raise InvalidArgumentError(f"noise sigma must be >= 0, got {self.noise_sigma}")
        signatures = self.resolved_signatures()
        if len(signatures) != self.n_classes:
            raise InvalidArgumentError(f"{len(signatures)} signatures for {self.n_classes} classes")
        for label, components in enumerate(signatures):
            for comp in components:
                if not f_lo_hz < comp.center_hz < f_hi_hz:
                    raise InvalidArgumentError(
                        f"class {label}: center {comp.center_hz} Hz outside ({f_lo_hz}, {f_hi_hz})"
                    )
                if not comp.amplitude > 0 or comp.bandwidth_hz < 0:
                    raise InvalidArgumentError(f"class {label}: bad amplitude/bandwidth in {comp}")
                if any(not 0 <= ch < self.channels for ch in comp.channels):
                    raise InvalidArgumentError(f"class {label}: channel out of range in {comp.channels}")


SYNTH_PRESETS: Dict[str, SynthSpec] = {
    "desk": SynthSpec(n_classes=4, trials_per_class=20, channels=8, samples=2000),
    "paper-shape": SynthSpec(n_classes=13, trials_per_class=35, channels=30, samples=10000),
}

TRAIN_PRESETS: Dict[str, TrainConfig] = {
    "desk": TrainConfig(epochs=50),
    "paper-shape": TrainConfig(),
}


@dataclass(frozen=True)
class RunConfig:
    """
    📋 Everything a CLI run needs, resolved from defaults, file and flags
    """
    welch: WelchConfig = field(default_factory=WelchConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    synth: SynthSpec = field(default_factory=SynthSpec)


def _coerce(value: Any, current: Any) -> Any:
    """Converts JSON values to the type of the field they replace"""
    if isinstance(current, Variant):
        return Variant.parse(str(value))
    if isinstance(current, tuple) and isinstance(value, list):
        return tuple(tuple(v) if isinstance(v, list) else v for v in value)
    if isinstance(current, float) and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def update_section(section: Any, overrides: Dict[str, Any]) -> Any:
    """
    🔧 Returns a copy of a config dataclass with `overrides` applied

    Nested dataclasses (the band config inside the model config) accept
    nested dicts. Unknown keys are rejected.

    Raises:
        InvalidArgumentError: On unknown keys or unparsable values
    """
    known = {f.name for f in fields(section)}
    changes: Dict[str, Any] = {}
    for key, value in overrides.items():
        if key not in known:
            raise InvalidArgumentError(f"unknown setting {type(section).__name__}.{key}")
        current = getattr(section, key)
        if isinstance(current, BandGenConfig) and isinstance(value, dict):
            changes[key] = update_section(current, value)
        elif key == "signatures":
            changes[key] = tuple(
                tuple(Component(c["center_hz"], c["bandwidth_hz"], c["amplitude"], tuple(c["channels"]))
                      for c in components)
                for components in value
            )
        else:
            try:
                changes[key] = _coerce(value, current)
            except ValueError as e:
                raise InvalidArgumentError(f"bad value for {key}: {e}") from e
    return replace(section, **changes)


def load_config_file(path: Path, base: Optional[RunConfig] = None) -> RunConfig:
    """
    📂 Merges a JSON config file over `base` (the defaults when omitted)

    The file holds an object with optional sections "welch", "bands",
    "model", "train" and "synth".

    Raises:
        InvalidArgumentError: If the file is unreadable or malformed
    """
    config = base or RunConfig()
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise InvalidArgumentError(f"cannot read config file {path}: {e}") from e
    if not isinstance(raw, dict):
        raise InvalidArgumentError(f"config file {path} must hold a JSON object")
    unknown = set(raw) - {"welch", "bands", "model", "train", "synth"}
    if unknown:
        raise InvalidArgumentError(f"unknown config sections: {sorted(unknown)}")

    model = config.model
    if "bands" in raw:
        model = replace(model, bands=update_section(model.bands, raw["bands"]))
    if "model" in raw:
        model = update_section(model, raw["model"])
    return RunConfig(
        welch=update_section(config.welch, raw.get("welch", {})),
        model=model,
        train=update_section(config.train, raw.get("train", {})),
        synth=update_section(config.synth, raw.get("synth", {})),
    )


def to_jsonable(value: Any) -> Any:
    """
    🗂️ Turns config dataclasses (and enums and paths inside them) into plain JSON data
    """
    if hasattr(value, "__dataclass_fields__"):
        return {k: to_jsonable(v) for k, v in asdict(value).items()}
    if isinstance(value, dict):
        return {k: to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, Variant):
        return value.value
    if isinstance(value, Path):
        return str(value)
    return value
