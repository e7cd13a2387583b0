"""Experiment configuration: defaults, key=value file parsing, CLI overrides."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError

#: SNR training/evaluation grid in dB
SNR_GRID = tuple(float(s) for s in range(0, 31, 3))

MODES = ("multimodal", "audio-only", "video-only")
CSI_MODES = ("pilot", "perfect", "none")


@dataclass
class ExperimentConfig:
    # link
    channel: str = "awgn"
    rician_k: float = 1.0
    snr_list: tuple = SNR_GRID
    seeds: tuple = (0, 1, 2, 3, 4)
    mode: str = "multimodal"
    csi: str = "pilot"
    power: float = 1.0
    pilot_len: int = 32  # slots per user
    pilot_base_freq: int = 1
    # synthetic dataset
    t_segments: int = 10
    n_classes: int = 5  # event classes + background
    n_samples: int = 500
    train_frac: float = 0.8
    latent_dim: int = 8
    class_sep: float = 3.0
    weak_sep: float = 0.2
    jitter: float = 0.8
    # model dimensions
    d_audio: int = 16
    d_visual: int = 24
    k_locations: int = 4
    d_attn: int = 16
    h_rnn: int = 32
    rnn_cell: str = "tanh"
    chan_width: int = 32
    enc_hidden: int = 32
    dec_hidden_audio: int = 64
    dec_hidden_visual: int = 64
    d_fused: int = 32
    d_sim: int = 0  # 0 resolves to d_fused // 2
    head_hidden: int = 64
    tau1: float = 0.099
    # training
    epochs: int = 80
    batch_size: int = 64
    lr: float = 0.1
    decay_every: int = 40
    decay_factor: float = 0.5
    momentum: float = 0.0
    beta: float = 10.0
    train_snr_list: tuple = SNR_GRID

    def __post_init__(self):
        if self.d_sim == 0:
            self.d_sim = self.d_fused // 2

    def validate(self) -> None:
        for kind in self.channel.split(","):
            if kind not in ("awgn", "rayleigh", "rician"):
                raise ConfigError(f"unknown channel {kind!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.csi not in CSI_MODES:
            raise ConfigError(f"csi must be one of {CSI_MODES}, got {self.csi!r}")
        if not self.snr_list:
            raise ConfigError("snr_list must be nonempty")
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if self.t_segments < 2:
            raise ConfigError("t_segments must be >= 2")
        if self.n_classes < 2:
            raise ConfigError("n_classes must be >= 2 (events + background)")
        if self.rician_k < 0:
            raise ConfigError("rician_k must be nonnegative")
        if self.d_audio % 2 != 0:
            raise ConfigError("d_audio must be even for the complex mapping")
        if self.chan_width % 2 != 0:
            raise ConfigError("chan_width must be even for the complex mapping")
        if self.pilot_len < 2:
            raise ConfigError("pilot_len must be >= 2 slots per user")
        if not 0.0 < self.train_frac < 1.0:
            raise ConfigError("train_frac must be in (0, 1)")
        if not 0.0 <= self.tau1 < 1.0:
            raise ConfigError("tau1 must lie in [0, 1)")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _parse_scalar(text: str, like) -> object:
    text = text.strip()
    if isinstance(like, bool):
        return text.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int) and not isinstance(like, bool):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def parse_value(name: str, text: str):
    """Parse one config value by the field's default type."""
    if name not in _FIELDS:
        raise ConfigError(f"unknown config key {name!r}")
    default = _FIELDS[name].default
    if isinstance(default, tuple):
        elem = default[0] if default else 0.0
        parts = [p for p in text.replace(",", " ").split() if p]
        if not parts:
            raise ConfigError(f"config key {name!r} needs at least one value")
        return tuple(_parse_scalar(p, elem) for p in parts)
    try:
        return _parse_scalar(text, default)
    except ValueError as exc:
        raise ConfigError(f"bad value for {name!r}: {text!r}") from exc


def load_config_file(path: str) -> dict:
    """Read a flat key=value file into an override dict."""
    overrides: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
                key, text = line.split("=", 1)
                overrides[key.strip()] = parse_value(key.strip(), text)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return overrides


def make_config(file_path: str | None = None, cli_overrides: dict | None = None) -> ExperimentConfig:
    """Defaults, overlaid with a config file, overlaid with CLI flags."""
    values: dict = {}
    if file_path:
        values.update(load_config_file(file_path))
    for key, val in (cli_overrides or {}).items():
        if val is None:
            continue
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = val
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def config_items(cfg: ExperimentConfig) -> list[tuple[str, str]]:
    """Deterministic (key, rendered-value) pairs for manifests."""
    items = []
    for f in dataclasses.fields(ExperimentConfig):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            rendered = ",".join(repr(v) if not isinstance(v, str) else v for v in val)
        else:
            rendered = str(val)
        items.append((f.name, rendered))
    return items
