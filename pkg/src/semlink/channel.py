"""Fading-channel models and the noisy receive equation Y = H X + N.

Three models are supported: awgn (H = identity-like, pure additive noise),
rayleigh (entries i.i.d. CN(0,1), drawn once per frame: slow fading) and
rician (all-ones line-of-sight plus CN(0,1) scatter, mixed by the K-factor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NonPositivePower, ZeroFrame
from .linalg import sample_cn

CHANNEL_KINDS = ("awgn", "rayleigh", "rician")


@dataclass(frozen=True)
class ChannelModel:
    kind: str
    rician_k: float = 1.0

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if self.rician_k < 0:
            raise ValueError(f"rician_k must be nonnegative, got {self.rician_k}")


@dataclass(frozen=True)
class ChannelRealization:
    """One drawn channel matrix (receive antennas x transmit users)."""

    h: np.ndarray
    model: ChannelModel


@dataclass(frozen=True)
class TransmitFrame:
    """Power-normalized transmit symbols (users x channel uses).

    ``scale`` is the factor applied to the raw symbols; the receiver divides
    detected symbols by it to undo the normalization.
    """

    x: np.ndarray
    power: float
    scale: float = field(default=1.0)


def snr_to_noise_power(p: float, snr_db: float) -> float:
    """Noise power sigma^2 for a target SNR: p / 10^(snr_db/10)."""
    if p <= 0:
        raise NonPositivePower(f"signal power must be positive, got {p}")
    return p / 10.0 ** (snr_db / 10.0)


def normalize_power(x: np.ndarray, p: float = 1.0) -> TransmitFrame:
    """Scale symbols so the mean per-symbol power mean(|x|^2) equals p."""
    if p <= 0:
        raise NonPositivePower(f"target power must be positive, got {p}")
    x = np.asarray(x, dtype=complex)
    mean_power = float(np.mean(np.abs(x) ** 2))
    if mean_power <= 0.0:
        raise ZeroFrame("cannot power-normalize an all-zero frame")
    scale = float(np.sqrt(p / mean_power))
    return TransmitFrame(x=x * scale, power=p, scale=scale)


def draw_channel(
    model: ChannelModel, m: int, k: int, rng: np.random.Generator
) -> ChannelRealization:
    """Draw one frame-constant channel matrix of shape (m, k)."""
    if m < 1 or k < 1:
        raise ValueError("antenna/user counts must be >= 1")
    if model.kind == "awgn":
        h = np.eye(m, k, dtype=complex)
    elif model.kind == "rayleigh":
        h = sample_cn(rng, m, k, 1.0)
    else:
        kf = model.rician_k
        los = np.ones((m, k), dtype=complex)
        scatter = sample_cn(rng, m, k, 1.0)
        h = np.sqrt(kf / (kf + 1.0)) * los + np.sqrt(1.0 / (kf + 1.0)) * scatter
    return ChannelRealization(h=h, model=model)


def transmit(
    frame: TransmitFrame,
    ch: ChannelRealization,
    snr_db: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Propagate a frame: Y = H X + N with N ~ CN(0, sigma^2) per entry."""
    if ch.h.shape[1] != frame.x.shape[0]:
        raise DimensionMismatch(
            f"channel expects {ch.h.shape[1]} users, frame has {frame.x.shape[0]}"
        )
    sigma2 = snr_to_noise_power(frame.power, snr_db)
    noise = sample_cn(rng, ch.h.shape[0], frame.x.shape[1], sigma2)
    return ch.h @ frame.x + noise
