import math

import numpy as np
import pytest

from semlink import channel as ch
from semlink.errors import DimensionMismatch, NonPositivePower, ZeroFrame
from semlink.rng import substream


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_snr_equal_power():
    assert ch.snr_to_noise_power(1.0, 0.0) == 1.0


def test_snr_30db():
    # paper definition SNR = 10 log10(P / sigma^2)
    assert abs(ch.snr_to_noise_power(1.0, 30.0) - 1e-3) <= 1e-18


def test_snr_inverts_formula():
    assert abs(ch.snr_to_noise_power(2.0, 10.0 * math.log10(2.0)) - 1.0) <= 1e-12


def test_snr_nonpositive_power():
    with pytest.raises(NonPositivePower):
        ch.snr_to_noise_power(0.0, 10.0)


def test_normalize_power_hand_scale():
    x = 2.0 * np.ones((2, 2), dtype=complex)  # mean |x|^2 = 4
    frame = ch.normalize_power(x, 1.0)
    assert abs(frame.scale - 0.5) <= 1e-15
    assert np.allclose(frame.x, np.ones((2, 2)))


def test_normalize_power_fixed_point():
    rng = substream(41, "npow-fp")
    x = crandn(rng, 2, 8)
    x = x / np.sqrt(np.mean(np.abs(x) ** 2))
    frame = ch.normalize_power(x, 1.0)
    assert np.abs(frame.x - x).max() <= 1e-12


def test_normalize_power_postcondition():
    rng = substream(42, "npow-post")
    frame = ch.normalize_power(5.0 * crandn(rng, 3, 7), 2.5)
    assert abs(np.mean(np.abs(frame.x) ** 2) - 2.5) <= 1e-9


def test_normalize_power_zero_frame():
    with pytest.raises(ZeroFrame):
        ch.normalize_power(np.zeros((2, 2), dtype=complex), 1.0)


def test_awgn_channel_is_identity():
    real = ch.draw_channel(ch.ChannelModel("awgn"), 2, 2, substream(43, "awgn"))
    assert np.array_equal(real.h, np.eye(2, dtype=complex))


def test_rayleigh_unit_variance():
    rng = substream(44, "rayleigh-var")
    draws = np.stack(
        [ch.draw_channel(ch.ChannelModel("rayleigh"), 2, 2, rng).h for _ in range(100_000)]
    )
    var = np.mean(np.abs(draws) ** 2, axis=0)
    assert var.min() >= 0.98 and var.max() <= 1.02


def test_rician_los_limit():
    real = ch.draw_channel(ch.ChannelModel("rician", rician_k=1e9), 2, 2, substream(45, "los"))
    assert np.abs(real.h - 1.0).max() <= 1e-4


def test_rician_k0_matches_rayleigh_moments():
    rng = substream(46, "rician-k0")
    draws = np.stack(
        [ch.draw_channel(ch.ChannelModel("rician", rician_k=0.0), 2, 2, rng).h for _ in range(50_000)]
    )
    assert abs(np.mean(np.abs(draws) ** 2) - 1.0) <= 0.02
    assert abs(draws.mean()) <= 0.02


def test_transmit_noiseless_identity():
    rng = substream(47, "tx-id")
    x = crandn(rng, 2, 6)
    frame = ch.normalize_power(x, 1.0)
    real = ch.draw_channel(ch.ChannelModel("awgn"), 2, 2, rng)
    y = ch.transmit(frame, real, math.inf, rng)
    assert np.array_equal(y, frame.x)


def test_transmit_noiseless_matches_matmul_oracle():
    rng = substream(48, "tx-oracle")
    frame = ch.normalize_power(crandn(rng, 2, 5), 1.0)
    real = ch.draw_channel(ch.ChannelModel("rayleigh"), 2, 2, rng)
    y = ch.transmit(frame, real, math.inf, rng)
    expected = np.zeros((2, 5), dtype=complex)
    for i in range(2):
        for j in range(5):
            for k in range(2):
                expected[i, j] += real.h[i, k] * frame.x[k, j]
    assert np.abs(y - expected).max() <= 1e-12


def test_transmit_noise_power_calibration():
    rng = substream(49, "tx-noise")
    frame = ch.normalize_power(crandn(rng, 1, 100_000), 1.0)
    real = ch.draw_channel(ch.ChannelModel("awgn"), 1, 1, rng)
    y = ch.transmit(frame, real, 0.0, rng)
    measured = np.mean(np.abs(y - frame.x) ** 2)
    assert abs(measured - 1.0) <= 0.02


def test_transmit_dimension_mismatch():
    rng = substream(50, "tx-dim")
    frame = ch.normalize_power(crandn(rng, 2, 4), 1.0)
    real = ch.draw_channel(ch.ChannelModel("awgn"), 2, 1, rng)
    with pytest.raises(DimensionMismatch):
        ch.transmit(frame, real, 10.0, rng)


def test_slow_fading_same_h_for_all_uses():
    rng = substream(51, "slow-fade")
    real = ch.draw_channel(ch.ChannelModel("rayleigh"), 2, 2, rng)
    x_col = crandn(rng, 2, 1)
    frame = ch.normalize_power(np.tile(x_col, (1, 8)), 1.0)
    y = ch.transmit(frame, real, math.inf, rng)
    assert np.abs(y - y[:, :1]).max() <= 1e-12


def test_channel_model_validation():
    with pytest.raises(ValueError):
        ch.ChannelModel("nakagami")
    with pytest.raises(ValueError):
        ch.ChannelModel("rician", rician_k=-1.0)
