import numpy as np
import pytest
from helpers import fd_param_check, rel_err

from semlink import codec
from semlink.errors import OddWidth, ShapeMismatch
from semlink.euler import euler_inverse
from semlink.layers import glorot
from semlink.rng import substream


def tiny_rnn_params(rng, d_in, h, cell="tanh"):
    mult = 4 if cell == "lstm" else 1
    return {
        "aud_sem/wx": glorot(rng, d_in, mult * h),
        "aud_sem/wh": glorot(rng, h, mult * h),
        "aud_sem/b": 0.1 * rng.standard_normal(mult * h),
    }


def agva_params(rng, d_v, d_a, d):
    return {
        "agva/w_mv": glorot(rng, d_v, d),
        "agva/b_mv": 0.1 * rng.standard_normal(d),
        "agva/w_ma": glorot(rng, d_a, d),
        "agva/b_ma": 0.1 * rng.standard_normal(d),
        "agva/w_v1": glorot(rng, d, d),
        "agva/w_a1": glorot(rng, d, d),
        "agva/w_f": rng.standard_normal(d) / np.sqrt(d),
    }


def enc_params(rng, d_in, hidden, width, prefix="aud_enc"):
    return {
        f"{prefix}/w1": glorot(rng, d_in, hidden),
        f"{prefix}/b1": 0.1 * rng.standard_normal(hidden),
        f"{prefix}/w2": glorot(rng, hidden, width),
        f"{prefix}/b2": 0.1 * rng.standard_normal(width),
    }


def dec_params(rng, width, hidden, d_l, prefix="aud_dec", proj="aud_proj"):
    return {
        f"{prefix}/w1": glorot(rng, width, hidden),
        f"{prefix}/b1": 0.1 * rng.standard_normal(hidden),
        f"{prefix}/w2": glorot(rng, hidden, hidden),
        f"{prefix}/b2": 0.1 * rng.standard_normal(hidden),
        f"{proj}/w": glorot(rng, hidden, d_l),
        f"{proj}/b": 0.1 * rng.standard_normal(d_l),
    }


# --- recurrent encoder ----------------------------------------------------


def test_rnn_zero_everything_is_zero():
    params = {
        "aud_sem/wx": np.zeros((2, 3)),
        "aud_sem/wh": np.zeros((3, 3)),
        "aud_sem/b": np.zeros(3),
    }
    out = codec.encode_audio_semantic(np.zeros((1, 2)), params)
    assert np.array_equal(out, np.zeros((1, 3)))


def test_rnn_zero_weights_any_input():
    params = {
        "aud_sem/wx": np.zeros((2, 3)),
        "aud_sem/wh": np.zeros((3, 3)),
        "aud_sem/b": np.zeros(3),
    }
    rng = substream(81, "rnn-zero")
    out = codec.encode_audio_semantic(rng.standard_normal((5, 2)), params)
    assert np.array_equal(out, np.zeros((5, 3)))


def test_rnn_matches_scalar_unrolled_oracle():
    rng = substream(82, "rnn-oracle")
    params = tiny_rnn_params(rng, 2, 3)
    x = rng.standard_normal((4, 2))
    out = codec.encode_audio_semantic(x, params)
    h = np.zeros(3)
    for t in range(4):
        pre = np.empty(3)
        for j in range(3):
            acc = params["aud_sem/b"][j]
            for i in range(2):
                acc += x[t, i] * params["aud_sem/wx"][i, j]
            for i in range(3):
                acc += h[i] * params["aud_sem/wh"][i, j]
            pre[j] = acc
        h = np.tanh(pre)
        assert np.abs(out[t] - h).max() <= 1e-10


def test_rnn_shape_mismatch():
    rng = substream(83, "rnn-shape")
    params = tiny_rnn_params(rng, 2, 3)
    with pytest.raises(ShapeMismatch):
        codec.encode_audio_semantic(np.zeros((4, 5)), params)


@pytest.mark.parametrize("cell", ["tanh", "lstm"])
def test_rnn_backward_matches_fd(cell):
    rng = substream(84, "rnn-fd", cell)
    params = tiny_rnn_params(rng, 2, 3, cell)
    x = rng.standard_normal((2, 4, 2))
    w_out = rng.standard_normal((2, 4, 3))  # fixed linear readout weights

    def loss(p):
        return float((codec.encode_audio_semantic(x, p, cell) * w_out).sum())

    cache = codec.rnn_states(x, params, cell)
    grads = codec.rnn_backward(w_out, cache, params)
    for key in params:
        fd = fd_param_check(loss, params, key)
        assert rel_err(grads[key], fd) <= 1e-6, key


# --- attention --------------------------------------------------------------


def test_agva_single_location_passthrough():
    rng = substream(85, "agva-k1")
    params = agva_params(rng, 3, 2, 4)
    v = rng.standard_normal((1, 3))
    out = codec.agva_attend(v, rng.standard_normal(2), params)
    assert np.abs(out - v[0]).max() <= 1e-12


def test_agva_zero_scorer_gives_uniform_mean():
    rng = substream(86, "agva-unif")
    params = agva_params(rng, 3, 2, 4)
    params["agva/w_f"] = np.zeros(4)
    v = rng.standard_normal((5, 3))
    out = codec.agva_attend(v, rng.standard_normal(2), params)
    assert np.abs(out - v.mean(axis=0)).max() <= 1e-12


def test_agva_matches_brute_force_formula():
    rng = substream(87, "agva-oracle")
    d_v, d_a, d, k = 2, 2, 2, 3
    params = agva_params(rng, d_v, d_a, d)
    v = rng.standard_normal((k, d_v))
    a = rng.standard_normal(d_a)
    # direct per-location evaluation of the scoring formula
    pa = np.tanh(a @ params["agva/w_ma"] + params["agva/b_ma"])
    z = np.empty(k)
    for j in range(k):
        pv = np.tanh(v[j] @ params["agva/w_mv"] + params["agva/b_mv"])
        z[j] = np.tanh(pv @ params["agva/w_v1"] + pa @ params["agva/w_a1"]) @ params["agva/w_f"]
    alpha = np.exp(z - z.max())
    alpha /= alpha.sum()
    expected = sum(alpha[j] * v[j] for j in range(k))
    out = codec.agva_attend(v, a, params)
    assert np.abs(out - expected).max() <= 1e-12


def test_agva_weights_are_convex():
    rng = substream(88, "agva-convex")
    params = agva_params(rng, 3, 2, 4)
    v = rng.standard_normal((2, 7, 4, 3))
    a = rng.standard_normal((2, 7, 2))
    _, _, _, alpha = codec._agva_scores(v, a, params)
    assert alpha.min() >= 0.0
    assert np.abs(alpha.sum(axis=-1) - 1.0).max() <= 1e-12


def test_agva_backward_matches_fd():
    rng = substream(89, "agva-fd")
    params = agva_params(rng, 3, 2, 4)
    v = rng.standard_normal((2, 5, 3))
    a = rng.standard_normal((2, 2))
    w_out = rng.standard_normal((2, 3))

    def loss(p):
        return float((codec.agva_attend(v, a, p) * w_out).sum())

    _, grads = codec.agva_backward(w_out, v, a, params)
    for key in params:
        fd = fd_param_check(loss, params, key)
        assert rel_err(grads[key], fd) <= 1e-6, key


def test_agva_backward_without_audio():
    rng = substream(90, "agva-fd-noaud")
    params = agva_params(rng, 3, 2, 4)
    v = rng.standard_normal((2, 5, 3))
    w_out = rng.standard_normal((2, 3))

    def loss(p):
        return float((codec.agva_attend(v, None, p) * w_out).sum())

    _, grads = codec.agva_backward(w_out, v, None, params)
    for key in ("agva/w_mv", "agva/b_mv", "agva/w_v1", "agva/w_f"):
        fd = fd_param_check(loss, params, key)
        assert rel_err(grads[key], fd) <= 1e-6, key
    assert np.all(grads["agva/w_ma"] == 0.0)


# --- channel encode / decode -----------------------------------------------


def test_channel_encode_identity_passthrough():
    params = {
        "aud_enc/w1": np.eye(2),
        "aud_enc/b1": np.zeros(2),
        "aud_enc/w2": np.eye(2),
        "aud_enc/b2": np.zeros(2),
    }
    z = codec.channel_encode(np.array([1.0, 0.0]), params, "aud_enc")
    assert z.shape == (1,)
    assert z[0] == 1.0 + 0.0j


def test_channel_encode_zero_layers():
    params = {
        "aud_enc/w1": np.zeros((4, 3)),
        "aud_enc/b1": np.zeros(3),
        "aud_enc/w2": np.zeros((3, 4)),
        "aud_enc/b2": np.zeros(4),
    }
    z = codec.channel_encode(np.ones((5, 4)), params, "aud_enc")
    assert np.array_equal(z, np.zeros((5, 2), dtype=complex))


def test_channel_encode_odd_width_rejected():
    rng = substream(91, "enc-odd")
    params = enc_params(rng, 4, 3, 5)
    with pytest.raises(OddWidth):
        codec.channel_encode(np.ones((2, 4)), params, "aud_enc")


def test_channel_decode_zero_input():
    params = {
        "aud_dec/w1": np.zeros((4, 3)),
        "aud_dec/b1": np.zeros(3),
        "aud_dec/w2": np.zeros((3, 3)),
        "aud_dec/b2": np.zeros(3),
        "aud_proj/w": np.zeros((3, 2)),
        "aud_proj/b": np.zeros(2),
    }
    out = codec.channel_decode(np.zeros((5, 2), dtype=complex), params, "aud_dec", "aud_proj")
    assert np.array_equal(out, np.zeros((5, 2)))


def test_channel_decode_identity_is_decomposition():
    params = {
        "aud_dec/w1": np.eye(4),
        "aud_dec/b1": np.zeros(4),
        "aud_dec/w2": np.eye(4),
        "aud_dec/b2": np.zeros(4),
        "aud_proj/w": np.eye(4),
        "aud_proj/b": np.zeros(4),
    }
    z = np.array([[0.3 + 0.7j, 0.9 + 0.1j]])  # positive parts pass the ReLUs
    out = codec.channel_decode(z, params, "aud_dec", "aud_proj")
    assert np.abs(out - np.array([[0.3, 0.9, 0.7, 0.1]])).max() <= 1e-12


def test_channel_decode_matches_formula_oracle():
    rng = substream(92, "dec-oracle")
    params = dec_params(rng, 4, 3, 2)
    z = rng.standard_normal((6, 2)) + 1j * rng.standard_normal((6, 2))
    out = codec.channel_decode(z, params, "aud_dec", "aud_proj")
    f = np.concatenate([z.real, z.imag], axis=-1)
    h1 = np.maximum(f @ params["aud_dec/w1"] + params["aud_dec/b1"], 0)
    h2 = np.maximum(h1 @ params["aud_dec/w2"] + params["aud_dec/b2"], 0)
    expected = h2 @ params["aud_proj/w"] + params["aud_proj/b"]
    assert np.abs(out - expected).max() <= 1e-10


def test_noiseless_loopback_recovers_euler_signal():
    # encode -> (perfect channel, zero noise) -> complex decomposition equals
    # the encoder's post-dense real vector
    rng = substream(93, "loopback")
    params = enc_params(rng, 4, 5, 6)
    x = rng.standard_normal((7, 4))
    z = codec.channel_encode(x, params, "aud_enc")
    h1 = np.maximum(x @ params["aud_enc/w1"] + params["aud_enc/b1"], 0)
    pre = h1 @ params["aud_enc/w2"] + params["aud_enc/b2"]
    assert np.abs(euler_inverse(z) - pre).max() <= 1e-9


def test_channel_encode_backward_matches_fd():
    rng = substream(94, "enc-fd")
    params = enc_params(rng, 4, 3, 6)
    x = rng.standard_normal((5, 4))
    w_out = rng.standard_normal((5, 3)) + 1j * rng.standard_normal((5, 3))

    def loss(p):
        z = codec.channel_encode(x, p, "aud_enc")
        return float((z.real * w_out.real + z.imag * w_out.imag).sum())

    _, grads = codec.channel_encode_backward(w_out, x, params, "aud_enc")
    for key in params:
        fd = fd_param_check(loss, params, key)
        assert rel_err(grads[key], fd) <= 1e-6, key


def test_channel_decode_backward_matches_fd():
    rng = substream(95, "dec-fd")
    params = dec_params(rng, 4, 3, 2)
    z = rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2))
    w_out = rng.standard_normal((5, 2))

    def loss(p):
        return float((codec.channel_decode(z, p, "aud_dec", "aud_proj") * w_out).sum())

    _, grads = codec.channel_decode_backward(w_out, z, params, "aud_dec", "aud_proj")
    for key in params:
        fd = fd_param_check(loss, params, key)
        assert rel_err(grads[key], fd) <= 1e-6, key
