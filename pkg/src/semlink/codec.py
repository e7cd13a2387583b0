"""Semantic and channel encoders/decoders for both modalities.

Parameters live in a flat dict of numpy arrays keyed "<block>/<name>"; each
forward has a matching *_backward that recomputes cheap intermediates and
returns gradients for the block's parameters.

Blocks
------
aud_sem   recurrent cell (tanh by default, full-gate lstm optional)
aud_enc / vis_enc   two dense layers feeding the real->complex mapping
agva      audio-guided spatial attention over visual locations
aud_dec / vis_dec   complex->real mapping then two dense ReLU layers
aud_proj / vis_proj linear maps into the common fusion dimension
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import OddWidth, ShapeMismatch
from .euler import euler_forward, euler_inverse
from .layers import dense, dense_backward, relu_backward, softmax_backward, tanh_backward
from .linalg import relu, softmax_row

# ---------------------------------------------------------------------------
# recurrent semantic encoder
# ---------------------------------------------------------------------------


def _to_time_major(a: np.ndarray):
    """(B, T, d) or (T, d) -> contiguous (T, B, d) plus a had-batch flag."""
    if a.ndim == 2:
        a = a[None]
        batched = False
    else:
        batched = True
    return np.ascontiguousarray(np.swapaxes(a, 0, 1)), batched


def rnn_states(a: np.ndarray, params: dict, cell: str = "tanh"):
    """Run the recurrent cell over time; returns an opaque state cache."""
    x, batched = _to_time_major(np.asarray(a, dtype=float))
    bsz = x.shape[1]
    if cell == "tanh":
        nh = params["aud_sem/wh"].shape[0]
        h0 = np.zeros((bsz, nh))
        states = kernels.rnn_tanh_forward(
            x, h0, params["aud_sem/wx"], params["aud_sem/wh"], params["aud_sem/b"]
        )
        return ("tanh", x, states, batched)
    if cell == "lstm":
        nh = params["aud_sem/wh"].shape[0]
        h0 = np.zeros((bsz, nh))
        hs, cs, gates = kernels.lstm_forward(
            x, h0, h0.copy(), params["aud_sem/wx"], params["aud_sem/wh"], params["aud_sem/b"]
        )
        return ("lstm", x, (hs, cs, gates), batched)
    raise ValueError(f"unknown recurrent cell {cell!r}")


def rnn_hidden(cache) -> np.ndarray:
    """Hidden-state sequence from a cache: (B, T, h) or (T, h)."""
    kind, _, states, batched = cache
    hs = states if kind == "tanh" else states[0]
    out = np.swapaxes(hs[1:], 0, 1)
    return out if batched else out[0]


def encode_audio_semantic(a: np.ndarray, params: dict, cell: str = "tanh") -> np.ndarray:
    """Per-segment hidden states of the recurrent audio encoder."""
    if params["aud_sem/wx"].shape[0] != np.asarray(a).shape[-1]:
        raise ShapeMismatch(
            f"audio dim {np.asarray(a).shape[-1]} does not match cell input "
            f"{params['aud_sem/wx'].shape[0]}"
        )
    return rnn_hidden(rnn_states(a, params, cell))


def rnn_backward(d_hidden: np.ndarray, cache, params: dict) -> dict:
    """Gradients of the cell parameters given d(hidden states)."""
    kind, x, states, batched = cache
    if not batched:
        d_hidden = d_hidden[None]
    d_out = np.ascontiguousarray(np.swapaxes(d_hidden, 0, 1))
    if kind == "tanh":
        _, _, d_wx, d_wh, d_b = kernels.rnn_tanh_backward(
            x, states, params["aud_sem/wx"], params["aud_sem/wh"], d_out
        )
    else:
        hs, cs, gates = states
        _, _, _, d_wx, d_wh, d_b = kernels.lstm_backward(
            x, hs, cs, gates, params["aud_sem/wx"], params["aud_sem/wh"], d_out
        )
    return {"aud_sem/wx": d_wx, "aud_sem/wh": d_wh, "aud_sem/b": d_b}


# ---------------------------------------------------------------------------
# audio-guided visual attention
# ---------------------------------------------------------------------------


def _agva_scores(v, a_star, params):
    """Shared forward pieces: projected features, scores, weights."""
    pv = np.tanh(dense(v, params["agva/w_mv"], params["agva/b_mv"]))
    pre = pv @ params["agva/w_v1"]
    pa = None
    if a_star is not None:
        pa = np.tanh(dense(a_star, params["agva/w_ma"], params["agva/b_ma"]))
        pre = pre + (pa @ params["agva/w_a1"])[..., None, :]
    s = np.tanh(pre)
    z = s @ params["agva/w_f"]
    alpha = softmax_row(z)
    return pv, pa, s, alpha


def agva_attend(v: np.ndarray, a_star: np.ndarray | None, params: dict) -> np.ndarray:
    """Softmax attention over the k visual locations, scored against audio.

    v: (..., k, d_v); a_star: (..., d_a) received audio features, or None to
    score from the visual projection alone (video-only operation). Returns
    the attended feature (..., d_v), a convex combination of the locations.
    """
    v = np.asarray(v, dtype=float)
    if v.ndim < 2:
        raise ShapeMismatch("visual input must have shape (..., k, d_v)")
    _, _, _, alpha = _agva_scores(v, a_star, params)
    return (alpha[..., None] * v).sum(axis=-2)


def agva_backward(d_out: np.ndarray, v, a_star, params: dict):
    """Returns (d_v, grads) for the attention block."""
    v = np.asarray(v, dtype=float)
    pv, pa, s, alpha = _agva_scores(v, a_star, params)
    def _outer(x, d_y):
        return x.reshape(-1, x.shape[-1]).T @ d_y.reshape(-1, d_y.shape[-1])

    d_alpha = (d_out[..., None, :] * v).sum(axis=-1)
    d_v = alpha[..., None] * d_out[..., None, :]
    d_z = softmax_backward(d_alpha, alpha)
    d_w_f = s.reshape(-1, s.shape[-1]).T @ d_z.reshape(-1)
    d_s = d_z[..., None] * params["agva/w_f"]
    d_pre = tanh_backward(d_s, s)
    d_pv = d_pre @ params["agva/w_v1"].T
    grads = {"agva/w_v1": _outer(pv, d_pre), "agva/w_f": d_w_f}
    d_pv_pre = tanh_backward(d_pv, pv)
    d_v += d_pv_pre @ params["agva/w_mv"].T
    grads["agva/w_mv"] = _outer(v, d_pv_pre)
    grads["agva/b_mv"] = d_pv_pre.reshape(-1, d_pv_pre.shape[-1]).sum(axis=0)
    if a_star is not None:
        a_star = np.asarray(a_star, dtype=float)
        d_pre_sum = d_pre.sum(axis=-2)
        grads["agva/w_a1"] = _outer(pa, d_pre_sum)
        d_pa = d_pre_sum @ params["agva/w_a1"].T
        d_pa_pre = tanh_backward(d_pa, pa)
        grads["agva/w_ma"] = _outer(a_star, d_pa_pre)
        grads["agva/b_ma"] = d_pa_pre.reshape(-1, d_pa_pre.shape[-1]).sum(axis=0)
    else:
        grads["agva/w_a1"] = np.zeros_like(params["agva/w_a1"])
        grads["agva/w_ma"] = np.zeros_like(params["agva/w_ma"])
        grads["agva/b_ma"] = np.zeros_like(params["agva/b_ma"])
    return d_v, grads


# ---------------------------------------------------------------------------
# channel encoders / decoders around the real<->complex mapping
# ---------------------------------------------------------------------------


def channel_encode(x: np.ndarray, params: dict, prefix: str) -> np.ndarray:
    """Two dense layers (ReLU, then linear reshaping) into complex symbols."""
    w2 = params[f"{prefix}/w2"]
    if w2.shape[1] % 2 != 0:
        raise OddWidth(f"{prefix} output width {w2.shape[1]} must be even")
    h1 = relu(dense(x, params[f"{prefix}/w1"], params[f"{prefix}/b1"]))
    out = dense(h1, w2, params[f"{prefix}/b2"])
    return euler_forward(out)


def channel_encode_backward(d_z: np.ndarray, x, params: dict, prefix: str):
    """Returns (d_x, grads); d_z is the cotangent of the complex output."""
    pre1 = dense(x, params[f"{prefix}/w1"], params[f"{prefix}/b1"])
    h1 = relu(pre1)
    d_out = euler_inverse(d_z)
    d_h1, d_w2, d_b2 = dense_backward(d_out, h1, params[f"{prefix}/w2"])
    d_pre1 = relu_backward(d_h1, pre1)
    d_x, d_w1, d_b1 = dense_backward(d_pre1, np.asarray(x, dtype=float), params[f"{prefix}/w1"])
    return d_x, {
        f"{prefix}/w1": d_w1,
        f"{prefix}/b1": d_b1,
        f"{prefix}/w2": d_w2,
        f"{prefix}/b2": d_b2,
    }


def channel_decode(z: np.ndarray, params: dict, prefix: str, proj: str) -> np.ndarray:
    """Complex decomposition, two dense ReLU layers, then the linear map
    into the common fusion dimension."""
    f = euler_inverse(z)
    h1 = relu(dense(f, params[f"{prefix}/w1"], params[f"{prefix}/b1"]))
    h2 = relu(dense(h1, params[f"{prefix}/w2"], params[f"{prefix}/b2"]))
    return dense(h2, params[f"{proj}/w"], params[f"{proj}/b"])


def channel_decode_backward(d_m: np.ndarray, z, params: dict, prefix: str, proj: str):
    """Returns (d_z, grads); d_z is complex, matching the encoder-side input."""
    f = euler_inverse(z)
    pre1 = dense(f, params[f"{prefix}/w1"], params[f"{prefix}/b1"])
    h1 = relu(pre1)
    pre2 = dense(h1, params[f"{prefix}/w2"], params[f"{prefix}/b2"])
    h2 = relu(pre2)
    d_h2, d_wp, d_bp = dense_backward(d_m, h2, params[f"{proj}/w"])
    d_pre2 = relu_backward(d_h2, pre2)
    d_h1, d_w2, d_b2 = dense_backward(d_pre2, h1, params[f"{prefix}/w2"])
    d_pre1 = relu_backward(d_h1, pre1)
    d_f, d_w1, d_b1 = dense_backward(d_pre1, f, params[f"{prefix}/w1"])
    return euler_forward(d_f), {
        f"{prefix}/w1": d_w1,
        f"{prefix}/b1": d_b1,
        f"{prefix}/w2": d_w2,
        f"{prefix}/b2": d_b2,
        f"{proj}/w": d_wp,
        f"{proj}/b": d_bp,
    }
