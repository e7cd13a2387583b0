"""Positive-connection fusion of the recovered audio/visual semantics.

Cross-modal similarity matrices are ReLU-filtered and row-l1 normalized,
pruned by a threshold, re-normalized, and used to propagate features across
modalities with a residual connection. A two-layer softmax head classifies
the averaged fused features per segment.

All operations accept (..., T, d) stacks and work on the trailing axes.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch
from .layers import dense, dense_backward, relu_backward, row_l1_normalize_backward
from .linalg import relu, row_l1_normalize, softmax_row


def similarity(mv: np.ndarray, ma: np.ndarray, proj_v: np.ndarray, proj_a: np.ndarray):
    """Scaled bilinear connection strengths (w_va, w_av), each (..., T, T)."""
    mv = np.asarray(mv, dtype=float)
    ma = np.asarray(ma, dtype=float)
    if mv.shape != ma.shape:
        raise ShapeMismatch(f"modal features differ: {mv.shape} vs {ma.shape}")
    scale = 1.0 / np.sqrt(mv.shape[-1])
    qv = mv @ proj_v
    qa = ma @ proj_a
    w_va = np.einsum("...ts,...us->...tu", qv, qa) * scale
    w_av = np.einsum("...ts,...us->...tu", qa, qv) * scale
    return w_va, w_av


def similarity_backward(d_wva, d_wav, mv, ma, proj_v, proj_a):
    """Returns (d_mv, d_ma, d_proj_v, d_proj_a)."""
    mv = np.asarray(mv, dtype=float)
    ma = np.asarray(ma, dtype=float)
    scale = 1.0 / np.sqrt(mv.shape[-1])
    qv = mv @ proj_v
    qa = ma @ proj_a
    d_qv = (
        np.einsum("...tu,...us->...ts", d_wva, qa)
        + np.einsum("...ut,...us->...ts", d_wav, qa)
    ) * scale
    d_qa = (
        np.einsum("...tu,...ts->...us", d_wva, qv)
        + np.einsum("...ut,...ts->...us", d_wav, qv)
    ) * scale
    d_mv = d_qv @ proj_v.T
    d_ma = d_qa @ proj_a.T
    d_pv = mv.reshape(-1, mv.shape[-1]).T @ d_qv.reshape(-1, d_qv.shape[-1])
    d_pa = ma.reshape(-1, ma.shape[-1]).T @ d_qa.reshape(-1, d_qa.shape[-1])
    return d_mv, d_ma, d_pv, d_pa


def normalize_connections(w: np.ndarray) -> np.ndarray:
    """Keep positive connections and row-l1 normalize them."""
    return row_l1_normalize(relu(w))


def normalize_connections_backward(d_out: np.ndarray, w: np.ndarray) -> np.ndarray:
    d_r = row_l1_normalize_backward(d_out, relu(w))
    return d_r * (w > 0)


def threshold_connections(w_hat: np.ndarray, tau1: float) -> np.ndarray:
    """Zero entries at or below tau1, then row-l1 re-normalize (one pass)."""
    return row_l1_normalize(w_hat * (w_hat > tau1))


def threshold_connections_backward(d_eta, w_hat, tau1: float) -> np.ndarray:
    mask = w_hat > tau1
    d_masked = row_l1_normalize_backward(d_eta, w_hat * mask)
    return d_masked * mask


def propagate(mv, ma, eta_va, eta_av, fuse_a, fuse_v):
    """Residual cross-modal propagation; returns (sd_v, sd_a)."""
    u_a = mv @ fuse_a
    u_v = ma @ fuse_v
    sd_a = np.einsum("...tu,...ud->...td", eta_av, u_a) + ma
    sd_v = np.einsum("...tu,...ud->...td", eta_va, u_v) + mv
    return sd_v, sd_a


def propagate_backward(d_sdv, d_sda, mv, ma, eta_va, eta_av, fuse_a, fuse_v):
    """Returns (d_mv, d_ma, d_eta_va, d_eta_av, d_fuse_a, d_fuse_v)."""
    u_a = mv @ fuse_a
    u_v = ma @ fuse_v
    d_eta_av = np.einsum("...td,...ud->...tu", d_sda, u_a)
    d_eta_va = np.einsum("...td,...ud->...tu", d_sdv, u_v)
    d_ua = np.einsum("...tu,...td->...ud", eta_av, d_sda)
    d_uv = np.einsum("...tu,...td->...ud", eta_va, d_sdv)
    d_mv = d_sdv + d_ua @ fuse_a.T
    d_ma = d_sda + d_uv @ fuse_v.T
    dl = mv.shape[-1]
    d_fa = mv.reshape(-1, dl).T @ d_ua.reshape(-1, dl)
    d_fv = ma.reshape(-1, dl).T @ d_uv.reshape(-1, dl)
    return d_mv, d_ma, d_eta_va, d_eta_av, d_fa, d_fv


def classify(sd_v: np.ndarray, sd_a: np.ndarray, params: dict) -> np.ndarray:
    """Average the fused features, apply the two-layer head, softmax rows."""
    fused = (np.asarray(sd_v, dtype=float) + np.asarray(sd_a, dtype=float)) / 2.0
    h = relu(dense(fused, params["head/w1"], params["head/b1"]))
    logits = dense(h, params["head/w2"], params["head/b2"])
    return softmax_row(logits)


def classify_backward(d_logits, sd_v, sd_a, params: dict):
    """Backward from the logit cotangent; returns (d_sdv, d_sda, grads)."""
    fused = (np.asarray(sd_v, dtype=float) + np.asarray(sd_a, dtype=float)) / 2.0
    pre1 = dense(fused, params["head/w1"], params["head/b1"])
    h = relu(pre1)
    d_h, d_w2, d_b2 = dense_backward(d_logits, h, params["head/w2"])
    d_pre1 = relu_backward(d_h, pre1)
    d_fused, d_w1, d_b1 = dense_backward(d_pre1, fused, params["head/w1"])
    grads = {"head/w1": d_w1, "head/b1": d_b1, "head/w2": d_w2, "head/b2": d_b2}
    return d_fused / 2.0, d_fused / 2.0, grads
