"""End-to-end transmit/receive pipeline and its manual backward pass.

The pipeline per mode:

  multimodal   audio: recurrent encoder -> channel encoder -> complex symbols
               side link: raw audio features -> complex -> SISO channel ->
                 detection -> received audio a* guiding the visual attention
               video: attention -> channel encoder -> complex symbols
               uplink: 2 users x 2 antennas, Y = H X + N, detection per CSI
               mode, channel decoders, positive-connection fusion, classifier
  audio-only / video-only   one user, 2 antennas, no fusion (the classifier
               sees the single recovered modality)

Channel randomness is frozen per batch in a LinkDraw: the drawn H, the
detector built from it (estimated, true, or absent), unit noise, and the
transmit power scales. Gradients treat the whole link as a fixed linear map
plus additive noise; the power scales are stop-gradients, frozen inside the
draw so finite differences and the analytic backward see the same function.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import psp
from .channel import ChannelModel, draw_channel, snr_to_noise_power
from .codec import (
    agva_attend,
    agva_backward,
    channel_decode,
    channel_decode_backward,
    channel_encode,
    channel_encode_backward,
    rnn_backward,
    rnn_hidden,
    rnn_states,
)
from .config import ExperimentConfig
from .equalizer import detector_matrix, ls_estimate, make_pilot
from .errors import IllConditioned
from .euler import euler_forward, euler_inverse
from .layers import glorot


def n_users(mode: str) -> int:
    return 2 if mode == "multimodal" else 1


M_RX = 2  # antennas at the multimodal receiver


# ---------------------------------------------------------------------------
# parameters
# ---------------------------------------------------------------------------


def init_params(cfg: ExperimentConfig, rng: np.random.Generator) -> dict:
    """Fresh trainable parameters for the configured dimensions."""
    p: dict = {}
    mult = 4 if cfg.rnn_cell == "lstm" else 1
    p["aud_sem/wx"] = glorot(rng, cfg.d_audio, mult * cfg.h_rnn)
    p["aud_sem/wh"] = glorot(rng, cfg.h_rnn, mult * cfg.h_rnn)
    p["aud_sem/b"] = np.zeros(mult * cfg.h_rnn)
    p["aud_enc/w1"] = glorot(rng, cfg.h_rnn, cfg.enc_hidden)
    p["aud_enc/b1"] = np.zeros(cfg.enc_hidden)
    p["aud_enc/w2"] = glorot(rng, cfg.enc_hidden, cfg.chan_width)
    p["aud_enc/b2"] = np.zeros(cfg.chan_width)
    p["agva/w_mv"] = glorot(rng, cfg.d_visual, cfg.d_attn)
    p["agva/b_mv"] = np.zeros(cfg.d_attn)
    p["agva/w_ma"] = glorot(rng, cfg.d_audio, cfg.d_attn)
    p["agva/b_ma"] = np.zeros(cfg.d_attn)
    p["agva/w_v1"] = glorot(rng, cfg.d_attn, cfg.d_attn)
    p["agva/w_a1"] = glorot(rng, cfg.d_attn, cfg.d_attn)
    p["agva/w_f"] = rng.standard_normal(cfg.d_attn) / np.sqrt(cfg.d_attn)
    p["vis_enc/w1"] = glorot(rng, cfg.d_visual, cfg.enc_hidden)
    p["vis_enc/b1"] = np.zeros(cfg.enc_hidden)
    p["vis_enc/w2"] = glorot(rng, cfg.enc_hidden, cfg.chan_width)
    p["vis_enc/b2"] = np.zeros(cfg.chan_width)
    p["aud_dec/w1"] = glorot(rng, cfg.chan_width, cfg.dec_hidden_audio)
    p["aud_dec/b1"] = 0.01 * np.ones(cfg.dec_hidden_audio)
    p["aud_dec/w2"] = glorot(rng, cfg.dec_hidden_audio, cfg.dec_hidden_audio)
    p["aud_dec/b2"] = 0.01 * np.ones(cfg.dec_hidden_audio)
    p["aud_proj/w"] = glorot(rng, cfg.dec_hidden_audio, cfg.d_fused)
    p["aud_proj/b"] = np.zeros(cfg.d_fused)
    p["vis_dec/w1"] = glorot(rng, cfg.chan_width, cfg.dec_hidden_visual)
    p["vis_dec/b1"] = 0.01 * np.ones(cfg.dec_hidden_visual)
    p["vis_dec/w2"] = glorot(rng, cfg.dec_hidden_visual, cfg.dec_hidden_visual)
    p["vis_dec/b2"] = 0.01 * np.ones(cfg.dec_hidden_visual)
    p["vis_proj/w"] = glorot(rng, cfg.dec_hidden_visual, cfg.d_fused)
    p["vis_proj/b"] = np.zeros(cfg.d_fused)
    p["psp/sim_v"] = glorot(rng, cfg.d_fused, cfg.d_sim)
    p["psp/sim_a"] = glorot(rng, cfg.d_fused, cfg.d_sim)
    p["psp/fuse_a"] = glorot(rng, cfg.d_fused, cfg.d_fused)
    p["psp/fuse_v"] = glorot(rng, cfg.d_fused, cfg.d_fused)
    p["head/w1"] = glorot(rng, cfg.d_fused, cfg.head_hidden)
    p["head/b1"] = np.zeros(cfg.head_hidden)
    p["head/w2"] = glorot(rng, cfg.head_hidden, cfg.n_classes)
    p["head/b2"] = np.zeros(cfg.n_classes)
    return p


# ---------------------------------------------------------------------------
# frozen channel draws
# ---------------------------------------------------------------------------


@dataclass
class LinkDraw:
    """One frozen realization of every stochastic link quantity."""

    snr_db: float
    csi: str
    h_up: np.ndarray  # (B, M, K)
    w_up: np.ndarray | None  # (B, K, M); None for csi=none
    eps_up: np.ndarray  # (B, M, L_up) unit-variance noise
    sigma_up: float
    erased: np.ndarray  # (B,) detector build failures (frame erasures)
    scale_up: np.ndarray | None = None  # (B, K) frozen transmit scales
    h_side: np.ndarray | None = None  # (B, 1, 1)
    w_side: np.ndarray | None = None
    eps_side: np.ndarray | None = None  # (B, 1, L_side)
    sigma_side: float = 0.0
    scale_side: np.ndarray | None = None

    def frozen(self, cache: dict) -> "LinkDraw":
        """Copy with the transmit scales pinned from a forward cache."""
        return dataclasses.replace(
            self, scale_up=cache["scale_up"], scale_side=cache.get("scale_side")
        )


def _cn(rng: np.random.Generator, shape: tuple) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _build_detectors(h_draws, csi, sched, pilot_amp, sigma2, rng):
    """ZF detectors per drawn channel; marks failures as erasures."""
    n, m, k = h_draws.shape
    if csi == "none":
        return None, np.zeros(n, dtype=bool)
    w = np.zeros((n, k, m), dtype=complex)
    erased = np.zeros(n, dtype=bool)
    for i in range(n):
        if csi == "perfect":
            h_used = h_draws[i]
        else:
            y_p = h_draws[i] @ (pilot_amp * sched.symbols) + np.sqrt(sigma2) * _cn(
                rng, (m, sched.n_slots)
            )
            h_used = ls_estimate(y_p, sched).h_best
        try:
            w[i] = detector_matrix(h_used)
        except IllConditioned:
            erased[i] = True
    return w, erased


def draw_link(
    cfg: ExperimentConfig,
    rng: np.random.Generator,
    snr_db: float,
    batch_size: int,
    per_sample: bool = False,
) -> LinkDraw:
    """Draw every stochastic link quantity for one batch.

    Training uses one channel per batch (per_sample=False, slow fading per
    frame sequence); evaluation draws an independent channel per sample.
    """
    model = ChannelModel(cfg.channel, cfg.rician_k)
    k_up = n_users(cfg.mode)
    sigma2 = snr_to_noise_power(cfg.power, snr_db)
    pilot_amp = np.sqrt(cfg.power)
    l_up = cfg.t_segments * cfg.chan_width // 2
    n_draws = batch_size if per_sample else 1

    sched_up = make_pilot(k_up, cfg.pilot_len * k_up, cfg.pilot_base_freq)
    h_up = np.stack([draw_channel(model, M_RX, k_up, rng).h for _ in range(n_draws)])
    w_up, erased = _build_detectors(h_up, cfg.csi, sched_up, pilot_amp, sigma2, rng)

    kwargs: dict = {}
    if cfg.mode == "multimodal":
        sched_side = make_pilot(1, cfg.pilot_len, cfg.pilot_base_freq)
        h_side = np.stack([draw_channel(model, 1, 1, rng).h for _ in range(n_draws)])
        w_side, erased_side = _build_detectors(
            h_side, cfg.csi, sched_side, pilot_amp, sigma2, rng
        )
        erased = erased | erased_side
        l_side = cfg.t_segments * cfg.d_audio // 2
        if not per_sample:
            h_side = np.repeat(h_side, batch_size, axis=0)
            if w_side is not None:
                w_side = np.repeat(w_side, batch_size, axis=0)
        kwargs.update(
            h_side=h_side,
            w_side=w_side,
            eps_side=_cn(rng, (batch_size, 1, l_side)),
            sigma_side=np.sqrt(sigma2),
        )

    if not per_sample:
        h_up = np.repeat(h_up, batch_size, axis=0)
        if w_up is not None:
            w_up = np.repeat(w_up, batch_size, axis=0)
        erased = np.repeat(erased, batch_size, axis=0)

    return LinkDraw(
        snr_db=snr_db,
        csi=cfg.csi,
        h_up=h_up,
        w_up=w_up,
        eps_up=_cn(rng, (batch_size, M_RX, l_up)),
        sigma_up=np.sqrt(sigma2),
        erased=erased,
        **kwargs,
    )


# ---------------------------------------------------------------------------
# link application
# ---------------------------------------------------------------------------


def _row_scales(x: np.ndarray, power: float, frozen: np.ndarray | None) -> np.ndarray:
    """Per-user power-normalization factors (stop-gradient constants)."""
    if frozen is not None:
        return frozen
    mean_sq = np.mean(np.abs(x) ** 2, axis=-1)
    return np.where(mean_sq > 0, np.sqrt(power / np.where(mean_sq > 0, mean_sq, 1.0)), 1.0)


def _apply_link(x, h, w, eps, sigma, scale):
    """Scale, propagate, detect, de-scale; also returns the effective
    user->user Jacobian absorbed by the backward pass."""
    y = np.einsum("bmk,bkl->bml", h, x * scale[..., None]) + sigma * eps
    if w is not None:
        xhat = np.einsum("bkm,bml->bkl", w, y)
        base = np.einsum("bkm,bmu->bku", w, h)
    else:
        k = x.shape[1]
        xhat = y[:, :k, :]
        base = h[:, :k, :]
    xhat = xhat / scale[..., None]
    jac = base * scale[:, None, :] / scale[:, :, None]
    return xhat, jac


def _link_adjoint(d_xhat: np.ndarray, jac: np.ndarray) -> np.ndarray:
    return np.einsum("bku,bkl->bul", jac.conj(), d_xhat)


# ---------------------------------------------------------------------------
# forward / backward
# ---------------------------------------------------------------------------


def forward(
    params: dict,
    audio: np.ndarray,
    visual: np.ndarray,
    link: LinkDraw,
    cfg: ExperimentConfig,
) -> dict:
    """Run the pipeline; returns a cache holding every backward input."""
    mode = cfg.mode
    bsz, t = audio.shape[0], cfg.t_segments
    c: dict = {"mode": mode}
    has_audio = mode in ("multimodal", "audio-only")
    has_video = mode in ("multimodal", "video-only")

    rows = []
    if has_audio:
        c["rnn_cache"] = rnn_states(audio, params, cfg.rnn_cell)
        c["hid"] = rnn_hidden(c["rnn_cache"])
        c["za"] = channel_encode(c["hid"], params, "aud_enc")
        rows.append(c["za"].reshape(bsz, 1, -1))
    if mode == "multimodal":
        # side link: raw audio features reach the video user through a SISO
        # channel; nothing upstream is trainable, so no gradient flows here
        xs = euler_forward(audio).reshape(bsz, 1, -1)
        scale_side = _row_scales(xs, cfg.power, link.scale_side)
        c["scale_side"] = scale_side
        xhat_s, _ = _apply_link(
            xs, link.h_side, link.w_side, link.eps_side, link.sigma_side, scale_side
        )
        c["a_star"] = euler_inverse(xhat_s.reshape(bsz, t, -1))
    if has_video:
        a_guide = c.get("a_star") if mode == "multimodal" else None
        c["v_att"] = agva_attend(visual, a_guide, params)
        c["zv"] = channel_encode(c["v_att"], params, "vis_enc")
        rows.append(c["zv"].reshape(bsz, 1, -1))

    x_up = np.concatenate(rows, axis=1)
    scale_up = _row_scales(x_up, cfg.power, link.scale_up)
    c["scale_up"] = scale_up
    xhat, jac = _apply_link(x_up, link.h_up, link.w_up, link.eps_up, link.sigma_up, scale_up)
    c["jac_up"] = jac

    row = 0
    if has_audio:
        c["za_hat"] = xhat[:, row].reshape(bsz, t, -1)
        row += 1
        c["m_a"] = channel_decode(c["za_hat"], params, "aud_dec", "aud_proj")
    if has_video:
        c["zv_hat"] = xhat[:, row].reshape(bsz, t, -1)
        c["m_v"] = channel_decode(c["zv_hat"], params, "vis_dec", "vis_proj")

    if mode == "multimodal":
        c["w_va"], c["w_av"] = psp.similarity(
            c["m_v"], c["m_a"], params["psp/sim_v"], params["psp/sim_a"]
        )
        c["what_va"] = psp.normalize_connections(c["w_va"])
        c["what_av"] = psp.normalize_connections(c["w_av"])
        c["eta_va"] = psp.threshold_connections(c["what_va"], cfg.tau1)
        c["eta_av"] = psp.threshold_connections(c["what_av"], cfg.tau1)
        c["sd_v"], c["sd_a"] = psp.propagate(
            c["m_v"], c["m_a"], c["eta_va"], c["eta_av"],
            params["psp/fuse_a"], params["psp/fuse_v"],
        )
    else:
        only = c["m_a"] if has_audio else c["m_v"]
        c["sd_v"] = only
        c["sd_a"] = only

    c["probs"] = psp.classify(c["sd_v"], c["sd_a"], params)
    c["audio_in"] = audio
    c["visual_in"] = visual
    return c


def backward(
    params: dict,
    cache: dict,
    d_logits: np.ndarray,
    cfg: ExperimentConfig,
    d_sdv_extra: np.ndarray | None = None,
    d_sda_extra: np.ndarray | None = None,
) -> dict:
    """Gradients of every trainable parameter given the loss cotangents.

    d_logits is the gradient at the classifier logits; d_sd*_extra carry
    additional loss terms applied directly to the fused features.
    """
    mode = cache["mode"]
    bsz = d_logits.shape[0]
    has_audio = mode in ("multimodal", "audio-only")
    has_video = mode in ("multimodal", "video-only")
    grads = {k: np.zeros_like(v) for k, v in params.items()}

    def add(gs: dict):
        for key, val in gs.items():
            grads[key] += val

    d_sdv, d_sda, g_head = psp.classify_backward(d_logits, cache["sd_v"], cache["sd_a"], params)
    add(g_head)
    if d_sdv_extra is not None:
        d_sdv = d_sdv + d_sdv_extra
    if d_sda_extra is not None:
        d_sda = d_sda + d_sda_extra

    if mode == "multimodal":
        d_mv, d_ma, d_eva, d_eav, d_fa, d_fv = psp.propagate_backward(
            d_sdv, d_sda, cache["m_v"], cache["m_a"], cache["eta_va"], cache["eta_av"],
            params["psp/fuse_a"], params["psp/fuse_v"],
        )
        add({"psp/fuse_a": d_fa, "psp/fuse_v": d_fv})
        d_what_va = psp.threshold_connections_backward(d_eva, cache["what_va"], cfg.tau1)
        d_what_av = psp.threshold_connections_backward(d_eav, cache["what_av"], cfg.tau1)
        d_wva = psp.normalize_connections_backward(d_what_va, cache["w_va"])
        d_wav = psp.normalize_connections_backward(d_what_av, cache["w_av"])
        d_mv2, d_ma2, d_pv, d_pa = psp.similarity_backward(
            d_wva, d_wav, cache["m_v"], cache["m_a"], params["psp/sim_v"], params["psp/sim_a"]
        )
        d_mv += d_mv2
        d_ma += d_ma2
        add({"psp/sim_v": d_pv, "psp/sim_a": d_pa})
    else:
        d_only = d_sdv + d_sda
        d_ma = d_only if has_audio else None
        d_mv = d_only if has_video else None

    d_rows = []
    if has_audio:
        d_za_hat, g_dec = channel_decode_backward(
            d_ma, cache["za_hat"], params, "aud_dec", "aud_proj"
        )
        add(g_dec)
        d_rows.append(d_za_hat.reshape(bsz, 1, -1))
    if has_video:
        d_zv_hat, g_dec = channel_decode_backward(
            d_mv, cache["zv_hat"], params, "vis_dec", "vis_proj"
        )
        add(g_dec)
        d_rows.append(d_zv_hat.reshape(bsz, 1, -1))

    d_x = _link_adjoint(np.concatenate(d_rows, axis=1), cache["jac_up"])

    row = 0
    if has_audio:
        d_za = d_x[:, row].reshape(cache["za"].shape)
        row += 1
        d_hid, g_enc = channel_encode_backward(d_za, cache["hid"], params, "aud_enc")
        add(g_enc)
        add(rnn_backward(d_hid, cache["rnn_cache"], params))
    if has_video:
        d_zv = d_x[:, row].reshape(cache["zv"].shape)
        d_vatt, g_enc = channel_encode_backward(d_zv, cache["v_att"], params, "vis_enc")
        add(g_enc)
        a_guide = cache.get("a_star") if mode == "multimodal" else None
        _, g_agva = agva_backward(d_vatt, cache["visual_in"], a_guide, params)
        add(g_agva)
    return grads
