"""Losses, scheduled plain gradient descent, and gradient verification.

The classifier loss is mean cross-entropy over segments and classes
(natural log, probabilities clipped below at 1e-12). The cross-modal
similarity loss compares per-segment cosine similarity of the fused
audio/visual features against the event-presence labels with mean squared
error; zero-norm segments are skipped and counted. The total is
cls + beta * avs.

The optimizer is plain gradient descent whose step size decays by a fixed
factor every few epochs; momentum is available but off by default.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from . import model
from .config import ExperimentConfig
from .dataset import SynthDataset, synth_dataset
from .errors import ShapeMismatch
from .rng import substream

PROB_FLOOR = 1e-12
ZERO_NORM_TOL = 1e-12


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LossReport:
    cls: float
    avs: float
    total: float
    beta: float
    avs_skipped: int = 0


def ce_loss(x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy -sum(y * ln(clip(x))) / (segments * classes)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ShapeMismatch(f"predictions {x.shape} vs labels {y.shape}")
    clipped = np.clip(x, PROB_FLOOR, 1.0)
    return float(-(y * np.log(clipped)).sum() / x.size)


def _avs_details(sd_v: np.ndarray, sd_a: np.ndarray, g: np.ndarray):
    """Loss plus gradients w.r.t. both feature stacks and the skip count.

    Cosine similarity is invariant to the positive rescaling performed by
    the l1 pre-normalization, so value and gradient are computed from the
    raw features; segments with a zero-norm feature are excluded.
    """
    sd_v = np.asarray(sd_v, dtype=float)
    sd_a = np.asarray(sd_a, dtype=float)
    g = np.asarray(g, dtype=float)
    nv = np.linalg.norm(sd_v, axis=-1)
    na = np.linalg.norm(sd_a, axis=-1)
    valid = (nv > ZERO_NORM_TOL) & (na > ZERO_NORM_TOL)
    n_valid = int(valid.sum())
    n_skipped = int(valid.size - n_valid)
    if n_valid == 0:
        return 0.0, np.zeros_like(sd_v), np.zeros_like(sd_a), n_skipped
    nv_s = np.where(valid, nv, 1.0)
    na_s = np.where(valid, na, 1.0)
    dot = (sd_v * sd_a).sum(axis=-1)
    cos = np.where(valid, dot / (nv_s * na_s), 0.0)
    diff = np.where(valid, cos - g, 0.0)
    loss = float((diff**2).sum() / n_valid)
    d_cos = 2.0 * diff / n_valid
    d_v = d_cos[..., None] * (
        sd_a / (nv_s * na_s)[..., None] - cos[..., None] * sd_v / (nv_s**2)[..., None]
    )
    d_a = d_cos[..., None] * (
        sd_v / (nv_s * na_s)[..., None] - cos[..., None] * sd_a / (na_s**2)[..., None]
    )
    d_v = np.where(valid[..., None], d_v, 0.0)
    d_a = np.where(valid[..., None], d_a, 0.0)
    return loss, d_v, d_a, n_skipped


def avs_loss(sd_v: np.ndarray, sd_a: np.ndarray, g: np.ndarray) -> float:
    """MSE between per-segment cosine similarity and event presence."""
    return _avs_details(sd_v, sd_a, g)[0]


def total_loss(cls: float, avs: float, beta: float) -> float:
    return cls + beta * avs


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


@dataclass
class OptimizerState:
    step_size: float
    epoch: int = 0
    decay_every: int = 10
    decay_factor: float = 0.1
    momentum: float = 0.0
    velocity: dict | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")


def step(params: dict, grads: dict, opt: OptimizerState) -> dict:
    """One descent update params - step_size * grads (momentum optional)."""
    if opt.momentum > 0.0:
        if opt.velocity is None:
            opt.velocity = {k: np.zeros_like(v) for k, v in params.items()}
        for k in params:
            opt.velocity[k] = opt.momentum * opt.velocity[k] + grads[k]
        return {k: params[k] - opt.step_size * opt.velocity[k] for k in params}
    return {k: params[k] - opt.step_size * grads[k] for k in params}


def advance_epoch(opt: OptimizerState) -> OptimizerState:
    """Count one finished epoch; decay the step size at each boundary."""
    opt.epoch += 1
    if opt.decay_every > 0 and opt.epoch % opt.decay_every == 0:
        opt.step_size *= opt.decay_factor
    return opt


# ---------------------------------------------------------------------------
# batch loss + gradients through the full pipeline
# ---------------------------------------------------------------------------


def loss_and_grads(
    params: dict,
    audio: np.ndarray,
    visual: np.ndarray,
    labels: np.ndarray,
    presence: np.ndarray,
    link: model.LinkDraw,
    cfg: ExperimentConfig,
):
    """Forward, losses, and analytic gradients for one frozen link draw."""
    cache = model.forward(params, audio, visual, link, cfg)
    probs = cache["probs"]
    cls = ce_loss(probs, labels)
    d_logits = (probs - labels) / probs.size
    d_sdv_extra = d_sda_extra = None
    avs = 0.0
    skipped = 0
    if cfg.mode == "multimodal":
        avs, d_v, d_a, skipped = _avs_details(cache["sd_v"], cache["sd_a"], presence)
        if cfg.beta != 0.0:
            d_sdv_extra = cfg.beta * d_v
            d_sda_extra = cfg.beta * d_a
    grads = model.backward(params, cache, d_logits, cfg, d_sdv_extra, d_sda_extra)
    report = LossReport(
        cls=cls, avs=avs, total=total_loss(cls, avs, cfg.beta), beta=cfg.beta,
        avs_skipped=skipped,
    )
    return report, grads, cache


def batch_loss(params, audio, visual, labels, presence, link, cfg) -> float:
    """Scalar objective for a frozen link draw (finite-difference target)."""
    cache = model.forward(params, audio, visual, link, cfg)
    cls = ce_loss(cache["probs"], labels)
    avs = avs_loss(cache["sd_v"], cache["sd_a"], presence) if cfg.mode == "multimodal" else 0.0
    return total_loss(cls, avs, cfg.beta)


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def train_model(
    cfg: ExperimentConfig,
    ds_train: SynthDataset,
    seed: int,
    epochs: int | None = None,
    eval_fn=None,
    eval_every: int = 10,
    target_acc: float | None = None,
):
    """Train a fresh model; returns (params, history).

    Each batch draws a fresh SNR from the training grid and a fresh channel.
    history holds one dict per epoch (mean losses, skipped batches). When
    eval_fn and target_acc are given, training stops early once the
    evaluation reaches the target.
    """
    with threadpool_limits(limits=1):  # tiny operands; BLAS threads only hurt
        return _train_model(cfg, ds_train, seed, epochs, eval_fn, eval_every, target_acc)


def _train_model(cfg, ds_train, seed, epochs, eval_fn, eval_every, target_acc):
    params = model.init_params(cfg, substream(seed, "init", cfg.mode))
    rng = substream(seed, "train", cfg.channel, cfg.mode, cfg.csi)
    opt = OptimizerState(
        step_size=cfg.lr,
        decay_every=cfg.decay_every,
        decay_factor=cfg.decay_factor,
        momentum=cfg.momentum,
    )
    snr_grid = np.asarray(cfg.train_snr_list, dtype=float)
    n = len(ds_train)
    history = []
    for _ in range(epochs if epochs is not None else cfg.epochs):
        perm = rng.permutation(n)
        sums = {"cls": 0.0, "avs": 0.0, "total": 0.0}
        n_batches = 0
        n_erased = 0
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            snr_db = float(rng.choice(snr_grid))
            link = model.draw_link(cfg, rng, snr_db, len(idx))
            if link.erased.any():
                n_erased += 1
                continue
            report, grads, _ = loss_and_grads(
                params,
                ds_train.audio[idx],
                ds_train.visual[idx],
                ds_train.labels[idx],
                ds_train.presence[idx],
                link,
                cfg,
            )
            params = step(params, grads, opt)
            sums["cls"] += report.cls
            sums["avs"] += report.avs
            sums["total"] += report.total
            n_batches += 1
        advance_epoch(opt)
        denom = max(n_batches, 1)
        entry = {k: v / denom for k, v in sums.items()}
        entry["erased_batches"] = n_erased
        entry["epoch"] = opt.epoch
        history.append(entry)
        if eval_fn is not None and target_acc is not None and opt.epoch % eval_every == 0:
            if eval_fn(params) >= target_acc:
                break
    return params, history


# ---------------------------------------------------------------------------
# gradient verification
# ---------------------------------------------------------------------------


@dataclass
class GradCheckReport:
    per_group: dict
    threshold: float
    fd_step: float
    kink_margin: float = np.inf

    @property
    def passed(self) -> bool:
        return all(err <= self.threshold for err in self.per_group.values())

    def lines(self) -> list[str]:
        out = []
        for group in sorted(self.per_group):
            err = self.per_group[group]
            verdict = "ok" if err <= self.threshold else "FAIL"
            out.append(f"{group:10s} max rel err {err:.3e}  {verdict}")
        if self.kink_margin < 10 * self.fd_step:
            out.append(
                f"warning: evaluation point sits {self.kink_margin:.2e} from a "
                "ReLU/threshold kink; finite differences are unreliable here"
            )
        return out


def _kink_margin(params: dict, cache: dict, cfg: ExperimentConfig) -> float:
    """Distance from the forward pass to the nearest piecewise-linear kink.

    Central differences straddling a ReLU or threshold kink report spurious
    gradient errors; a healthy margin certifies the check is meaningful.
    """
    from .euler import euler_inverse

    margins = []

    def dense_pre(x, prefix, idx):
        return x @ params[f"{prefix}/w{idx}"] + params[f"{prefix}/b{idx}"]

    def track_decoder(z_key, prefix):
        f = euler_inverse(cache[z_key])
        pre1 = dense_pre(f, prefix, 1)
        margins.append(np.abs(pre1).min())
        pre2 = dense_pre(np.maximum(pre1, 0.0), prefix, 2)
        margins.append(np.abs(pre2).min())

    if "hid" in cache:
        margins.append(np.abs(dense_pre(cache["hid"], "aud_enc", 1)).min())
        track_decoder("za_hat", "aud_dec")
    if "v_att" in cache:
        margins.append(np.abs(dense_pre(cache["v_att"], "vis_enc", 1)).min())
        track_decoder("zv_hat", "vis_dec")
    fused = (cache["sd_v"] + cache["sd_a"]) / 2.0
    margins.append(np.abs(dense_pre(fused, "head", 1)).min())
    if cache["mode"] == "multimodal":
        margins.append(np.abs(cache["w_va"]).min())
        margins.append(np.abs(cache["w_av"]).min())
        margins.append(np.abs(cache["what_va"] - cfg.tau1).min())
        margins.append(np.abs(cache["what_av"] - cfg.tau1).min())
    return float(min(margins))


def gradcheck_config(mode: str = "multimodal") -> ExperimentConfig:
    """A shrunken configuration sized for exhaustive finite differences."""
    return ExperimentConfig(
        mode=mode,
        t_segments=4,
        n_classes=3,
        n_samples=12,
        latent_dim=4,
        d_audio=8,
        d_visual=12,
        k_locations=3,
        d_attn=8,
        h_rnn=8,
        chan_width=8,
        enc_hidden=8,
        dec_hidden_audio=12,
        dec_hidden_visual=12,
        d_fused=8,
        d_sim=4,
        head_hidden=10,
        pilot_len=8,
    )


def gradcheck(
    cfg: ExperimentConfig | None = None,
    seed: int = 9,
    snr_db: float = 12.0,
    batch_size: int = 3,
    fd_step: float = 1e-4,
    threshold: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients against central finite differences.

    Every coordinate of every parameter is perturbed by +/- fd_step on a
    frozen link draw; the report carries the max relative error per
    parameter group at the given threshold. The default seed pins an
    evaluation point with comfortable distance from the piecewise-linear
    kinks (see GradCheckReport.kink_margin); at a kink, central differences
    report spurious errors no analytic gradient can match.
    """
    cfg = cfg if cfg is not None else gradcheck_config()
    with threadpool_limits(limits=1):
        return _gradcheck(cfg, seed, snr_db, batch_size, fd_step, threshold)


def _gradcheck(cfg, seed, snr_db, batch_size, fd_step, threshold):
    ds = synth_dataset(cfg, substream(seed, "gradcheck-data"))
    audio = ds.audio[:batch_size]
    visual = ds.visual[:batch_size]
    labels = ds.labels[:batch_size]
    presence = ds.presence[:batch_size]
    params = model.init_params(cfg, substream(seed, "gradcheck-init"))
    link = model.draw_link(cfg, substream(seed, "gradcheck-link"), snr_db, batch_size)
    if link.erased.any():
        raise RuntimeError("gradcheck link draw was erased; pick another seed")
    cache = model.forward(params, audio, visual, link, cfg)
    link = link.frozen(cache)
    margin = _kink_margin(params, cache, cfg)

    _, grads, _ = loss_and_grads(params, audio, visual, labels, presence, link, cfg)

    def objective() -> float:
        return batch_loss(params, audio, visual, labels, presence, link, cfg)

    per_group: dict = {}
    for key in sorted(params):
        flat = params[key].reshape(-1)
        g_flat = grads[key].reshape(-1)
        worst = 0.0
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + fd_step
            hi = objective()
            flat[i] = orig - fd_step
            lo = objective()
            flat[i] = orig
            fd = (hi - lo) / (2.0 * fd_step)
            denom = max(abs(g_flat[i]), abs(fd), 1e-8)
            worst = max(worst, abs(g_flat[i] - fd) / denom)
        group = key.split("/")[0]
        per_group[group] = max(per_group.get(group, 0.0), worst)
    return GradCheckReport(
        per_group=per_group, threshold=threshold, fd_step=fd_step, kink_margin=margin
    )
