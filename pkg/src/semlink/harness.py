"""Experiment orchestration: sweeps, metrics, and reproducible outputs.

A sweep trains one model per (channel, seed) at the configured mode/CSI --
training draws a fresh SNR from the grid every batch, so a single trained
model serves every SNR row -- then evaluates segment accuracy on the
held-out split with an independent channel drawn per sample. Rows are
emitted as diff-stable CSV; the run manifest records everything needed to
reproduce the bytes (config snapshot, seeds, stream derivations, version).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, model
from .config import ExperimentConfig, config_items
from .dataset import SynthDataset, split_dataset, synth_dataset
from .errors import IoFailure
from .rng import _tag_entropy, substream
from .train import train_model


@dataclass(frozen=True)
class MetricsRow:
    channel: str
    snr_db: float
    seed: int
    mode: str
    csi: str
    segment_accuracy: float
    frame_erasures: int


@dataclass
class RunManifest:
    """Everything needed to byte-reproduce a sweep.

    Wall-clock timing is tracked in memory only; the manifest file must be
    byte-identical across reruns, so volatile fields never reach disk.
    """

    config: list
    seeds: tuple
    stream_tags: list
    artifact_version: str
    started: float | None = None
    finished: float | None = None


def evaluate(
    params: dict,
    ds: SynthDataset,
    cfg: ExperimentConfig,
    seed: int,
    snr_db: float,
):
    """Segment accuracy on a dataset with one channel draw per sample.

    Samples whose detector could not be built (frame erasures) count every
    segment as wrong; returns (accuracy, erasure count).
    """
    with threadpool_limits(limits=1):
        rng = substream(seed, "eval", cfg.channel, cfg.mode, cfg.csi, snr_db)
        link = model.draw_link(cfg, rng, snr_db, len(ds), per_sample=True)
        cache = model.forward(params, ds.audio, ds.visual, link, cfg)
        correct = cache["probs"].argmax(-1) == ds.labels.argmax(-1)
        correct[link.erased] = False
        return float(correct.mean()), int(link.erased.sum())


def evaluate_direct(params: dict, ds: SynthDataset, cfg: ExperimentConfig) -> float:
    """Accuracy of the pipeline with the channel bypassed entirely."""
    n, t = len(ds), cfg.t_segments
    k = model.n_users(cfg.mode)
    eye = np.repeat(np.eye(model.M_RX, k, dtype=complex)[None], n, axis=0)
    w = np.repeat(np.eye(k, model.M_RX, dtype=complex)[None], n, axis=0)
    link = model.LinkDraw(
        snr_db=np.inf,
        csi="perfect",
        h_up=eye,
        w_up=w,
        eps_up=np.zeros((n, model.M_RX, t * cfg.chan_width // 2), dtype=complex),
        sigma_up=0.0,
        erased=np.zeros(n, dtype=bool),
        scale_up=np.ones((n, k)),
    )
    if cfg.mode == "multimodal":
        one = np.ones((n, 1, 1), dtype=complex)
        link = dataclasses.replace(
            link,
            h_side=one,
            w_side=one.copy(),
            eps_side=np.zeros((n, 1, t * cfg.d_audio // 2), dtype=complex),
            sigma_side=0.0,
            scale_side=np.ones((n, 1)),
        )
    cache = model.forward(params, ds.audio, ds.visual, link, cfg)
    return float((cache["probs"].argmax(-1) == ds.labels.argmax(-1)).mean())


def _stream_tags(cfg: ExperimentConfig, seed: int) -> list:
    """Per-module stream derivations recorded in the manifest."""
    tags = [
        ("dataset", (seed, "dataset")),
        ("split", (seed, "split")),
        ("init", (seed, "init", cfg.mode)),
        ("train", (seed, "train", cfg.channel, cfg.mode, cfg.csi)),
    ]
    rendered = []
    for name, path in tags:
        words = _tag_entropy(path[1:])
        rendered.append(
            (f"{cfg.channel}.seed{seed}.{name}", f"{path[0]}:{words[0]:08x}{words[1]:08x}")
        )
    return rendered


def run_sweep(cfg: ExperimentConfig, progress=None):
    """Train and evaluate the configured sweep; returns (rows, manifest).

    cfg.channel may be a comma-separated list; each channel trains its own
    models. Within one (channel, seed) cell a single SNR-randomized training
    serves all SNR rows.
    """
    import time

    manifest = RunManifest(
        config=config_items(cfg),
        seeds=tuple(cfg.seeds),
        stream_tags=[],
        artifact_version=__version__,
        started=time.time(),
    )
    rows = []
    for kind in cfg.channel.split(","):
        sub = dataclasses.replace(cfg, channel=kind)
        sub.validate()
        for seed in cfg.seeds:
            manifest.stream_tags.extend(_stream_tags(sub, seed))
            ds = synth_dataset(sub, substream(seed, "dataset"))
            train_ds, eval_ds = split_dataset(ds, sub.train_frac, substream(seed, "split"))
            params, _ = train_model(sub, train_ds, seed)
            for snr_db in sub.snr_list:
                acc, erasures = evaluate(params, eval_ds, sub, seed, snr_db)
                rows.append(
                    MetricsRow(kind, float(snr_db), int(seed), sub.mode, sub.csi, acc, erasures)
                )
                if progress is not None:
                    progress(rows[-1])
    rows.sort(key=lambda r: (r.channel, r.snr_db, r.seed, r.mode, r.csi))
    manifest.finished = time.time()
    return rows, manifest


def emit_csv(rows, path: str) -> None:
    """Write sorted metrics rows as CSV (6 significant digits, LF lines)."""
    if not rows:
        raise ValueError("no rows to emit")
    ordered = sorted(rows, key=lambda r: (r.channel, r.snr_db, r.seed, r.mode, r.csi))
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("channel,snr_db,seed,mode,csi,segment_accuracy,frame_erasures\n")
            for r in ordered:
                fh.write(
                    f"{r.channel},{r.snr_db:.6g},{r.seed},{r.mode},{r.csi},"
                    f"{r.segment_accuracy:.6g},{r.frame_erasures}\n"
                )
    except OSError as exc:
        raise IoFailure(f"cannot write CSV to {path}: {exc}") from exc


def write_manifest(manifest: RunManifest, path: str) -> None:
    """Flat key=value manifest; deterministic bytes for identical runs."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"artifact_version={manifest.artifact_version}\n")
            fh.write(f"seeds={','.join(str(s) for s in manifest.seeds)}\n")
            for key, val in manifest.config:
                fh.write(f"config.{key}={val}\n")
            for name, derivation in manifest.stream_tags:
                fh.write(f"stream.{name}={derivation}\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest to {path}: {exc}") from exc
