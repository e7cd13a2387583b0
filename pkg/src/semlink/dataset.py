"""Synthetic audio-visual event dataset.

Each sample is a T-segment clip containing one event of a random class over
a contiguous span of at least two segments; remaining segments are
background (the last class index). Segment features are built from
per-class latent prototypes plus Gaussian jitter whose latent draw is
shared across the two modalities, so cross-modal structure is real and
exploitable by attention and fusion.

Class identity is split across modalities: audio prototypes separate class
pairs strongly and classes within a pair only weakly; visual prototypes do
the opposite. Either modality alone is ambiguous at realistic jitter, while
the pair identifies the class, which makes multimodal gains measurable.
One visual location per class carries the class prototype; the rest carry
background, giving the attention block genuine spatial signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig


@dataclass
class SynthDataset:
    audio: np.ndarray  # (N, T, d_audio)
    visual: np.ndarray  # (N, T, k, d_visual)
    labels: np.ndarray  # (N, T, C) one-hot; background = last class

    def __len__(self) -> int:
        return self.audio.shape[0]

    @property
    def presence(self) -> np.ndarray:
        """Event-presence mask (N, T): 1 where the segment is not background."""
        return 1.0 - self.labels[..., -1]

    def subset(self, idx: np.ndarray) -> "SynthDataset":
        return SynthDataset(self.audio[idx], self.visual[idx], self.labels[idx])


def synth_dataset(cfg: ExperimentConfig, rng: np.random.Generator) -> SynthDataset:
    n, t, c = cfg.n_samples, cfg.t_segments, cfg.n_classes
    n_events = c - 1
    bg = n_events
    dz = cfg.latent_dim

    # latent prototypes; the weak direction disambiguates within a group
    n_groups_a = (n_events + 1) // 2
    base_a = cfg.class_sep * rng.standard_normal((n_groups_a, dz))
    base_v = cfg.class_sep * rng.standard_normal((2, dz))
    unique_a = cfg.weak_sep * rng.standard_normal((n_events, dz))
    unique_v = cfg.weak_sep * rng.standard_normal((n_events, dz))
    lat_a = np.empty((c, dz))
    lat_v = np.empty((c, dz))
    for cls in range(n_events):
        lat_a[cls] = base_a[cls // 2] + unique_a[cls]
        lat_v[cls] = base_v[cls % 2] + unique_v[cls]
    lat_a[bg] = cfg.class_sep * rng.standard_normal(dz)
    lat_v[bg] = cfg.class_sep * rng.standard_normal(dz)

    map_a = rng.standard_normal((dz, cfg.d_audio)) / np.sqrt(dz)
    map_v = rng.standard_normal((cfg.k_locations, dz, cfg.d_visual)) / np.sqrt(dz)

    # per-segment class indices: one event span of length >= 2 per sample
    seg_cls = np.full((n, t), bg, dtype=np.int64)
    event_cls = rng.integers(0, n_events, size=n)
    span_len = rng.integers(2, t + 1, size=n)
    for i in range(n):
        start = int(rng.integers(0, t - span_len[i] + 1))
        seg_cls[i, start : start + span_len[i]] = event_cls[i]

    eps = rng.standard_normal((n, t, dz))  # jitter latent, shared across modalities
    audio = (lat_a[seg_cls] + cfg.jitter * eps) @ map_a

    # the event is visible at one random location per sample, so spatial
    # position carries no class information and attention has to find it
    visual = np.empty((n, t, cfg.k_locations, cfg.d_visual))
    informative = rng.integers(0, cfg.k_locations, size=n)
    for j in range(cfg.k_locations):
        lat = np.where(
            ((informative[:, None] == j) & (seg_cls != bg))[..., None],
            lat_v[seg_cls],
            lat_v[bg],
        )
        visual[:, :, j, :] = (lat + cfg.jitter * eps) @ map_v[j]

    labels = np.zeros((n, t, c))
    np.put_along_axis(labels, seg_cls[..., None], 1.0, axis=-1)
    return SynthDataset(audio=audio, visual=visual, labels=labels)


def split_dataset(ds: SynthDataset, train_frac: float, rng: np.random.Generator):
    """Deterministic shuffled train/held-out split."""
    n = len(ds)
    perm = rng.permutation(n)
    n_train = int(round(n * train_frac))
    return ds.subset(perm[:n_train]), ds.subset(perm[n_train:])
