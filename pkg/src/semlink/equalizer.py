"""Pilot generation, per-slot least-squares channel estimation, ZF detection.

Pilots are deterministic unit-modulus sinusoids in time-orthogonal slots:
exactly one user transmits per slot, so each slot is a scalar LS problem
y_t * conj(x_t) / |x_t|^2 for that user's column. A full matrix estimate at
slot t assembles the most recent estimate of every column; slots where some
column has never been estimated score +inf and cannot be selected. The
estimate with the smallest per-slot squared error wins (first index on ties).

Zero-forcing detection inverts the estimated channel,
X_hat = (H^H H)^{-1} H^H Y, turning the channel effect into additive noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ShapeMismatch, TooShort, ZeroPilotSymbol
from .linalg import hermitian, solve_hermitian_system


@dataclass(frozen=True)
class PilotSchedule:
    """Known pilot symbols (users x slots) plus the active user per slot."""

    symbols: np.ndarray
    slot_user: np.ndarray

    @property
    def n_users(self) -> int:
        return self.symbols.shape[0]

    @property
    def n_slots(self) -> int:
        return self.symbols.shape[1]


@dataclass(frozen=True)
class ChannelEstimate:
    """Best per-slot LS estimate with its selection diagnostics."""

    h_best: np.ndarray
    per_t_error: np.ndarray
    t_min: int


def make_pilot(n_users: int, n_slots: int, base_freq: int = 1) -> PilotSchedule:
    """Build the time-orthogonal sinusoid pilot.

    User k owns a contiguous block of slots and transmits unit-modulus
    samples exp(i 2 pi f_k t / n_slots) there, with distinct integer
    frequencies f_k = base_freq + k; all other entries are exactly zero.
    """
    if n_users < 1:
        raise ValueError("need at least one user")
    if n_slots < 2 * n_users:
        raise TooShort(f"{n_slots} slots cannot carry pilots for {n_users} users")
    block = n_slots // n_users
    slot_user = np.minimum(np.arange(n_slots) // block, n_users - 1)
    t = np.arange(n_slots)
    symbols = np.zeros((n_users, n_slots), dtype=complex)
    for k in range(n_users):
        mask = slot_user == k
        fk = base_freq + k
        symbols[k, mask] = np.exp(1j * 2.0 * np.pi * fk * t[mask] / n_slots)
    return PilotSchedule(symbols=symbols, slot_user=slot_user)


def ls_estimate(y_pilot: np.ndarray, sched: PilotSchedule) -> ChannelEstimate:
    """Per-slot LS estimation with minimum-squared-error selection."""
    y_pilot = np.asarray(y_pilot, dtype=complex)
    if y_pilot.ndim != 2 or y_pilot.shape[1] != sched.n_slots:
        raise ShapeMismatch(
            f"received pilot {y_pilot.shape} does not match {sched.n_slots} slots"
        )
    x_active = sched.symbols[sched.slot_user, np.arange(sched.n_slots)]
    if np.any(np.abs(x_active) ** 2 < 1e-12):
        raise ZeroPilotSymbol("an active pilot slot carries a (near-)zero symbol")
    per_t, t_min, h_best = kernels.ls_scan(
        np.ascontiguousarray(y_pilot),
        np.ascontiguousarray(x_active),
        np.ascontiguousarray(sched.slot_user, dtype=np.int64),
        sched.n_users,
    )
    return ChannelEstimate(h_best=h_best, per_t_error=per_t, t_min=t_min)


def zf_detect(y: np.ndarray, est: ChannelEstimate | np.ndarray) -> np.ndarray:
    """Zero-forcing detection X_hat = (H^H H)^{-1} H^H Y.

    ``est`` may be a ChannelEstimate or a raw channel matrix (perfect CSI).
    Raises IllConditioned when the Gram matrix cannot be inverted reliably;
    callers report that as a frame erasure.
    """
    h = est.h_best if isinstance(est, ChannelEstimate) else np.asarray(est, dtype=complex)
    y = np.asarray(y, dtype=complex)
    if h.shape[0] < h.shape[1]:
        raise ShapeMismatch(f"need at least as many antennas as users, got {h.shape}")
    if y.shape[0] != h.shape[0]:
        raise ShapeMismatch(f"received {y.shape} does not match channel {h.shape}")
    hh = hermitian(h)
    return solve_hermitian_system(hh @ h, hh @ y)


def detector_matrix(h: np.ndarray) -> np.ndarray:
    """The ZF detector W = (H^H H)^{-1} H^H as an explicit (users x antennas) map.

    Raises IllConditioned exactly when zf_detect would.
    """
    h = np.asarray(h, dtype=complex)
    hh = hermitian(h)
    return solve_hermitian_system(hh @ h, hh)
