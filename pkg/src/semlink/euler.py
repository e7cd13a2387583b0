"""Bidirectional real <-> complex feature mapping.

A real vector of even length d is split into halves [r ; s]; the halves
become the real and imaginary parts of a complex vector of length d/2,
equivalently expressed in polar form magnitude * exp(i * phase). The
inverse stacks [Re(z) ; Im(z)] back together. The split is an isometry:
||x||_2 equals the complex 2-norm of the mapped vector.

All functions operate on the last axis and broadcast over leading axes.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import OddLength


class PolarSignal(NamedTuple):
    """Polar view of a complex signal: nonnegative magnitude, phase in (-pi, pi]."""

    magnitude: np.ndarray
    phase: np.ndarray


def euler_forward(x: np.ndarray) -> np.ndarray:
    """Map real (..., d) with even d >= 2 to complex (..., d/2)."""
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    if d < 2 or d % 2 != 0:
        raise OddLength(f"feature dimension must be even and >= 2, got {d}")
    half = d // 2
    return x[..., :half] + 1j * x[..., half:]

def euler_inverse(z: np.ndarray) -> np.ndarray:
    """Map complex (..., n) back to real (..., 2n) as [Re ; Im]."""
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def to_polar(z: np.ndarray) -> PolarSignal:
    """Magnitude/phase view with phase pinned to (-pi, pi] and 0 at the origin."""
    z = np.asarray(z, dtype=complex)
    mag = np.abs(z)
    phase = np.angle(z)
    # np.angle yields -pi for negative reals with a negative-zero imaginary
    # part, and pi for -0.0+0.0j; pin both to the (-pi, pi] convention.
    phase = np.where(phase == -np.pi, np.pi, phase)
    phase = np.where(mag == 0.0, 0.0, phase)
    return PolarSignal(mag, phase)


def from_polar(polar: PolarSignal) -> np.ndarray:
    """Rebuild the complex signal magnitude * exp(i * phase)."""
    return polar.magnitude * np.exp(1j * polar.phase)
