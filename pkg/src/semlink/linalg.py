"""Dense real/complex linear algebra and elementwise nonlinearities.

Matrices are plain numpy arrays (real or complex128); there is no wrapper
type. All functions are pure and safe to share across threads.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from . import kernels
from .errors import DimensionMismatch, IllConditioned

#: pivot-ratio floor below which a Hermitian system is declared unsolvable
PIVOT_RTOL = 1e-12

#: row sums at or below this are treated as zero rows in l1 normalization
L1_EPS = 1e-12


def hermitian(a: np.ndarray) -> np.ndarray:
    """Conjugate transpose of a 2-D matrix."""
    return a.conj().T


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with pinned left-to-right summation over k.

    The jitted kernel accumulates strictly in index order, so results are
    bit-reproducible across runs; the numpy fallback delegates to BLAS,
    which is deterministic in-process but does not pin the order.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionMismatch(f"cannot multiply {a.shape} by {b.shape}")
    if a.dtype != b.dtype:
        common = np.promote_types(a.dtype, b.dtype)
        a = a.astype(common)
        b = b.astype(common)
    return kernels.matmul_pinned(np.ascontiguousarray(a), np.ascontiguousarray(b))


def solve_hermitian_system(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive definite A via Cholesky.

    Raises IllConditioned when A is not positive definite or the Cholesky
    pivot ratio min(d)/max(d) falls below PIVOT_RTOL, signalling that
    zero-forcing detection cannot proceed.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"system matrix must be square, got {a.shape}")
    if b.shape[0] != a.shape[0]:
        raise DimensionMismatch(f"rhs rows {b.shape[0]} != system size {a.shape[0]}")
    try:
        chol = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned("matrix is not positive definite") from exc
    pivots = np.abs(np.diagonal(chol)) ** 2
    largest = pivots.max()
    if largest <= 0.0 or pivots.min() / largest < PIVOT_RTOL:
        raise IllConditioned(
            f"pivot ratio {pivots.min() / largest:.3e} below {PIVOT_RTOL:.0e}"
        )
    z = scipy.linalg.solve_triangular(chol, b, lower=True)
    return scipy.linalg.solve_triangular(chol.conj().T, z, lower=False)


def sample_cn(rng: np.random.Generator, rows: int, cols: int, variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian matrix with total per-entry variance."""
    if variance < 0:
        raise ValueError(f"variance must be nonnegative, got {variance}")
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols)))


def row_l1_normalize(a: np.ndarray, eps: float = L1_EPS) -> np.ndarray:
    """Divide each row (last axis) by its sum; rows summing <= eps pass through.

    Callers apply ReLU first, so entries are nonnegative and the row sum is
    the l1 norm. Zero rows stay zero: no positive connections, no propagation.
    """
    a = np.asarray(a, dtype=float)
    sums = a.sum(axis=-1, keepdims=True)
    return np.where(sums > eps, a / np.where(sums > eps, sums, 1.0), a)


def relu(a: np.ndarray) -> np.ndarray:
    return np.maximum(a, 0.0)


def sigmoid(a: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-a))


def softmax_row(a: np.ndarray) -> np.ndarray:
    """Numerically-stable softmax along the last axis."""
    shifted = a - a.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


_ELEMENTWISE = {
    "relu": relu,
    "tanh": np.tanh,
    "sigmoid": sigmoid,
    "softmax_row": softmax_row,
}


def elementwise(a: np.ndarray, fn: str) -> np.ndarray:
    """Apply a named nonlinearity: relu | tanh | sigmoid | softmax_row."""
    try:
        f = _ELEMENTWISE[fn]
    except KeyError:
        raise ValueError(f"unknown elementwise fn {fn!r}") from None
    return f(np.asarray(a, dtype=float))
