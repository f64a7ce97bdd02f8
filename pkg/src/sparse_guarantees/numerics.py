"""
Dense linear-algebra kernels, reproducible random streams and order statistics

Every other module builds on the routines here:
- Householder QR least squares with an explicit rank check
- power iteration for the largest eigenvalue of A^T A
- a counter-based (Philox) random stream with Box-Muller normals
- Gershgorin eigenvalue brackets and the median convention used in reports
"""

import logging
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence, Tuple, Union

import numpy as np
from scipy.linalg import solve_triangular

from .config import (
    OPERATOR_NORM_SAFETY,
    POWER_ITERATION_MAX_ITER,
    POWER_ITERATION_TOLERANCE,
    RANK_TOLERANCE,
    SYMMETRY_TOLERANCE,
)
from .errors import (
    EmptyInputError,
    InputError,
    NoConvergenceError,
    NotSymmetricError,
    RankDeficientError,
)


logger = logging.getLogger(__name__)

# A DenseMatrix is a finite, two-dimensional float64 ndarray.
DenseMatrix = np.ndarray
ArrayLike = Union[np.ndarray, Sequence[float]]

_MASK64 = (1 << 64) - 1


def as_dense_matrix(values: ArrayLike) -> DenseMatrix:
    """
    Convert values to a finite two-dimensional float64 array.

    Raises:
        InputError: If the array is not two-dimensional or holds non-finite entries
    """
    matrix = np.asarray(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise InputError(f"Expected a two-dimensional matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise InputError("Matrix contains non-finite entries")
    return matrix


class StreamPurpose(IntEnum):
    """Disjoint counter blocks carved out of one (master_seed, stream_id) pair."""
    NOISE = 0
    SIGNAL = 1
    DICTIONARY = 2
    AUXILIARY = 3


@dataclass(frozen=True)
class RngStream:
    """
    Counter-based random stream.

    The Philox key is (master_seed, stream_id), so two streams with the same
    pair replay the same values and streams with distinct ids are independent.
    No state is carried between draws: each draw starts from ``counter``.
    """
    master_seed: int
    stream_id: int
    counter: int = 0

    @property
    def key(self) -> int:
        return ((self.master_seed & _MASK64) << 64) | (self.stream_id & _MASK64)

    def substream(self, purpose: StreamPurpose) -> "RngStream":
        """Same key, counter block reserved for ``purpose``."""
        return RngStream(self.master_seed, self.stream_id, (int(purpose) << 64) | (self.counter & _MASK64))

    def generator(self) -> np.random.Generator:
        """A fresh numpy Generator positioned at the start of this stream."""
        # counter occupies the upper half of Philox's 256-bit counter; the
        # lower half is left for the generator's own increments
        bit_generator = np.random.Philox(key=self.key, counter=self.counter << 128)
        return np.random.Generator(bit_generator)


def uniforms(stream: RngStream, count: int) -> np.ndarray:
    """Draw ``count`` uniform variates in [0, 1) from ``stream``."""
    if count < 0:
        raise InputError(f"count must be non-negative, got {count}")
    return stream.generator().random(count)


def gaussian(stream: RngStream, count: int) -> np.ndarray:
    """
    Draw ``count`` i.i.d. standard normal variates via Box-Muller.

    Args:
        stream: Random stream; identical streams give identical vectors
        count: Number of variates

    Returns:
        Array of shape (count,)
    """
    pairs = (count + 1) // 2
    u = uniforms(stream, 2 * pairs)
    u1 = 1.0 - u[:pairs]  # (0, 1], keeps the log finite
    u2 = u[pairs:]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    values = np.empty(2 * pairs)
    values[0::2] = radius * np.cos(angle)
    values[1::2] = radius * np.sin(angle)
    return values[:count]


def _qr_factor(a_sub: DenseMatrix) -> Tuple[np.ndarray, np.ndarray]:
    a_sub = np.asarray(a_sub, dtype=np.float64)
    if a_sub.ndim != 2:
        raise InputError(f"Expected a two-dimensional matrix, got shape {a_sub.shape}")
    rows, cols = a_sub.shape
    if rows < cols:
        raise RankDeficientError(f"Matrix with {rows} rows cannot have full column rank {cols}")
    q, r = np.linalg.qr(a_sub, mode="reduced")
    if cols:
        pivots = np.abs(np.diag(r))
        largest = pivots.max()
        if largest == 0.0 or pivots.min() <= RANK_TOLERANCE * largest:
            raise RankDeficientError(
                f"QR pivot {pivots.min():.3e} is below {RANK_TOLERANCE:g} x {largest:.3e}"
            )
    return q, r


def least_squares(a_sub: DenseMatrix, b: ArrayLike) -> np.ndarray:
    """
    Solve min ||b - A_sub y||_2 through a Householder QR factorization.

    Args:
        a_sub: Matrix with full column rank (rows >= cols)
        b: Right-hand side vector

    Returns:
        The least-squares coefficient vector

    Raises:
        RankDeficientError: If a diagonal entry of R is (relatively) zero
    """
    q, r = _qr_factor(a_sub)
    if r.shape[1] == 0:
        return np.zeros(0)
    return solve_triangular(r, q.T @ np.asarray(b, dtype=np.float64))


def gram_solve(a_sub: DenseMatrix, v: ArrayLike) -> np.ndarray:
    """Solve (A_sub^T A_sub) y = v using the R factor of A_sub."""
    _, r = _qr_factor(a_sub)
    z = solve_triangular(r, np.asarray(v, dtype=np.float64), trans="T")
    return solve_triangular(r, z)


def inverse_gram_trace(a_sub: DenseMatrix) -> float:
    """trace((A_sub^T A_sub)^-1) = ||R^-1||_F^2."""
    _, r = _qr_factor(a_sub)
    if r.shape[1] == 0:
        return 0.0
    r_inv = solve_triangular(r, np.eye(r.shape[1]))
    return float(np.sum(r_inv * r_inv))


def operator_norm_sq(a: DenseMatrix) -> float:
    """
    Estimate lambda_max(A^T A) by power iteration.

    The returned value is the converged estimate inflated by
    (1 + OPERATOR_NORM_SAFETY) so it can serve as a step-size bound.

    Raises:
        EmptyInputError: If A has no entries
        NoConvergenceError: If the estimate is still moving after the iteration cap
    """
    a = np.asarray(a, dtype=np.float64)
    if a.size == 0:
        raise EmptyInputError("operator_norm_sq needs a nonempty matrix")

    v = gaussian(RngStream(0, 0).substream(StreamPurpose.AUXILIARY), a.shape[1])
    v /= np.linalg.norm(v)
    estimate = 0.0
    for iteration in range(1, POWER_ITERATION_MAX_ITER + 1):
        w = a.T @ (a @ v)
        norm_w = float(np.linalg.norm(w))
        if norm_w == 0.0:
            return 0.0
        if abs(norm_w - estimate) <= POWER_ITERATION_TOLERANCE * norm_w:
            logger.debug(f"Power iteration converged after {iteration} steps: {norm_w:.12g}")
            return norm_w * (1.0 + OPERATOR_NORM_SAFETY)
        estimate = norm_w
        v = w / norm_w

    raise NoConvergenceError(
        f"Power iteration did not converge in {POWER_ITERATION_MAX_ITER} iterations",
        iterations=POWER_ITERATION_MAX_ITER,
    )


def median(values: ArrayLike) -> float:
    """
    Median with the mean-of-middle-two convention for even counts.

    Raises:
        EmptyInputError: If values is empty
    """
    data = np.asarray(values, dtype=np.float64).ravel()
    if data.size == 0:
        raise EmptyInputError("median of an empty sequence")
    return float(np.median(data))


def gershgorin_bounds(gram: DenseMatrix) -> Tuple[float, float]:
    """
    Gershgorin bracket [lo, hi] containing every eigenvalue of a symmetric matrix.

    Raises:
        NotSymmetricError: If gram is not square or deviates from its transpose by more
            than SYMMETRY_TOLERANCE
    """
    gram = np.asarray(gram, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise NotSymmetricError(f"Gram matrix must be square, got shape {gram.shape}")
    if gram.size and np.max(np.abs(gram - gram.T)) > SYMMETRY_TOLERANCE:
        raise NotSymmetricError("Gram matrix is not symmetric")

    diag = np.diag(gram)
    off_diagonal = np.abs(gram)
    np.fill_diagonal(off_diagonal, 0.0)
    radii = off_diagonal.sum(axis=1)
    return float(np.min(diag - radii)), float(np.max(diag + radii))
