"""
Complex dense linear algebra shared by the channel model, the combiner and the
EM estimator: Hermitian checks, Cholesky factorization with an explicit pivot
floor, and the Schur-complement inversion of the signal/noise partitioned
covariance.

All functions are pure; inputs are never modified in place.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from whsim.errors import NotPositiveDefinite

logger = logging.getLogger(__name__)

ComplexMatrix = NDArray[np.complex128]

HERMITIAN_RTOL = 1e-12
PIVOT_FLOOR_SCALE = 1e-12  # pivots below this x trace/N are treated as singular
JITTER_SCALE = 1e-10


def as_complex_matrix(x, name: str = 'matrix') -> ComplexMatrix:
    """
    Converts `x` to a finite two-dimensional complex128 array.

    Raises:
    - ValueError: if `x` is not two-dimensional or holds NaN/Inf entries.
    """
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"`{name}` must be a 2-D matrix, got shape {arr.shape}.")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"`{name}` holds non-finite entries.")
    return arr


def is_hermitian(x: ComplexMatrix, rtol: float = HERMITIAN_RTOL) -> bool:
    """
    True when `x` is square and equals its conjugate transpose within `rtol`
    relative to its largest entry magnitude.
    """
    if x.ndim != 2 or x.shape[0] != x.shape[1]:
        return False
    scale = np.max(np.abs(x)) if x.size else 0.0
    if scale == 0.0:
        return True
    return bool(np.max(np.abs(x - x.conj().T)) <= rtol * scale)


def hermitian_symmetrize(x) -> ComplexMatrix:
    """
    Returns (X + X^H)/2.

    The result is exactly Hermitian and the operation is idempotent in floating
    point: for a Hermitian input the sum doubles every entry exactly.

    Example Usage:
    >>> hermitian_symmetrize(np.array([[1, 2j], [0, 1]]))
    array([[1.+0.j, 0.+1.j],
           [0.-1.j, 1.+0.j]])
    """
    arr = np.asarray(x, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"hermitian_symmetrize expects a square matrix, got shape {arr.shape}.")
    return (arr + arr.conj().T) / 2


def jitter_value(sigma: ComplexMatrix) -> float:
    """Diagonal loading 1e-10 x trace/N that callers may opt into."""
    n = sigma.shape[0]
    return JITTER_SCALE * float(np.real(np.trace(sigma))) / n


def add_jitter(sigma: ComplexMatrix) -> ComplexMatrix:
    return sigma + jitter_value(sigma) * np.eye(sigma.shape[0])


def cholesky_factor(sigma, jitter: bool = False) -> ComplexMatrix:
    """
    Lower-triangular Cholesky factor L with L L^H = sigma.

    Parameters:
    - sigma (array-like): Hermitian positive definite N x N matrix.
    - jitter (bool, optional): add 1e-10 x trace/N to the diagonal before
      factorizing. Defaults to False, so a near-singular matrix fails loudly
      instead of being regularized.

    Returns:
    - numpy.ndarray: lower-triangular complex factor.

    Raises:
    - NotPositiveDefinite: if sigma is not Hermitian, if the factorization
      breaks down, or if any pivot L_ii^2 falls below 1e-12 x trace/N.
    """
    sigma = as_complex_matrix(sigma, 'sigma')
    n = sigma.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    if not is_hermitian(sigma):
        raise NotPositiveDefinite(f"Covariance of size {n}x{n} is not Hermitian.")

    trace_per_dim = float(np.real(np.trace(sigma))) / n
    if trace_per_dim <= 0.0:
        raise NotPositiveDefinite(f"Covariance of size {n}x{n} has non-positive trace.")
    if jitter:
        sigma = add_jitter(sigma)

    try:
        lower = scipy.linalg.cholesky(sigma, lower=True, check_finite=False)
    except np.linalg.LinAlgError as e:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {str(e)}")

    pivots = np.real(np.diag(lower)) ** 2
    floor = PIVOT_FLOOR_SCALE * trace_per_dim
    if np.min(pivots) < floor:
        raise NotPositiveDefinite(
            f"Cholesky pivot {np.min(pivots):.3e} is below the floor {floor:.3e}; "
            f"the covariance is numerically singular."
        )
    return lower


def log_det_from_cholesky(lower: ComplexMatrix) -> float:
    """ln|sigma| given its Cholesky factor."""
    if lower.size == 0:
        return 0.0
    return float(2.0 * np.sum(np.log(np.real(np.diag(lower)))))


def cholesky_inverse(lower: ComplexMatrix) -> ComplexMatrix:
    """Hermitian inverse of sigma given its Cholesky factor."""
    n = lower.shape[0]
    inverse = scipy.linalg.cho_solve((lower, True), np.eye(n, dtype=np.complex128), check_finite=False)
    return hermitian_symmetrize(inverse)


@dataclass(frozen=True)
class BlockInverse:
    """
    Blocks of sigma^-1 for sigma partitioned into signal (n_s) and noise (n_n) rows.

    Attributes:
    - a (numpy.ndarray): n_s x n_s, the inverse Schur complement of the noise block.
    - b (numpy.ndarray): n_s x n_n, empty when n_n = 0.
    - c (numpy.ndarray): n_n x n_n, empty when n_n = 0.
    - log_det (float): ln|sigma|, a by-product of the two factorizations.
    """
    a: ComplexMatrix
    b: ComplexMatrix
    c: ComplexMatrix
    log_det: float = 0.0

    @property
    def n_s(self) -> int:
        return self.a.shape[0]

    @property
    def n_n(self) -> int:
        return self.c.shape[0]

    def assemble(self) -> ComplexMatrix:
        """Full inverse [[a, b], [b^H, c]]."""
        return np.block([[self.a, self.b], [self.b.conj().T, self.c]])


def block_inverse(sigma, n_s: int, n_n: int) -> BlockInverse:
    """
    Inverts a partitioned covariance through the Schur complement of its noise block.

    With sigma = [[S_ss, S_sn], [S_sn^H, S_nn]]:

        a = (S_ss - S_sn S_nn^-1 S_sn^H)^-1
        b = -a S_sn S_nn^-1
        c = S_nn^-1 + S_nn^-1 S_sn^H a S_sn S_nn^-1

    Parameters:
    - sigma (array-like): Hermitian positive definite (n_s+n_n) square matrix.
    - n_s (int): number of signal rows, at least 1.
    - n_n (int): number of noise rows, may be 0 (then a = S_ss^-1 and b, c are empty).

    Returns:
    - BlockInverse

    Raises:
    - ValueError: if the block sizes do not match sigma.
    - NotPositiveDefinite: propagated from the inner factorizations.
    """
    sigma = as_complex_matrix(sigma, 'sigma')
    if n_s < 1 or n_n < 0 or sigma.shape != (n_s + n_n, n_s + n_n):
        raise ValueError(f"Block sizes n_s={n_s}, n_n={n_n} do not match sigma of shape {sigma.shape}.")
    if not is_hermitian(sigma):
        raise NotPositiveDefinite("Covariance is not Hermitian.")

    sigma_ss = sigma[:n_s, :n_s]
    if n_n == 0:
        lower_ss = cholesky_factor(sigma_ss)
        return BlockInverse(
            a=cholesky_inverse(lower_ss),
            b=np.zeros((n_s, 0), dtype=np.complex128),
            c=np.zeros((0, 0), dtype=np.complex128),
            log_det=log_det_from_cholesky(lower_ss),
        )

    sigma_sn = sigma[:n_s, n_s:]
    sigma_nn = sigma[n_s:, n_s:]

    lower_nn = cholesky_factor(sigma_nn)
    nn_inv = cholesky_inverse(lower_nn)
    gain = sigma_sn @ nn_inv  # S_sn S_nn^-1
    schur = hermitian_symmetrize(sigma_ss - gain @ sigma_sn.conj().T)
    lower_schur = cholesky_factor(schur)
    a = cholesky_inverse(lower_schur)
    b = -a @ gain
    c = hermitian_symmetrize(nn_inv + gain.conj().T @ a @ gain)

    return BlockInverse(
        a=a,
        b=b,
        c=c,
        log_det=log_det_from_cholesky(lower_nn) + log_det_from_cholesky(lower_schur),
    )
