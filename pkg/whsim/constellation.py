"""
Square M-QAM alphabets on the unnormalized odd-integer grid and nearest-point
decisions.
"""
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from whsim.errors import InvalidOrder

# columns processed per chunk by `nearest_symbols`, keeps the M x chunk distance table small
DECISION_CHUNK = 65536

ROTATIONS = (1 + 0j, 1j, -1 + 0j, -1j)


@dataclass(frozen=True)
class SymbolAlphabet:
    """
    A finite symbol alphabet.

    Attributes:
    - order (int): number of points M.
    - points (numpy.ndarray): the M complex points; index m refers to points[m].
    - avg_power (float): (1/M) sum |a_m|^2, written P_s elsewhere.
    """
    order: int
    points: NDArray[np.complex128]
    avg_power: float

    def __post_init__(self):
        if len(self.points) != self.order:
            raise ValueError(f"Alphabet of order {self.order} holds {len(self.points)} points.")

    @property
    def powers(self) -> NDArray[np.float64]:
        return self.points.real ** 2 + self.points.imag ** 2


@dataclass(frozen=True)
class SymbolSequence:
    """
    Transmitted or detected symbols.

    Attributes:
    - indices (numpy.ndarray): alphabet index per symbol slot.
    - values (numpy.ndarray): alphabet point per symbol slot.
    """
    indices: NDArray[np.int64]
    values: NDArray[np.complex128]

    def __len__(self):
        return len(self.indices)

    @classmethod
    def from_indices(cls, indices, alphabet: SymbolAlphabet) -> 'SymbolSequence':
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= alphabet.order):
            raise ValueError(f"Symbol indices must lie in [0, {alphabet.order}).")
        return cls(indices=indices, values=alphabet.points[indices])


def build_qam(order: int) -> SymbolAlphabet:
    """
    Builds the square M-QAM alphabet with levels +-1, +-3, ... on both axes.

    Points are ordered with the in-phase level running fastest:
    index m = k_re + side * k_im, level(k) = 2k - (side - 1).

    Parameters:
    - order (int): M, a perfect square of at least 4.

    Returns:
    - SymbolAlphabet: with avg_power = 2(M - 1)/3.

    Raises:
    - InvalidOrder: for non-square orders or orders below 4.

    Example Usage:
    >>> build_qam(16).avg_power
    10.0
    """
    if isinstance(order, bool) or not isinstance(order, (int, np.integer)):
        raise InvalidOrder(f"QAM order must be an integer, got {order!r}.")
    order = int(order)
    side = math.isqrt(order) if order > 0 else 0
    if order < 4 or side * side != order:
        raise InvalidOrder(f"QAM order {order} is not a perfect square of at least 4.")

    levels = 2.0 * np.arange(side) - (side - 1)
    re, im = np.meshgrid(levels, levels)
    points = (re + 1j * im).ravel()
    alphabet = SymbolAlphabet(order=order, points=points, avg_power=0.0)
    return SymbolAlphabet(order=order, points=points, avg_power=average_power(alphabet))


def average_power(alphabet: SymbolAlphabet) -> float:
    """(1/M) sum |a_m|^2, exact for integer grids."""
    return float(np.mean(alphabet.powers))


def nearest_symbol(z: complex, alphabet: SymbolAlphabet) -> int:
    """Index of the point closest to `z`; ties go to the lowest index."""
    distances = np.abs(z - alphabet.points) ** 2
    return int(np.argmin(distances))


def nearest_symbols(z, alphabet: SymbolAlphabet) -> NDArray[np.int64]:
    """Vectorized `nearest_symbol` over a sequence of estimates."""
    z = np.asarray(z, dtype=np.complex128).ravel()
    out = np.empty(z.size, dtype=np.int64)
    points = alphabet.points[:, None]
    for start in range(0, z.size, DECISION_CHUNK):
        chunk = z[None, start:start + DECISION_CHUNK]
        diff = chunk - points
        out[start:start + DECISION_CHUNK] = np.argmin(diff.real ** 2 + diff.imag ** 2, axis=0)
    return out


def rotation_permutation(alphabet: SymbolAlphabet, rotation: complex) -> NDArray[np.int64]:
    """
    perm[m] is the index of rotation * a_m, for rotation in {1, i, -1, -i}.

    Raises:
    - ValueError: if the alphabet is not closed under the rotation.
    """
    rotated = rotation * alphabet.points
    perm = nearest_symbols(rotated, alphabet)
    if not np.allclose(alphabet.points[perm], rotated):
        raise ValueError(f"Alphabet of order {alphabet.order} is not symmetric under rotation {rotation}.")
    return perm
