"""
Correlated-noise multi-channel model y(t) = h s(t) + n(t) with n(t) ~ CN(0, Sigma).

Signal-bearing channels come first (gains h_s), noise reference channels last
(gain exactly zero). This module builds the covariance, draws circularly
symmetric noise, synthesizes observation blocks and reads/writes the IQ
recording CSV consumed by the decode path.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from whsim.constellation import SymbolSequence
from whsim.errors import DimensionMismatch, MalformedInput, NotPositiveDefinite
from whsim.linalg_core import ComplexMatrix, as_complex_matrix, cholesky_factor, is_hermitian

logger = logging.getLogger(__name__)

# integer seed or a numpy SeedSequence; generators are PCG64 through numpy.random.default_rng
SeedLike = int | np.random.SeedSequence

CORRELATION_SLACK = 1e-12
CSV_FLOAT_FORMAT = '%.17g'


@dataclass(frozen=True)
class ChannelModel:
    """
    Gains and noise covariance of an (n_s + n_n)-channel receiver.

    Attributes:
    - n_s (int): signal-bearing channels.
    - n_n (int): noise reference channels.
    - h_s (numpy.ndarray): complex gains of the signal channels.
    - sigma (numpy.ndarray): N x N Hermitian positive definite noise covariance.

    Raises:
    - ValueError: on shape inconsistencies.
    - NotPositiveDefinite: if sigma is not a valid covariance.
    """
    n_s: int
    n_n: int
    h_s: NDArray[np.complex128]
    sigma: ComplexMatrix

    def __post_init__(self):
        h_s = np.asarray(self.h_s, dtype=np.complex128).ravel()
        sigma = as_complex_matrix(self.sigma, 'sigma')
        object.__setattr__(self, 'h_s', h_s)
        object.__setattr__(self, 'sigma', sigma)

        if self.n_s < 1 or self.n_n < 0:
            raise ValueError(f"Invalid channel counts n_s={self.n_s}, n_n={self.n_n}.")
        if h_s.size != self.n_s:
            raise ValueError(f"h_s has {h_s.size} entries for n_s={self.n_s}.")
        if sigma.shape != (self.n, self.n):
            raise ValueError(f"sigma has shape {sigma.shape}, expected {(self.n, self.n)}.")
        if not is_hermitian(sigma):
            raise NotPositiveDefinite("Noise covariance is not Hermitian.")
        variances = np.real(np.diag(sigma))
        if np.any(variances <= 0):
            raise NotPositiveDefinite("Noise covariance has non-positive variances.")
        bound = np.sqrt(np.outer(variances, variances)) * (1 + CORRELATION_SLACK)
        if np.any(np.abs(sigma) > bound):
            raise NotPositiveDefinite("Noise covariance has a correlation magnitude above 1.")
        cholesky_factor(sigma)

    @property
    def n(self) -> int:
        return self.n_s + self.n_n

    @property
    def h(self) -> NDArray[np.complex128]:
        """Full gain vector [h_s; 0]."""
        return np.concatenate([self.h_s, np.zeros(self.n_n, dtype=np.complex128)])

    @property
    def sigma_ss(self) -> ComplexMatrix:
        return self.sigma[:self.n_s, :self.n_s]

    @property
    def sigma_sn(self) -> ComplexMatrix:
        return self.sigma[:self.n_s, self.n_s:]

    @property
    def sigma_nn(self) -> ComplexMatrix:
        return self.sigma[self.n_s:, self.n_s:]

    def restrict(self, channel_indices) -> 'ChannelModel':
        """
        Sub-model over the given channels, numbered from 1.

        Row and column order of the master covariance is preserved; signal
        channels must precede noise channels in `channel_indices`.

        Example Usage:
        >>> master.restrict((1, 3))   # probe signal + probe noise reference
        """
        idx = np.asarray(channel_indices, dtype=int) - 1
        if idx.size == 0 or np.any(idx < 0) or np.any(idx >= self.n) or np.any(np.diff(idx) <= 0):
            raise ValueError(f"Invalid channel selection {tuple(channel_indices)} for {self.n} channels.")
        is_signal = idx < self.n_s
        n_s = int(np.sum(is_signal))
        if n_s == 0 or np.any(is_signal[n_s:]):
            raise ValueError(f"Channel selection {tuple(channel_indices)} needs signal channels first.")
        return ChannelModel(
            n_s=n_s,
            n_n=idx.size - n_s,
            h_s=self.h_s[idx[:n_s]],
            sigma=self.sigma[np.ix_(idx, idx)],
        )


@dataclass(frozen=True)
class ObservationBlock:
    """
    T received vectors, split into signal rows y_s (n_s x T) and noise rows y_n (n_n x T).
    """
    y_s: ComplexMatrix
    y_n: ComplexMatrix

    def __post_init__(self):
        y_s = np.asarray(self.y_s, dtype=np.complex128)
        y_n = np.asarray(self.y_n, dtype=np.complex128)
        if y_n.size == 0 and y_s.ndim == 2:
            y_n = y_n.reshape(0, y_s.shape[1])
        object.__setattr__(self, 'y_s', y_s)
        object.__setattr__(self, 'y_n', y_n)
        if y_s.ndim != 2 or y_n.ndim != 2 or y_s.shape[1] != y_n.shape[1]:
            raise DimensionMismatch(f"Signal rows {y_s.shape} and noise rows {y_n.shape} do not align.")
        if y_s.shape[0] < 1:
            raise DimensionMismatch("An observation block needs at least one signal channel.")
        if not (np.all(np.isfinite(y_s)) and np.all(np.isfinite(y_n))):
            raise MalformedInput("Observation block holds non-finite samples.")

    @property
    def t_len(self) -> int:
        return self.y_s.shape[1]

    @property
    def n_s(self) -> int:
        return self.y_s.shape[0]

    @property
    def n_n(self) -> int:
        return self.y_n.shape[0]

    @property
    def n(self) -> int:
        return self.n_s + self.n_n

    def stacked(self) -> ComplexMatrix:
        """N x T matrix whose column t is y(t) = [y_s(t); y_n(t)]."""
        return np.vstack([self.y_s, self.y_n])

    @classmethod
    def from_stacked(cls, y, n_s: int) -> 'ObservationBlock':
        y = np.asarray(y, dtype=np.complex128)
        return cls(y_s=y[:n_s], y_n=y[n_s:])


def build_covariance(sigmas, correlations) -> ComplexMatrix:
    """
    Builds Sigma with Sigma_mm = sigma_m^2 and Sigma_mk = r_mk sigma_m sigma_k for m < k.

    Parameters:
    - sigmas (array-like): N positive noise standard deviations.
    - correlations (array-like): N x N complex matrix; only the strict upper
      triangle r_mk (m < k) is read, the lower triangle follows by conjugation.

    Returns:
    - numpy.ndarray: Hermitian positive definite N x N covariance.

    Raises:
    - ValueError: for non-positive sigmas or mismatched shapes.
    - NotPositiveDefinite: for |r_mk| > 1 or an infeasible correlation structure.

    Example Usage:
    >>> build_covariance([1, 2], [[0, 0.5], [0, 0]])
    array([[1.+0.j, 1.+0.j],
           [1.+0.j, 4.+0.j]])
    """
    sigmas = np.asarray(sigmas, dtype=float).ravel()
    r = np.asarray(correlations, dtype=np.complex128)
    n = sigmas.size
    if r.shape != (n, n):
        raise ValueError(f"Correlations of shape {r.shape} do not match {n} channels.")
    if np.any(sigmas <= 0) or not np.all(np.isfinite(sigmas)):
        raise ValueError("Noise standard deviations must be finite and positive.")

    upper = np.triu(r, k=1)
    if np.any(np.abs(upper) > 1 + CORRELATION_SLACK):
        raise NotPositiveDefinite("Correlation coefficients must satisfy |r| <= 1.")
    corr = np.eye(n, dtype=np.complex128) + upper + upper.conj().T
    sigma = corr * np.outer(sigmas, sigmas)
    cholesky_factor(sigma)
    return sigma


def sample_noise(sigma, t_len: int, seed: SeedLike) -> ComplexMatrix:
    """
    Draws T columns i.i.d. from CN(0, sigma).

    n = L (g_re + i g_im)/sqrt(2) with L the Cholesky factor and g standard real
    Gaussians from PCG64 seeded with `seed`, so equal seeds give identical bits.
    """
    if t_len < 1:
        raise ValueError(f"Block length must be positive, got {t_len}.")
    lower = cholesky_factor(sigma)
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((2, lower.shape[0], t_len))
    return lower @ (g[0] + 1j * g[1]) / np.sqrt(2.0)


def synthesize(model: ChannelModel, symbols: SymbolSequence, seed: SeedLike) -> ObservationBlock:
    """Observation block y(t) = h s(t) + n(t); noise rows carry no signal."""
    values = np.asarray(symbols.values, dtype=np.complex128)
    noise = sample_noise(model.sigma, values.size, seed)
    y = np.outer(model.h, values) + noise
    return ObservationBlock.from_stacked(y, model.n_s)


def noise_scale_for_snr(snr_db: float, h1: complex, avg_power: float) -> float:
    """
    Probe-channel noise standard deviation for SNR_dB = 10 log10(|h_1|^2 P_s / sigma_1^2).
    """
    if abs(h1) == 0:
        raise ValueError("The probe channel gain h1 must be non-zero to set an SNR.")
    return float(np.sqrt(abs(h1) ** 2 * avg_power / 10.0 ** (snr_db / 10.0)))


def iq_header(n_channels: int) -> list[str]:
    header = ['t']
    for ch in range(n_channels):
        header += [f'ch{ch}_re', f'ch{ch}_im']
    return header


def write_iq_csv(block: ObservationBlock, filepath: str):
    """Writes `block` as an IQ recording: `t,ch0_re,ch0_im,...`, signal channels first."""
    y = block.stacked()
    data = {'t': np.arange(block.t_len)}
    for ch in range(block.n):
        data[f'ch{ch}_re'] = y[ch].real
        data[f'ch{ch}_im'] = y[ch].imag
    try:
        pd.DataFrame(data).to_csv(filepath, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    except OSError as e:
        raise OSError(f"Failed to write IQ recording to {filepath}: {str(e)}")


def read_iq_csv(filepath: str, n_s: int, n_n: int) -> ObservationBlock:
    """
    Loads an IQ recording written by `write_iq_csv`.

    Raises:
    - FileNotFoundError: if `filepath` does not exist.
    - MalformedInput: bad header, wrong row arity, non-numeric or missing values,
      empty data section.
    - DimensionMismatch: the file holds a channel count other than n_s + n_n.
    """
    if not os.path.isfile(filepath):
        raise FileNotFoundError(f"The file `{filepath}` does not exist.")
    try:
        df = pd.read_csv(filepath, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise MalformedInput(f"IQ recording {filepath} is empty.")
    except pd.errors.ParserError as e:
        raise MalformedInput(f"IQ recording {filepath} has rows of inconsistent length: {str(e)}")

    columns = [str(c).strip() for c in df.columns]
    n_file = (len(columns) - 1) // 2
    if len(columns) < 3 or len(columns) % 2 == 0 or columns != iq_header(n_file):
        raise MalformedInput(f"IQ recording {filepath} has a malformed header: {','.join(columns)}")
    if n_file != n_s + n_n:
        raise DimensionMismatch(f"IQ recording {filepath} holds {n_file} channels, layout expects {n_s + n_n}.")
    if len(df) == 0:
        raise MalformedInput(f"IQ recording {filepath} has an empty data section.")
    if df.isna().any().any() or (df == '').any().any():
        raise MalformedInput(f"IQ recording {filepath} has rows with missing fields.")

    # string to float goes through Python's correctly rounded parser, so %.17g round-trips
    try:
        slots = np.asarray(df['t'].to_numpy(), dtype=float)
        raw = np.asarray(df.drop(columns='t').to_numpy(), dtype=float)
    except ValueError as e:
        raise MalformedInput(f"IQ recording {filepath} holds non-numeric values: {str(e)}")
    if not np.array_equal(slots, np.arange(len(df))):
        raise MalformedInput(f"IQ recording {filepath} must list slots t = 0..T-1 in order.")

    y = raw[:, 0::2] + 1j * raw[:, 1::2]
    return ObservationBlock.from_stacked(y.T, n_s)


def write_symbol_indices(indices, filepath: str):
    """Writes `t,symbol_index` rows, used for detected symbols and ground-truth sidecars."""
    df = pd.DataFrame({'t': np.arange(len(indices)), 'symbol_index': np.asarray(indices, dtype=np.int64)})
    try:
        df.to_csv(filepath, index=False, lineterminator='\n')
    except OSError as e:
        raise OSError(f"Failed to write symbol indices to {filepath}: {str(e)}")


def read_symbol_indices(filepath: str) -> NDArray[np.int64]:
    if not os.path.isfile(filepath):
        raise FileNotFoundError(f"The file `{filepath}` does not exist.")
    try:
        df = pd.read_csv(filepath)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise MalformedInput(f"Failed to load symbol indices from {filepath}: {str(e)}")
    if list(df.columns) != ['t', 'symbol_index'] or df['symbol_index'].isna().any():
        raise MalformedInput(f"Symbol index file {filepath} must have columns t,symbol_index.")
    return df['symbol_index'].to_numpy(dtype=np.int64)
