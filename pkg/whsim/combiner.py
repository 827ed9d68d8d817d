"""
Known-parameter optimal combining.

With gains h and noise covariance Sigma over the combined channels, the
unbiased minimum-variance weights are

    w = Sigma^-1 h / (h^H Sigma^-1 h),   s_hat = w^H y,   var = 1 / (h^H Sigma^-1 h).

The weight-hybrid architectures WH-A..WH-D apply this formula to channel
subsets of a master four-channel model (see `whsim.data_models.Architecture`).
The architecture-specific closed forms are kept alongside as an independent
check of the generic solve.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from whsim.channel_sim import ChannelModel, ObservationBlock
from whsim.data_models import Architecture, Ordering
from whsim.errors import NotPositiveDefinite, ZeroGain
from whsim.linalg_core import as_complex_matrix, block_inverse, cholesky_factor

logger = logging.getLogger(__name__)

NEAR_SINGULAR_CORRELATION = 1 - 1e-9
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class CombinerResult:
    """
    Attributes:
    - architecture (Architecture): the architecture evaluated.
    - channel_indices (tuple[int, ...]): channels combined, numbered from 1.
    - weights (numpy.ndarray): w over those channels.
    - variance (float): estimation variance 1/(h^H Sigma^-1 h).
    - snr_gain_db (float): 10 log10(var_WH-A / variance).
    """
    architecture: Architecture
    channel_indices: tuple[int, ...]
    weights: NDArray[np.complex128]
    variance: float
    snr_gain_db: float


def _checked_inputs(h, sigma):
    h = np.asarray(h, dtype=np.complex128).ravel()
    sigma = as_complex_matrix(sigma, 'sigma')
    if sigma.shape != (h.size, h.size):
        raise ValueError(f"Gain vector of length {h.size} does not match sigma of shape {sigma.shape}.")
    if not np.any(h):
        raise ZeroGain("All channel gains are zero.")

    variances = np.real(np.diag(sigma))
    if np.any(variances <= 0):
        raise NotPositiveDefinite("Noise covariance has non-positive variances.")
    corr = np.abs(sigma) / np.sqrt(np.outer(variances, variances))
    np.fill_diagonal(corr, 0.0)
    if corr.size and np.max(corr) > NEAR_SINGULAR_CORRELATION:
        raise NotPositiveDefinite(
            f"Correlation magnitude {np.max(corr):.12f} exceeds {NEAR_SINGULAR_CORRELATION}; "
            f"the combining gain diverges."
        )
    return h, sigma


def _whitened_gain(h, sigma):
    """Returns (Sigma^-1 h, h^H Sigma^-1 h)."""
    h, sigma = _checked_inputs(h, sigma)
    lower = cholesky_factor(sigma)
    x = scipy.linalg.cho_solve((lower, True), h, check_finite=False)
    q = float(np.real(np.vdot(h, x)))
    if q <= 0:
        raise ZeroGain("Combined channel gain h^H Sigma^-1 h is not positive.")
    return x, q


def compute_weights(h, sigma) -> NDArray[np.complex128]:
    """
    Unbiased minimum-variance combining weights w = Sigma^-1 h / (h^H Sigma^-1 h).

    Raises:
    - ZeroGain: if h is all zeros.
    - NotPositiveDefinite: if sigma is not a usable covariance or a
      correlation magnitude exceeds 1 - 1e-9.

    Example Usage:
    >>> compute_weights([1, 0], [[1, 0.8], [0.8, 1]])
    array([ 1. +0.j, -0.8+0.j])
    """
    x, q = _whitened_gain(h, sigma)
    return x / q


def estimation_variance(h, sigma) -> float:
    """Post-combining noise variance 1/(h^H Sigma^-1 h)."""
    _, q = _whitened_gain(h, sigma)
    return 1.0 / q


def apply_weights(weights, block) -> NDArray[np.complex128]:
    """
    Symbol estimates s_hat(t) = w^H y(t).

    Parameters:
    - weights (array-like): combining weights over the block's channels.
    - block (ObservationBlock | array-like): observations, or an N x T matrix.
    """
    y = block.stacked() if isinstance(block, ObservationBlock) else np.asarray(block, dtype=np.complex128)
    weights = np.asarray(weights, dtype=np.complex128).ravel()
    if y.ndim != 2 or y.shape[0] != weights.size:
        raise ValueError(f"Weights of length {weights.size} do not match observations of shape {y.shape}.")
    return weights.conj() @ y


def _require_master(model: ChannelModel):
    if model.n_s != 2 or model.n_n != 2:
        raise ValueError(
            f"Architecture evaluation needs the four-channel model (2 signal + 2 noise), "
            f"got n_s={model.n_s}, n_n={model.n_n}."
        )


def single_channel_variance(model: ChannelModel, channel: int) -> float:
    sub = model.restrict((channel,))
    return estimation_variance(sub.h, sub.sigma)


def reference_channel(model: ChannelModel, min_single_channel: bool = False) -> int:
    """
    Channel used by WH-A: the probe channel 1, or with `min_single_channel` the
    signal channel with the smaller single-channel variance (ties keep channel 1).
    """
    if not min_single_channel:
        return 1
    variances = []
    for channel in (1, 2):
        gain = model.h_s[channel - 1]
        variances.append(np.inf if gain == 0 else single_channel_variance(model, channel))
    if not np.isfinite(min(variances)):
        raise ZeroGain("Both signal channel gains are zero.")
    return 1 if variances[0] <= variances[1] else 2


def architecture_result(arch: Architecture, model: ChannelModel, min_single_channel: bool = False) -> CombinerResult:
    """
    Weights, variance and SNR gain over WH-A for one architecture.

    Parameters:
    - arch (Architecture): WH_A, WH_B, WH_C or WH_D.
    - model (ChannelModel): the master model, h = [h_1, h_2, 0, 0] with the full 4 x 4 Sigma.
    - min_single_channel (bool, optional): WH-A picks the better signal
      channel instead of the probe channel. Defaults to False.

    Returns:
    - CombinerResult: the gain of WH-A is exactly 0 dB.

    Raises:
    - ValueError: if `model` is not the four-channel master model.
    - ZeroGain, NotPositiveDefinite: from the variance computations.
    """
    _require_master(model)
    ref = reference_channel(model, min_single_channel)
    indices = (ref,) if arch is Architecture.WH_A else arch.channel_indices

    sub = model.restrict(indices)
    x, q = _whitened_gain(sub.h, sub.sigma)
    variance = 1.0 / q

    if arch is Architecture.WH_A:
        gain_db = 0.0
    else:
        gain_db = float(10.0 * np.log10(single_channel_variance(model, ref) / variance))

    return CombinerResult(
        architecture=arch,
        channel_indices=tuple(indices),
        weights=x / q,
        variance=variance,
        snr_gain_db=gain_db,
    )


def architecture_table(model: ChannelModel, min_single_channel: bool = False) -> list[CombinerResult]:
    return [architecture_result(arch, model, min_single_channel) for arch in Architecture]


def _stddevs_and_correlations(model: ChannelModel):
    s = np.sqrt(np.real(np.diag(model.sigma)))
    return s, model.sigma / np.outer(s, s)


def closed_form_variance(arch: Architecture, model: ChannelModel, min_single_channel: bool = False) -> float:
    """
    Architecture-specific closed forms of the estimation variance.

    - WH-A: sigma_1^2 / |h_1|^2
    - WH-B: sigma_1^2 (1 - |r_13|^2) / |h_1|^2
    - WH-C: sigma_1^2 sigma_2^2 (1 - |r_12|^2) /
            (|h_1|^2 sigma_2^2 + |h_2|^2 sigma_1^2 - 2 Re[r_12 h_1^* h_2] sigma_1 sigma_2)
    - WH-D: 1 / (h_s^H A h_s), A the signal block of Sigma^-1.
    """
    _require_master(model)
    s, r = _stddevs_and_correlations(model)
    h1, h2 = model.h_s

    if arch is Architecture.WH_A:
        ref = reference_channel(model, min_single_channel)
        gain = model.h_s[ref - 1]
        if gain == 0:
            raise ZeroGain(f"Channel {ref} has zero gain.")
        return float(s[ref - 1] ** 2 / abs(gain) ** 2)
    if arch is Architecture.WH_B:
        if h1 == 0:
            raise ZeroGain("Probe channel gain h_1 is zero.")
        return float(s[0] ** 2 * (1 - abs(r[0, 2]) ** 2) / abs(h1) ** 2)
    if arch is Architecture.WH_C:
        denominator = (abs(h1) ** 2 * s[1] ** 2 + abs(h2) ** 2 * s[0] ** 2
                       - 2 * np.real(r[0, 1] * np.conj(h1) * h2) * s[0] * s[1])
        if denominator <= 0:
            raise ZeroGain("Signal channel gains are zero.")
        return float(s[0] ** 2 * s[1] ** 2 * (1 - abs(r[0, 1]) ** 2) / denominator)

    a = block_inverse(model.sigma, model.n_s, model.n_n).a
    q = float(np.real(np.vdot(model.h_s, a @ model.h_s)))
    if q <= 0:
        raise ZeroGain("Signal channel gains are zero.")
    return 1.0 / q


def closed_form_gain_db(arch: Architecture, model: ChannelModel, min_single_channel: bool = False) -> float:
    """G_XA = 10 log10(var_A / var_X) from the closed forms."""
    if arch is Architecture.WH_A:
        return 0.0
    var_a = closed_form_variance(Architecture.WH_A, model, min_single_channel)
    return float(10.0 * np.log10(var_a / closed_form_variance(arch, model)))


def _ordering(var_b: float, var_c: float) -> Ordering:
    if abs(var_b - var_c) <= TIE_RTOL * max(var_b, var_c):
        return Ordering.TIE
    return Ordering.B_BETTER if var_b < var_c else Ordering.C_BETTER


def compare_b_vs_c(model: ChannelModel) -> Ordering:
    """Which of WH-B and WH-C has the smaller estimation variance (relative tie band 1e-12)."""
    var_b = architecture_result(Architecture.WH_B, model).variance
    var_c = architecture_result(Architecture.WH_C, model).variance
    return _ordering(var_b, var_c)


def b_vs_c_inequality(model: ChannelModel) -> Ordering:
    """
    WH-B against WH-C through the normalized comparison

        (1 - |r_12|^2) / (1 + (|h_2|^2 sigma_1^2 - 2 sigma_1 sigma_2 Re[r_12 h_1^* h_2]) / (|h_1|^2 sigma_2^2))
        versus (1 - |r_13|^2)

    both sides being the variances of WH-C and WH-B divided by sigma_1^2/|h_1|^2.
    """
    _require_master(model)
    s, r = _stddevs_and_correlations(model)
    h1, h2 = model.h_s
    if h1 == 0:
        raise ZeroGain("Probe channel gain h_1 is zero.")
    excess = (abs(h2) ** 2 * s[0] ** 2 - 2 * s[0] * s[1] * np.real(r[0, 1] * np.conj(h1) * h2)) / (abs(h1) ** 2 * s[1] ** 2)
    normalized_c = (1 - abs(r[0, 1]) ** 2) / (1 + excess)
    normalized_b = 1 - abs(r[0, 2]) ** 2
    return _ordering(float(normalized_b), float(normalized_c))
