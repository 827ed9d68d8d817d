"""
Blind joint estimation of signal gains, block noise covariance and M-QAM
symbols by expectation-maximization.

Model: y(t) = [h_s; 0] s(t) + n(t), n(t) ~ CN(0, Sigma), s(t) uniform over the
alphabet. Sigma is partitioned into signal (n_s) and noise reference (n_n)
rows; the noise block Sigma_nn is estimated once from the reference rows and
kept fixed.

Per iteration:

- E-step: quadratic distances d_m(t) = (y(t) - h a_m)^H Sigma^-1 (y(t) - h a_m)
  through the blocks of `linalg_core.block_inverse`, posteriors
  w_m(t) = softmax(-d_m(t)) over m (shifted by the column minimum), and the
  moments s_hat = sum_m a_m w_m, u = sum_m |a_m|^2 w_m, v = u - |s_hat|^2.
- M-step: closed-form gain update, then Sigma_ss and Sigma_sn from the
  expected residual outer products.

After convergence `calibrate` removes the scale ambiguity of (h, s) by fixing
the symbol power to the constellation power, recomputes the gains, resolves the
residual 90 degree rotation and runs both detectors.

The cost of one iteration is dominated by the distance table, O(T M N^2).
"""
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.special
from numpy.typing import NDArray

from whsim.channel_sim import ObservationBlock
from whsim.constellation import ROTATIONS, SymbolAlphabet, SymbolSequence, nearest_symbols
from whsim.data_models import DetectionMode
from whsim.errors import (DegenerateBlock, DimensionMismatch, NotPositiveDefinite, RankDeficient,
                          ZeroEstimate, ZeroPosteriorMass)
from whsim.linalg_core import (BlockInverse, ComplexMatrix, add_jitter, block_inverse, cholesky_factor,
                               hermitian_symmetrize, jitter_value)

logger = logging.getLogger(__name__)

INIT_GAIN_FLOOR = 1e-9  # relative to the per-channel sample power
INIT_PHASES = ('fourth_power', 'eigen')
ROTATION_TIE_RTOL = 1e-9


@dataclass
class EmConfig:
    """
    Settings of `run_em`.

    Attributes:
    - eps_hs (float | None): threshold on ||h s^T (change)||_F. None derives
      eps_hs_scale * sqrt(n_s T) * P_s * ||h_s^[0]||.
    - eps_sigma (float | None): threshold on ||Sigma (change)||_F. None derives
      eps_sigma_scale * ||Sigma^[0]||_F.
    - max_iters (int): iteration cap; reaching it is reported, not raised.
    - symmetrize_cross (bool): replace Sigma_sn by (Sigma_sn + Sigma_sn^H)/2 when square.
    - eps_hs_scale, eps_sigma_scale (float): factors of the derived thresholds.
    - init_phase (str): 'eigen' keeps the largest entry of the dominant
      eigenvector real positive; 'fourth_power' aligns the initial gain phase
      with the square-QAM fourth-power statistic.
    - detection (DetectionMode): detector reported in `CalibrationResult.detected`.
    """
    eps_hs: float | None = None
    eps_sigma: float | None = None
    max_iters: int = 200
    symmetrize_cross: bool = True
    eps_hs_scale: float = 1e-6
    eps_sigma_scale: float = 1e-8
    init_phase: str = 'eigen'
    detection: DetectionMode = DetectionMode.MIN_DISTANCE

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}.")
        for name in ('eps_hs', 'eps_sigma'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be positive, got {value}.")
        if not (self.eps_hs_scale > 0 and self.eps_sigma_scale > 0):
            raise ValueError("Threshold scales must be positive.")
        if self.init_phase not in INIT_PHASES:
            raise ValueError(f"init_phase must be one of {INIT_PHASES}, got `{self.init_phase}`.")

    def thresholds(self, state: 'EmState', t_len: int, avg_power: float) -> tuple[float, float]:
        eps_hs = self.eps_hs
        if eps_hs is None:
            eps_hs = (self.eps_hs_scale * np.sqrt(state.n_s * t_len) * avg_power
                      * max(float(np.linalg.norm(state.h_s)), np.finfo(float).tiny))
        eps_sigma = self.eps_sigma
        if eps_sigma is None:
            eps_sigma = self.eps_sigma_scale * float(np.linalg.norm(state.sigma, 'fro'))
        return float(eps_hs), float(eps_sigma)


@dataclass
class EmState:
    """
    Current iterate {h_s, Sigma} and the posterior moments of every symbol slot.

    Attributes:
    - iter (int): completed M-steps.
    - h_s (numpy.ndarray): signal channel gains.
    - sigma_ss, sigma_sn, sigma_nn (numpy.ndarray): covariance blocks; sigma_nn is fixed.
    - s_hat, u, v (numpy.ndarray): posterior mean, second moment and variance per slot.
    - converged (bool): the stopping test passed before max_iters.
    - log_likelihood_trace (list[float]): observed-data log-likelihood of each iterate.
    """
    iter: int
    h_s: NDArray[np.complex128]
    sigma_ss: ComplexMatrix
    sigma_sn: ComplexMatrix
    sigma_nn: ComplexMatrix
    s_hat: NDArray[np.complex128]
    u: NDArray[np.float64]
    v: NDArray[np.float64]
    converged: bool = False
    log_likelihood_trace: list[float] = field(default_factory=list)

    @property
    def n_s(self) -> int:
        return self.h_s.size

    @property
    def n_n(self) -> int:
        return self.sigma_nn.shape[0]

    @property
    def sigma(self) -> ComplexMatrix:
        return assemble_sigma(self.sigma_ss, self.sigma_sn, self.sigma_nn)


@dataclass(frozen=True)
class PosteriorTable:
    """
    Attributes:
    - w (numpy.ndarray): M x T posterior probabilities, columns sum to one.
    - d (numpy.ndarray): M x T quadratic distances.
    """
    w: NDArray[np.float64]
    d: NDArray[np.float64]


class PosteriorMoments(NamedTuple):
    s_hat: NDArray[np.complex128]
    u: NDArray[np.float64]
    v: NDArray[np.float64]


class ParameterUpdate(NamedTuple):
    h_s: NDArray[np.complex128]
    sigma_ss: ComplexMatrix
    sigma_sn: ComplexMatrix


@dataclass(frozen=True)
class CalibrationResult:
    """
    Calibrated estimates after EM.

    Attributes:
    - s_cal (numpy.ndarray): symbol estimates at constellation power, rotation applied.
    - h_cal (numpy.ndarray): gains recomputed for s_cal, rotation inverse-applied.
    - sigma_ss, sigma_sn, sigma_nn (numpy.ndarray): covariance blocks of the final iterate.
    - detected (SymbolSequence): symbols from the configured detector.
    - rotation (complex): one of 1, i, -1, -i.
    - scale (float): power calibration factor applied to the EM symbol estimates.
    - posteriors (PosteriorTable): posteriors under (h_cal, Sigma).
    - detected_max_posterior (SymbolSequence): argmax of the posteriors.
    - detected_min_distance (SymbolSequence): nearest point to s_cal.
    """
    s_cal: NDArray[np.complex128]
    h_cal: NDArray[np.complex128]
    sigma_ss: ComplexMatrix
    sigma_sn: ComplexMatrix
    sigma_nn: ComplexMatrix
    detected: SymbolSequence
    rotation: complex
    scale: float
    posteriors: PosteriorTable
    detected_max_posterior: SymbolSequence
    detected_min_distance: SymbolSequence

    @property
    def sigma_cal(self) -> ComplexMatrix:
        return assemble_sigma(self.sigma_ss, self.sigma_sn, self.sigma_nn)


def assemble_sigma(sigma_ss, sigma_sn, sigma_nn) -> ComplexMatrix:
    return np.block([[sigma_ss, sigma_sn], [sigma_sn.conj().T, sigma_nn]])


def em_operation_count(iterations: int, t_len: int, order: int, n: int) -> int:
    """Dominant arithmetic cost K T M N^2 of an EM run."""
    return int(iterations) * int(t_len) * int(order) * int(n) ** 2


def _sample_covariance(x: ComplexMatrix) -> ComplexMatrix:
    return hermitian_symmetrize(x @ x.conj().T / x.shape[1])


def estimate_noise_covariance(y_n, jitter: bool = False) -> ComplexMatrix:
    """
    Sigma_nn = (1/T) sum_t y_n(t) y_n(t)^H from the noise reference rows.

    Parameters:
    - y_n (array-like): n_n x T noise observations; n_n = 0 yields a 0 x 0 matrix.
    - jitter (bool, optional): load the diagonal with 1e-10 x trace/N when the
      estimate is singular. Defaults to False.

    Raises:
    - DimensionMismatch: if T < n_n.
    - RankDeficient: if the estimate is not positive definite; the estimate is
      attached to the exception.
    """
    y_n = np.asarray(y_n, dtype=np.complex128)
    n_n, t_len = y_n.shape
    if n_n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    if t_len < n_n:
        raise DimensionMismatch(f"Need at least {n_n} samples to estimate a {n_n}x{n_n} noise covariance, got {t_len}.")

    estimate = _sample_covariance(y_n)
    try:
        cholesky_factor(estimate)
        return estimate
    except NotPositiveDefinite:
        if not jitter:
            raise RankDeficient("Noise reference covariance estimate is singular.", estimate=estimate)
    try:
        cholesky_factor(estimate, jitter=True)
    except NotPositiveDefinite:
        raise RankDeficient("Noise reference covariance estimate is singular even with jitter.", estimate=estimate)
    logger.warning("Noise reference covariance estimate is singular; diagonal jitter applied.")
    return add_jitter(estimate)


def _fix_eigenvector_phase(vec):
    pivot = vec[np.argmax(np.abs(vec))]
    return vec * np.conj(pivot) / abs(pivot)


def _ensure_positive_definite(sigma_ss, sigma_sn, sigma_nn) -> ComplexMatrix:
    """Returns sigma_ss, diagonally loaded once if the assembled covariance is not PD."""
    sigma = assemble_sigma(sigma_ss, sigma_sn, sigma_nn)
    try:
        cholesky_factor(sigma)
        return sigma_ss
    except NotPositiveDefinite:
        loaded = sigma_ss + jitter_value(sigma) * np.eye(sigma_ss.shape[0])
    logger.debug("Covariance iterate not positive definite; retrying with diagonal jitter.")
    cholesky_factor(assemble_sigma(loaded, sigma_sn, sigma_nn))
    return loaded


def init_state(y: ObservationBlock, alphabet: SymbolAlphabet, config: EmConfig | None = None) -> EmState:
    """
    Initial iterate from second-order statistics.

    h_s^[0] is the dominant eigenvector of R = (1/T) sum y_s y_s^H scaled so that
    |h_s^[0]|^2 P_s equals the excess of the largest eigenvalue of R over its
    smallest one (over zero for a single signal channel), floored at a small
    positive value. Sigma_ss^[0] = R, Sigma_sn^[0] = 0 and Sigma_nn is the fixed
    noise reference estimate.

    Raises:
    - DimensionMismatch: if T < N.
    - DegenerateBlock: if R is non-finite or zero.
    - RankDeficient: from `estimate_noise_covariance`.
    """
    config = config or EmConfig()
    if y.t_len < y.n:
        raise DimensionMismatch(f"Block length {y.t_len} is shorter than the channel count {y.n}.")

    sample_cov = _sample_covariance(y.y_s)
    if not np.all(np.isfinite(sample_cov)):
        raise DegenerateBlock("Sample covariance of the signal rows is not finite.")
    power = float(np.real(np.trace(sample_cov))) / y.n_s
    if power <= 0:
        raise DegenerateBlock("Signal rows carry no power.")

    eigvals, eigvecs = scipy.linalg.eigh(sample_cov)
    noise_floor = eigvals[0] if y.n_s > 1 else 0.0
    excess = max(float(eigvals[-1] - noise_floor), INIT_GAIN_FLOOR * power)
    direction = _fix_eigenvector_phase(eigvecs[:, -1])

    if config.init_phase == 'fourth_power':
        reference = np.mean(alphabet.points ** 4)
        moment = np.mean((direction.conj() @ y.y_s) ** 4)
        if abs(reference) > 0 and abs(moment) > 0:
            direction = direction * np.exp(1j * (np.angle(moment) - np.angle(reference)) / 4)

    h_s = np.sqrt(excess / alphabet.avg_power) * direction
    sigma_nn = estimate_noise_covariance(y.y_n)
    sigma_sn = np.zeros((y.n_s, y.n_n), dtype=np.complex128)
    sigma_ss = _ensure_positive_definite(sample_cov, sigma_sn, sigma_nn)

    return EmState(
        iter=0,
        h_s=h_s,
        sigma_ss=sigma_ss,
        sigma_sn=sigma_sn,
        sigma_nn=sigma_nn,
        s_hat=np.zeros(y.t_len, dtype=np.complex128),
        u=np.zeros(y.t_len),
        v=np.zeros(y.t_len),
    )


def quadratic_distances(y: ObservationBlock, h_s, inverse: BlockInverse, alphabet: SymbolAlphabet) -> NDArray[np.float64]:
    """
    d_m(t) = r^H A r + y_n^H C y_n + 2 Re[r^H B y_n] with r = y_s(t) - h_s a_m.
    """
    h_s = np.asarray(h_s, dtype=np.complex128)
    if y.n_n:
        cross = inverse.b @ y.y_n
        noise_term = np.real(np.sum(y.y_n.conj() * (inverse.c @ y.y_n), axis=0))
    else:
        cross = np.zeros_like(y.y_s)
        noise_term = np.zeros(y.t_len)

    d = np.empty((alphabet.order, y.t_len))
    for m, point in enumerate(alphabet.points):
        residual = y.y_s - h_s[:, None] * point
        d[m] = (np.real(np.sum(residual.conj() * (inverse.a @ residual), axis=0))
                + noise_term
                + 2.0 * np.real(np.sum(residual.conj() * cross, axis=0)))
    return d


def _observed_log_likelihood(d, log_det: float, n: int, order: int) -> float:
    t_len = d.shape[1]
    return float(np.sum(scipy.special.logsumexp(-d, axis=0))
                 - t_len * np.log(order) - t_len * log_det - n * t_len * np.log(np.pi))


def _posterior_pass(y: ObservationBlock, h_s, sigma, alphabet: SymbolAlphabet):
    inverse = block_inverse(sigma, y.n_s, y.n_n)
    d = quadratic_distances(y, h_s, inverse, alphabet)
    w = scipy.special.softmax(-d, axis=0)
    return PosteriorTable(w=w, d=d), inverse


def _moments(table: PosteriorTable, alphabet: SymbolAlphabet) -> PosteriorMoments:
    s_hat = alphabet.points @ table.w
    u = alphabet.powers @ table.w
    v = np.maximum(u - (s_hat.real ** 2 + s_hat.imag ** 2), 0.0)
    return PosteriorMoments(s_hat=s_hat, u=u, v=v)


def e_step(y: ObservationBlock, state: EmState, alphabet: SymbolAlphabet) -> tuple[PosteriorTable, PosteriorMoments]:
    """
    Posteriors of every alphabet point per slot and the resulting moments.

    The softmax subtracts the column minimum of d, so every exponent is <= 0.

    Raises:
    - NotPositiveDefinite: if the current covariance cannot be inverted.
    """
    table, _ = _posterior_pass(y, state.h_s, state.sigma, alphabet)
    return table, _moments(table, alphabet)


def _gain_update(y: ObservationBlock, s_hat, u, sigma_sn, sigma_nn) -> NDArray[np.complex128]:
    total = float(np.sum(u))
    if not total > 0:
        raise ZeroPosteriorMass("Posterior second moments sum to zero.")
    correlation = y.y_s @ s_hat.conj()
    if y.n_n:
        lower = cholesky_factor(sigma_nn)
        noise_gain = scipy.linalg.cho_solve((lower, True), sigma_sn.conj().T, check_finite=False).conj().T
        correlation = correlation - noise_gain @ (y.y_n @ s_hat.conj())
    return correlation / total


def m_step(y: ObservationBlock, state: EmState, symmetrize_cross: bool = True) -> ParameterUpdate:
    """
    Closed-form parameter update from the current posterior moments.

        h_s = (sum y_s s_hat^* - Sigma_sn Sigma_nn^-1 sum y_n s_hat^*) / sum u
        Sigma_ss = (1/T) sum [(y_s - h_s s_hat)(y_s - h_s s_hat)^H + h_s h_s^H v]
        Sigma_sn = (1/T) sum (y_s - h_s s_hat) y_n^H

    Sigma_ss is Hermitian-symmetrized; Sigma_sn only when `symmetrize_cross`
    is set and n_s = n_n. The gain update uses the Sigma_sn of `state`.

    Raises:
    - ZeroPosteriorMass: if sum u <= 0.
    """
    h_s = _gain_update(y, state.s_hat, state.u, state.sigma_sn, state.sigma_nn)
    residual = y.y_s - np.outer(h_s, state.s_hat)
    sigma_ss = hermitian_symmetrize(
        (residual @ residual.conj().T + np.outer(h_s, h_s.conj()) * np.sum(state.v)) / y.t_len
    )
    sigma_sn = residual @ y.y_n.conj().T / y.t_len
    if symmetrize_cross and y.n_n and y.n_n == y.n_s:
        sigma_sn = (sigma_sn + sigma_sn.conj().T) / 2
    return ParameterUpdate(h_s=h_s, sigma_ss=sigma_ss, sigma_sn=sigma_sn)


def log_likelihood(y: ObservationBlock, state: EmState, alphabet: SymbolAlphabet) -> float:
    """
    Observed-data log-likelihood under uniform symbol priors,

        sum_t ln[(1/M) sum_m exp(-d_m(t))] - T ln|Sigma| - N T ln(pi),

    with the per-column log-sum-exp evaluated stably.
    """
    inverse = block_inverse(state.sigma, y.n_s, y.n_n)
    d = quadratic_distances(y, state.h_s, inverse, alphabet)
    return _observed_log_likelihood(d, inverse.log_det, y.n, alphabet.order)


def _cross_block_is_feasible(update: ParameterUpdate, sigma_nn) -> bool:
    try:
        cholesky_factor(assemble_sigma(update.sigma_ss, update.sigma_sn, sigma_nn))
    except NotPositiveDefinite:
        return False
    return True


def _constrained_m_step(y: ObservationBlock, state: EmState, symmetrize_cross: bool) -> ParameterUpdate:
    """M-step that drops the Hermitian cross block for an iteration in which it breaks positive definiteness."""
    update = m_step(y, state, symmetrize_cross)
    if symmetrize_cross and y.n_n and y.n_n == y.n_s and not _cross_block_is_feasible(update, state.sigma_nn):
        logger.debug(f"EM iteration {state.iter + 1}: symmetrized Sigma_sn is infeasible; keeping the exact update.")
        update = m_step(y, state, symmetrize_cross=False)
    return update


def _store_moments(state: EmState, moments: PosteriorMoments):
    state.s_hat, state.u, state.v = moments.s_hat, moments.u, moments.v


def run_em(y: ObservationBlock, alphabet: SymbolAlphabet, config: EmConfig | None = None,
           state: EmState | None = None) -> EmState:
    """
    Runs EM from `init_state` (or from the given `state`) until the changes of
    h_s s_hat^T and of Sigma both fall below their thresholds, or max_iters.

    Parameters:
    - y (ObservationBlock): observations.
    - alphabet (SymbolAlphabet): symbol alphabet.
    - config (EmConfig, optional): settings; defaults to EmConfig().
    - state (EmState, optional): starting iterate; modified in place.

    Returns:
    - EmState: the final iterate with the posterior moments it implies;
      `converged` is False when max_iters was reached.
    """
    config = config or EmConfig()
    if state is None:
        state = init_state(y, alphabet, config)
    if state.n_s != y.n_s or state.n_n != y.n_n:
        raise DimensionMismatch(f"Initial state layout ({state.n_s}, {state.n_n}) does not match the block ({y.n_s}, {y.n_n}).")
    eps_hs, eps_sigma = config.thresholds(state, y.t_len, alphabet.avg_power)

    table, inverse = _posterior_pass(y, state.h_s, state.sigma, alphabet)
    _store_moments(state, _moments(table, alphabet))
    state.log_likelihood_trace.append(_observed_log_likelihood(table.d, inverse.log_det, y.n, alphabet.order))
    product = np.outer(state.h_s, state.s_hat)

    while state.iter < config.max_iters:
        update = _constrained_m_step(y, state, config.symmetrize_cross)
        sigma_prev = state.sigma
        state.h_s = update.h_s
        state.sigma_sn = update.sigma_sn
        state.sigma_ss = _ensure_positive_definite(update.sigma_ss, update.sigma_sn, state.sigma_nn)
        state.iter += 1

        table, inverse = _posterior_pass(y, state.h_s, state.sigma, alphabet)
        _store_moments(state, _moments(table, alphabet))
        state.log_likelihood_trace.append(_observed_log_likelihood(table.d, inverse.log_det, y.n, alphabet.order))

        new_product = np.outer(state.h_s, state.s_hat)
        delta_hs = float(np.linalg.norm(new_product - product, 'fro'))
        delta_sigma = float(np.linalg.norm(state.sigma - sigma_prev, 'fro'))
        product = new_product
        logger.debug(f"EM iteration {state.iter}: d(hs)={delta_hs:.3e} d(Sigma)={delta_sigma:.3e} "
                     f"loglik={state.log_likelihood_trace[-1]:.6f}")
        if delta_hs < eps_hs and delta_sigma < eps_sigma:
            state.converged = True
            break

    if not state.converged:
        logger.warning(f"EM stopped at max_iters={config.max_iters} without meeting the thresholds.")
    logger.debug(f"EM operation count: {em_operation_count(state.iter, y.t_len, alphabet.order, y.n)}")
    return state


def _rotation_order(h_ref: complex) -> list[int]:
    """Rotation indices sorted by how close h_ref * conj(rotation) lies to the positive real axis."""
    alignment = [np.real(h_ref * np.conj(rho)) for rho in ROTATIONS]
    return sorted(range(len(ROTATIONS)), key=lambda k: (-alignment[k], k))


def calibrate(state: EmState, alphabet: SymbolAlphabet, y: ObservationBlock,
              detection: DetectionMode = DetectionMode.MIN_DISTANCE) -> CalibrationResult:
    """
    Fixes the scale and rotation of the EM symbol estimates and detects symbols.

    - Scale: s_cal = sqrt(T P_s / sum |s_hat|^2) s_hat, so the mean power of
      s_cal is the constellation power. The second moments are scaled alike and
      h_s is recomputed with the gain update, which divides it by the same factor.
    - Rotation: the rotation rho in {1, i, -1, -i} with the largest
      observed-data likelihood under (h/rho, Sigma) is applied to s_cal. For
      an alphabet symmetric under 90 degree rotations the four likelihoods tie,
      and ties (within 1e-9 relative) go to the rotation that brings the probe
      channel gain h_cal[0] closest to the positive real axis.

    Raises:
    - ZeroEstimate: if every s_hat is zero.
    """
    energy = float(np.sum(state.s_hat.real ** 2 + state.s_hat.imag ** 2))
    if not energy > 0:
        raise ZeroEstimate("All EM symbol estimates are zero; nothing to calibrate.")
    t_len = state.s_hat.size
    scale = float(np.sqrt(t_len * alphabet.avg_power / energy))
    s_scaled = scale * state.s_hat
    h_scaled = _gain_update(y, s_scaled, scale ** 2 * state.u, state.sigma_sn, state.sigma_nn)

    sigma = state.sigma
    candidates = {}
    for k in _rotation_order(h_scaled[0]):
        h_rot = h_scaled * np.conj(ROTATIONS[k])
        table, inverse = _posterior_pass(y, h_rot, sigma, alphabet)
        candidates[k] = (_observed_log_likelihood(table.d, inverse.log_det, y.n, alphabet.order), table)

    best = max(value for value, _ in candidates.values())
    chosen = next(k for k in _rotation_order(h_scaled[0])
                  if candidates[k][0] >= best - ROTATION_TIE_RTOL * abs(best))
    rotation = ROTATIONS[chosen]
    table = candidates[chosen][1]
    s_cal = rotation * s_scaled

    by_distance = SymbolSequence.from_indices(nearest_symbols(s_cal, alphabet), alphabet)
    by_posterior = SymbolSequence.from_indices(np.argmax(table.w, axis=0), alphabet)
    return CalibrationResult(
        s_cal=s_cal,
        h_cal=h_scaled * np.conj(rotation),
        sigma_ss=state.sigma_ss,
        sigma_sn=state.sigma_sn,
        sigma_nn=state.sigma_nn,
        detected=by_distance if detection is DetectionMode.MIN_DISTANCE else by_posterior,
        rotation=rotation,
        scale=scale,
        posteriors=table,
        detected_max_posterior=by_posterior,
        detected_min_distance=by_distance,
    )


def detect_symbols(result: CalibrationResult, alphabet: SymbolAlphabet, mode: DetectionMode) -> SymbolSequence:
    """
    Hard decisions: argmax of the posteriors or nearest point to s_cal.
    Ties go to the lowest index in both modes.
    """
    if mode is DetectionMode.MAX_POSTERIOR:
        return SymbolSequence.from_indices(np.argmax(result.posteriors.w, axis=0), alphabet)
    return SymbolSequence.from_indices(nearest_symbols(result.s_cal, alphabet), alphabet)
