"""
Monte Carlo SER benchmarking and offline decoding.

A sweep simulates, for every SNR point, `trials` independent blocks of T
uniformly drawn M-QAM symbols through the chosen architecture, estimates the
symbols either with the true parameters (combine and slice) or blindly with
EM (estimate, calibrate, detect) and counts symbol errors.

Every trial draws from its own generator seeded by
numpy.random.SeedSequence(seed, spawn_key=(snr_index, trial_index)), split
into one stream for the symbols and one for the noise. Trials are therefore
independent of each other and of the number of worker processes, and the
records are reproducible from (config, seed).
"""
import logging
import os
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
import pandas as pd

from whsim.channel_sim import (ChannelModel, ObservationBlock, build_covariance, noise_scale_for_snr, read_iq_csv,
                               read_symbol_indices, synthesize, write_iq_csv, write_symbol_indices)
from whsim.combiner import apply_weights, compute_weights, reference_channel
from whsim.constellation import ROTATIONS, SymbolAlphabet, SymbolSequence, build_qam, nearest_symbols, rotation_permutation
from whsim.data_models import Architecture, Estimator, RotationMode
from whsim.em_estimator import CalibrationResult, EmConfig, EmState, calibrate, em_operation_count, run_em
from whsim.errors import DimensionMismatch, MalformedInput, NotPositiveDefinite, ScenarioError
from whsim.whsim_utils import (ensure_parent_directory, format_complex, get_config_filepath, load_columns_dtypes,
                               parse_complex, save_yaml, sidecar_filepath)

logger = logging.getLogger(__name__)

SCENARIO_GAIN_KEYS = ('h1', 'h2')
SCENARIO_SIGMA_KEYS = ('sigma1', 'sigma2', 'sigma3', 'sigma4')
SCENARIO_CORRELATION_KEYS = ('r12', 'r13', 'r14', 'r23', 'r24', 'r34')
CSV_FLOAT_FORMAT = '%.17g'
CSV_SORT_COLUMNS = ['arch', 'estimator', 'T', 'snr_db']
MAX_SEED = 2 ** 64 - 1


@dataclass(frozen=True)
class Scenario:
    """
    Gains and noise statistics of the four physical channels.

    Attributes:
    - h1, h2 (complex): probe and coupling signal gains.
    - sigmas (tuple[float, ...]): noise standard deviations of channels 1..4;
      only their ratios are used once the SNR sets sigma1.
    - correlations (dict[str, complex]): r12, r13, r14, r23, r24, r34.
    """
    h1: complex
    h2: complex
    sigmas: tuple[float, float, float, float]
    correlations: dict = field(default_factory=dict)

    def correlation_matrix(self) -> np.ndarray:
        r = np.zeros((4, 4), dtype=np.complex128)
        for key in SCENARIO_CORRELATION_KEYS:
            m, k = int(key[1]) - 1, int(key[2]) - 1
            r[m, k] = self.correlations.get(key, 0)
        return r

    def master_model(self, snr_db: float, avg_power: float) -> ChannelModel:
        """
        Four-channel model with sigma1 set by SNR_dB = 10 log10(|h1|^2 P_s / sigma1^2)
        and the other deviations keeping their ratios to sigma1.
        """
        sigma1 = noise_scale_for_snr(snr_db, self.h1, avg_power)
        ratios = np.asarray(self.sigmas, dtype=float) / self.sigmas[0]
        sigma = build_covariance(sigma1 * ratios, self.correlation_matrix())
        return ChannelModel(n_s=2, n_n=2, h_s=[self.h1, self.h2], sigma=sigma)

    def validate(self):
        """
        Raises:
        - ScenarioError: for a zero probe gain, non-positive deviations or an
          infeasible correlation structure.
        """
        if self.h1 == 0:
            raise ScenarioError("Scenario probe gain h1 must be non-zero.")
        if len(self.sigmas) != 4 or any(not s > 0 for s in self.sigmas):
            raise ScenarioError(f"Scenario needs four positive noise deviations, got {self.sigmas}.")
        try:
            self.master_model(0.0, 1.0)
        except NotPositiveDefinite as e:
            raise ScenarioError(f"Scenario noise covariance is not positive definite: {str(e)}")


def parse_scenario(text: str, source: str = '<string>') -> Scenario:
    """
    Parses the scenario format: one `key = value` per line, `#` starts a comment.

    Keys are h1, h2, sigma1..sigma4, r12, r13, r14, r23, r24, r34, and values
    are complex numbers written `a+bi`. h1 and sigma1..sigma4 are required;
    h2 and correlations not listed are zero.

    Raises:
    - MalformedInput: for lines without `=`, unknown or repeated keys and bad values.
    - ScenarioError: for missing keys or infeasible values.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise MalformedInput(f"{source}:{lineno}: expected `key = value`, got `{raw.strip()}`.")
        key, value = (part.strip() for part in line.split('=', 1))
        if key not in SCENARIO_GAIN_KEYS + SCENARIO_SIGMA_KEYS + SCENARIO_CORRELATION_KEYS:
            raise MalformedInput(f"{source}:{lineno}: unknown key `{key}`.")
        if key in values:
            raise MalformedInput(f"{source}:{lineno}: key `{key}` given twice.")
        values[key] = parse_complex(value)

    missing = [key for key in ('h1',) + SCENARIO_SIGMA_KEYS if key not in values]
    if missing:
        raise ScenarioError(f"{source}: missing keys {missing}.")
    if any(values[key].imag != 0 for key in SCENARIO_SIGMA_KEYS):
        raise ScenarioError(f"{source}: noise deviations must be real.")

    scenario = Scenario(
        h1=values['h1'],
        h2=values.get('h2', 0j),
        sigmas=tuple(values[key].real for key in SCENARIO_SIGMA_KEYS),
        correlations={key: values.get(key, 0j) for key in SCENARIO_CORRELATION_KEYS},
    )
    scenario.validate()
    return scenario


def load_scenario(filepath: str) -> Scenario:
    if not os.path.isfile(filepath):
        raise FileNotFoundError(f"The file `{filepath}` does not exist.")
    with open(filepath, 'r', encoding='utf-8') as f:
        return parse_scenario(f.read(), source=filepath)


def format_scenario(scenario: Scenario) -> str:
    lines = [f"h1 = {format_complex(scenario.h1)}", f"h2 = {format_complex(scenario.h2)}"]
    lines += [f"{key} = {value!r}" for key, value in zip(SCENARIO_SIGMA_KEYS, scenario.sigmas)]
    lines += [f"{key} = {format_complex(scenario.correlations.get(key, 0))}" for key in SCENARIO_CORRELATION_KEYS]
    return '\n'.join(lines) + '\n'


def default_scenario() -> Scenario:
    """The bundled correlated-noise scenario (`config/default_scenario.txt`)."""
    return load_scenario(get_config_filepath('DEFAULT_SCENARIO'))


def awgn_scenario() -> Scenario:
    """Uncorrelated unit-ratio noise on all four channels."""
    return Scenario(h1=1 + 0j, h2=0j, sigmas=(1.0, 1.0, 1.0, 1.0),
                    correlations={key: 0j for key in SCENARIO_CORRELATION_KEYS})


@dataclass
class SweepConfig:
    """
    One SER sweep: a single architecture, estimator, M and T over an SNR grid.

    Attributes:
    - arch (Architecture): channels combined.
    - mod_order (int): QAM order M.
    - block_len (int): symbols per trial T.
    - snr_grid_db (list[float]): probe channel SNRs in dB.
    - trials (int): blocks per SNR point.
    - estimator (Estimator): known parameters or blind EM.
    - scenario (Scenario): noise scenario; the bundled default when omitted.
    - seed (int): master seed in [0, 2^64).
    - rotation_mode (RotationMode): EM rotation handling when counting errors.
    - em_config (EmConfig): EM settings.
    - workers (int): worker processes; results do not depend on it.
    - min_single_channel (bool): WH-A uses the better of the two signal channels.
    """
    arch: Architecture
    mod_order: int
    block_len: int
    snr_grid_db: list[float]
    trials: int = 1
    estimator: Estimator = Estimator.KNOWN
    scenario: Scenario = field(default_factory=default_scenario)
    seed: int = 0
    rotation_mode: RotationMode = RotationMode.LIKELIHOOD
    em_config: EmConfig = field(default_factory=EmConfig)
    workers: int = 1
    min_single_channel: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError(f"trials must be at least 1, got {self.trials}.")
        if self.block_len < 1:
            raise ValueError(f"block_len must be at least 1, got {self.block_len}.")
        if not self.snr_grid_db:
            raise ValueError("The SNR grid is empty.")
        if not 0 <= self.seed <= MAX_SEED:
            raise ValueError(f"seed must lie in [0, 2^64), got {self.seed}.")
        if self.workers < 1:
            raise ValueError(f"workers must be at least 1, got {self.workers}.")
        self.scenario.validate()


@dataclass(frozen=True)
class SerRecord:
    """One row of the SER CSV; `nonconverged_trials` is logged but not written."""
    arch: str
    estimator: str
    M: int
    T: int
    snr_db: float
    ser: float
    symbol_errors: int
    symbols_total: int
    trials: int
    mean_em_iters: float
    seed: int
    nonconverged_trials: int = 0

    def as_row(self) -> dict:
        return {
            'arch': self.arch, 'estimator': self.estimator, 'M': self.M, 'T': self.T,
            'snr_db': self.snr_db, 'ser': self.ser, 'symbol_errors': self.symbol_errors,
            'symbols_total': self.symbols_total, 'trials': self.trials,
            'mean_em_iters': self.mean_em_iters, 'seed': self.seed,
        }


@dataclass(frozen=True)
class TrialOutcome:
    symbol_errors: int
    symbols_total: int
    em_iters: int
    converged: bool


@dataclass(frozen=True)
class DecodeResult:
    detected: SymbolSequence
    calibration: CalibrationResult
    state: EmState


def trial_seed(seed: int, snr_index: int, trial_index: int) -> np.random.SeedSequence:
    """Counter-based seed of one trial: SeedSequence(seed, spawn_key=(snr_index, trial_index))."""
    return np.random.SeedSequence(seed, spawn_key=(snr_index, trial_index))


def draw_symbols(alphabet: SymbolAlphabet, t_len: int, seed) -> SymbolSequence:
    rng = np.random.default_rng(seed)
    return SymbolSequence.from_indices(rng.integers(0, alphabet.order, size=t_len), alphabet)


def arch_channels(arch: Architecture, master: ChannelModel, min_single_channel: bool = False) -> tuple[int, ...]:
    if arch is Architecture.WH_A:
        return (reference_channel(master, min_single_channel),)
    return arch.channel_indices


def simulate_block(model: ChannelModel, alphabet: SymbolAlphabet, t_len: int,
                   seed: np.random.SeedSequence) -> tuple[SymbolSequence, ObservationBlock]:
    """Draws symbols and noise from two independent children of `seed`."""
    symbol_seed, noise_seed = seed.spawn(2)
    symbols = draw_symbols(alphabet, t_len, symbol_seed)
    return symbols, synthesize(model, symbols, noise_seed)


def decode_block(block: ObservationBlock, alphabet: SymbolAlphabet, config: EmConfig | None = None) -> DecodeResult:
    """run_em, calibrate and detect on one observation block."""
    config = config or EmConfig()
    state = run_em(block, alphabet, config)
    calibration = calibrate(state, alphabet, block, config.detection)
    return DecodeResult(detected=calibration.detected, calibration=calibration, state=state)


def count_symbol_errors(detected, truth, alphabet: SymbolAlphabet, genie: bool = False) -> int:
    """Symbol errors; with `genie` the best of the four rotations of `detected` is scored."""
    detected = np.asarray(detected)
    truth = np.asarray(truth)
    if not genie:
        return int(np.count_nonzero(detected != truth))
    return min(int(np.count_nonzero(rotation_permutation(alphabet, rho)[detected] != truth)) for rho in ROTATIONS)


def _run_trial(task) -> TrialOutcome:
    config, model, snr_index, trial_index = task
    alphabet = build_qam(config.mod_order)
    symbols, block = simulate_block(model, alphabet, config.block_len, trial_seed(config.seed, snr_index, trial_index))

    if config.estimator is Estimator.KNOWN:
        estimates = apply_weights(compute_weights(model.h, model.sigma), block)
        errors = count_symbol_errors(nearest_symbols(estimates, alphabet), symbols.indices, alphabet)
        return TrialOutcome(errors, config.block_len, 0, True)

    result = decode_block(block, alphabet, config.em_config)
    errors = count_symbol_errors(result.detected.indices, symbols.indices, alphabet,
                                 genie=config.rotation_mode is RotationMode.GENIE)
    return TrialOutcome(errors, config.block_len, result.state.iter, result.state.converged)


def run_ser_sweep(config: SweepConfig) -> list[SerRecord]:
    """
    Runs the sweep described by `config`.

    Returns:
    - list[SerRecord]: one record per SNR point, in grid order. Trials reaching
      the EM iteration cap are counted in `nonconverged_trials`.

    Raises:
    - InvalidOrder, NotPositiveDefinite, ...: propagated from the lower modules.
    """
    alphabet = build_qam(config.mod_order)
    records = []
    pool = Pool(processes=config.workers) if config.workers > 1 else None
    try:
        for snr_index, snr_db in enumerate(config.snr_grid_db):
            master = config.scenario.master_model(snr_db, alphabet.avg_power)
            model = master.restrict(arch_channels(config.arch, master, config.min_single_channel))
            tasks = [(config, model, snr_index, trial) for trial in range(config.trials)]
            outcomes = pool.map(_run_trial, tasks) if pool else [_run_trial(task) for task in tasks]

            errors = sum(outcome.symbol_errors for outcome in outcomes)
            total = sum(outcome.symbols_total for outcome in outcomes)
            nonconverged = sum(not outcome.converged for outcome in outcomes)
            mean_iters = sum(outcome.em_iters for outcome in outcomes) / len(outcomes)
            records.append(SerRecord(
                arch=config.arch.value,
                estimator=config.estimator.value,
                M=config.mod_order,
                T=config.block_len,
                snr_db=float(snr_db),
                ser=errors / total,
                symbol_errors=errors,
                symbols_total=total,
                trials=config.trials,
                mean_em_iters=float(mean_iters),
                seed=config.seed,
                nonconverged_trials=nonconverged,
            ))
            logger.info(f"{config.arch.value}/{config.estimator.value} SNR {snr_db:g} dB: "
                        f"SER {errors / total:.3e} ({errors}/{total})")
            if nonconverged:
                logger.warning(f"SNR {snr_db:g} dB: {nonconverged} of {config.trials} trials reached the EM iteration cap.")
    finally:
        if pool:
            pool.close()
            pool.join()
    return records


def records_dataframe(records: list[SerRecord]) -> pd.DataFrame:
    """SER records as a DataFrame with the configured column order and dtypes, sorted for output."""
    dtype_mapping = load_columns_dtypes('SER_RECORD_COLUMNS')
    df = pd.DataFrame([record.as_row() for record in records], columns=list(dtype_mapping.keys()))
    df = df.astype(dtype_mapping)
    return df.sort_values(CSV_SORT_COLUMNS, kind='mergesort').reset_index(drop=True)


def write_csv(records: list[SerRecord], filepath: str):
    """
    Writes SER records, one row each, floats with 17 significant digits, rows
    sorted by (arch, estimator, T, snr_db).

    Raises:
    - OSError: with `filepath` in the message.
    """
    df = records_dataframe(records)
    try:
        ensure_parent_directory(filepath)
        df.to_csv(filepath, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator='\n')
    except OSError as e:
        raise OSError(f"Failed to write SER records to {filepath}: {str(e)}")


def _complex_pairs(values) -> list:
    return np.stack([np.real(values), np.imag(values)], axis=-1).tolist()


def decode_parameters(result: DecodeResult, alphabet: SymbolAlphabet, t_len: int) -> dict:
    """Estimated parameters of a decode run, complex entries as [re, im] pairs."""
    calibration = result.calibration
    n = calibration.sigma_cal.shape[0]
    return {
        'mod_order': alphabet.order,
        'block_len': t_len,
        'iterations': result.state.iter,
        'converged': result.state.converged,
        'operation_count': em_operation_count(result.state.iter, t_len, alphabet.order, n),
        'log_likelihood': float(result.state.log_likelihood_trace[-1]),
        'scale': calibration.scale,
        'rotation': _complex_pairs(calibration.rotation),
        'h_cal': _complex_pairs(calibration.h_cal),
        'sigma_ss': _complex_pairs(calibration.sigma_ss),
        'sigma_sn': _complex_pairs(calibration.sigma_sn),
        'sigma_nn': _complex_pairs(calibration.sigma_nn),
    }


def decode_iq_file(filepath: str, n_s: int, n_n: int, mod_order: int, config: EmConfig | None = None,
                   out_filepath: str | None = None) -> DecodeResult:
    """
    Applies EM to a recorded IQ file.

    Parameters:
    - filepath (str): IQ CSV with header `t,ch0_re,ch0_im,...`, signal channels first.
    - n_s, n_n (int): channel layout of the recording.
    - mod_order (int): QAM order.
    - config (EmConfig, optional): EM settings.
    - out_filepath (str, optional): where to write the detected indices
      (`t,symbol_index`); the estimated parameters go to `<out>.params.yaml`.

    Returns:
    - DecodeResult

    Raises:
    - MalformedInput, DimensionMismatch: for files not matching the format or layout.
    """
    alphabet = build_qam(mod_order)
    block = read_iq_csv(filepath, n_s, n_n)
    logger.info(f"Decoding {filepath}: T={block.t_len}, layout {n_s}x{n_n}, M={mod_order}")
    result = decode_block(block, alphabet, config)
    if out_filepath:
        ensure_parent_directory(out_filepath)
        write_symbol_indices(result.detected.indices, out_filepath)
        save_yaml(decode_parameters(result, alphabet, block.t_len), sidecar_filepath(out_filepath, '.params.yaml'))
    return result


def truth_symbol_errors(detected, truth_filepath: str, alphabet: SymbolAlphabet) -> int:
    """
    Symbol errors of `detected` against a `t,symbol_index` ground-truth file.

    Raises:
    - DimensionMismatch: if the two sequences differ in length.
    - MalformedInput: for indices outside the alphabet.
    """
    truth = read_symbol_indices(truth_filepath)
    detected = np.asarray(detected)
    if truth.size != detected.size:
        raise DimensionMismatch(f"{truth_filepath} holds {truth.size} symbols, the decoded block {detected.size}.")
    if truth.size and (truth.min() < 0 or truth.max() >= alphabet.order):
        raise MalformedInput(f"{truth_filepath} holds indices outside [0, {alphabet.order}).")
    return count_symbol_errors(detected, truth, alphabet)


def simulate_iq_file(arch: Architecture, mod_order: int, block_len: int, snr_db: float, seed: int,
                     out_filepath: str, scenario: Scenario | None = None) -> tuple[SymbolSequence, ObservationBlock]:
    """
    Writes a seeded IQ recording through `arch`, its ground truth to `<out>.truth.csv`
    and the scenario it was drawn from to `<out>.scenario.txt`.
    The block equals the first trial of a sweep at the same seed and a one-point grid.
    """
    scenario = scenario or default_scenario()
    alphabet = build_qam(mod_order)
    master = scenario.master_model(snr_db, alphabet.avg_power)
    model = master.restrict(arch_channels(arch, master))
    symbols, block = simulate_block(model, alphabet, block_len, trial_seed(seed, 0, 0))
    ensure_parent_directory(out_filepath)
    write_iq_csv(block, out_filepath)
    write_symbol_indices(symbols.indices, sidecar_filepath(out_filepath, '.truth.csv'))
    with open(sidecar_filepath(out_filepath, '.scenario.txt'), 'w', encoding='utf-8') as f:
        f.write(format_scenario(scenario))
    return symbols, block
