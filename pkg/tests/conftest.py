"""Shared fixtures and oracles for the whsim tests."""
import numpy as np
import pytest
from scipy.special import erfc

from whsim.channel_sim import ChannelModel, build_covariance
from whsim.harness import Scenario


def random_pd_matrix(rng: np.random.Generator, n: int, conditioning: float = 0.5) -> np.ndarray:
    """Random Hermitian positive definite n x n matrix, diagonally loaded by `conditioning` x n."""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return g @ g.conj().T + conditioning * n * np.eye(n)


def random_master_model(rng: np.random.Generator) -> ChannelModel:
    """Random valid four-channel model with two signal and two noise reference channels."""
    h_s = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    return ChannelModel(n_s=2, n_n=2, h_s=h_s, sigma=random_pd_matrix(rng, 4))


def qam_ser_awgn(order: int, es_over_n0: float) -> float:
    """
    Symbol error rate of square M-QAM with minimum-distance detection in
    circular complex AWGN, Es/N0 given as a linear ratio.
    """
    side = np.sqrt(order)
    p_axis = (1 - 1 / side) * erfc(np.sqrt(3 * es_over_n0 / (2 * (order - 1))))
    return float(1 - (1 - p_axis) ** 2)


def binomial_stderr(p: float, n: int) -> float:
    return float(np.sqrt(max(p * (1 - p), 1 / n) / n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def correlated_scenario() -> Scenario:
    return Scenario(
        h1=1 + 0j, h2=0.3 + 0j, sigmas=(1.0, 2.0, 1.0, 2.0),
        correlations={'r12': 0.1, 'r13': 0.9, 'r14': 0, 'r23': 0, 'r24': 0.9, 'r34': 0},
    )


@pytest.fixture
def two_channel_model() -> ChannelModel:
    """Probe signal channel plus one noise reference correlated at 0.8."""
    return ChannelModel(n_s=1, n_n=1, h_s=[1.0], sigma=build_covariance([1.0, 1.0], [[0, 0.8], [0, 0]]))
