import numpy as np
import pytest

from tests.conftest import random_pd_matrix
from whsim.channel_sim import (ChannelModel, ObservationBlock, build_covariance, noise_scale_for_snr, read_iq_csv,
                               read_symbol_indices, sample_noise, synthesize, write_iq_csv, write_symbol_indices)
from whsim.constellation import SymbolSequence, build_qam
from whsim.errors import DimensionMismatch, MalformedInput, NotPositiveDefinite

SEED_NOISE = 7
NOISE_SAMPLES = 200_000
SEED_MOMENTS = 4242


class TestBuildCovariance:

    def test_entries(self):
        r = np.zeros((3, 3), dtype=complex)
        r[0, 1] = 0.5j
        r[0, 2] = -0.2
        sigma = build_covariance([1.0, 2.0, 3.0], r)
        np.testing.assert_allclose(np.diag(sigma).real, [1.0, 4.0, 9.0])
        assert sigma[0, 1] == pytest.approx(1j)
        assert sigma[1, 0] == pytest.approx(-1j)
        assert sigma[0, 2] == pytest.approx(-0.6)

    def test_lower_triangle_is_ignored(self):
        sigma = build_covariance([1.0, 1.0], [[0, 0.3], [0.9, 0]])
        assert sigma[1, 0] == pytest.approx(0.3)

    def test_correlation_above_one(self):
        with pytest.raises(NotPositiveDefinite):
            build_covariance([1.0, 1.0], [[0, 1.01], [0, 0]])

    def test_infeasible_structure(self):
        r = np.zeros((3, 3))
        r[0, 1], r[0, 2], r[1, 2] = 0.99, 0.99, -0.99
        with pytest.raises(NotPositiveDefinite):
            build_covariance([1.0, 1.0, 1.0], r)

    def test_non_positive_sigma(self):
        with pytest.raises(ValueError):
            build_covariance([1.0, 0.0], np.zeros((2, 2)))


class TestChannelModel:

    def test_restrict_keeps_order(self, rng):
        master = ChannelModel(n_s=2, n_n=2, h_s=[1.0, 0.5j], sigma=random_pd_matrix(rng, 4))
        sub = master.restrict((1, 3))
        assert (sub.n_s, sub.n_n) == (1, 1)
        np.testing.assert_array_equal(sub.h, [1.0, 0.0])
        np.testing.assert_array_equal(sub.sigma, master.sigma[np.ix_([0, 2], [0, 2])])

    @pytest.mark.parametrize('indices', [(), (3,), (3, 1), (1, 5), (1, 1)])
    def test_restrict_rejects_bad_selections(self, rng, indices):
        master = ChannelModel(n_s=2, n_n=2, h_s=[1.0, 0.5], sigma=random_pd_matrix(rng, 4))
        with pytest.raises(ValueError):
            master.restrict(indices)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ChannelModel(n_s=2, n_n=1, h_s=[1.0], sigma=np.eye(3))

    def test_not_positive_definite(self):
        with pytest.raises(NotPositiveDefinite):
            ChannelModel(n_s=1, n_n=1, h_s=[1.0], sigma=[[1.0, 1.0], [1.0, 1.0]])


class TestNoise:

    def test_sample_covariance_matches(self):
        sigma = build_covariance([1.0, 2.0, 0.5], [[0, 0.6 + 0.2j, 0.1], [0, 0, -0.4j], [0, 0, 0]])
        noise = sample_noise(sigma, NOISE_SAMPLES, SEED_NOISE)
        estimate = noise @ noise.conj().T / NOISE_SAMPLES
        np.testing.assert_allclose(estimate, sigma, atol=0.05)

    def test_circular_symmetry(self):
        noise = sample_noise(np.eye(2), NOISE_SAMPLES, SEED_NOISE)
        pseudo = noise @ noise.T / NOISE_SAMPLES
        np.testing.assert_allclose(pseudo, 0, atol=0.02)

    def test_equal_seeds_give_equal_bits(self):
        sigma = build_covariance([1.0, 1.0], [[0, 0.5], [0, 0]])
        np.testing.assert_array_equal(sample_noise(sigma, 50, 3), sample_noise(sigma, 50, 3))
        assert not np.array_equal(sample_noise(sigma, 50, 3), sample_noise(sigma, 50, 4))

    def test_seed_sequences_are_accepted(self):
        sigma = np.eye(2)
        seed = np.random.SeedSequence(5, spawn_key=(1, 2))
        np.testing.assert_array_equal(sample_noise(sigma, 10, seed),
                                      sample_noise(sigma, 10, np.random.SeedSequence(5, spawn_key=(1, 2))))

    def test_invalid_length(self):
        with pytest.raises(ValueError):
            sample_noise(np.eye(2), 0, 1)


class TestSynthesize:

    def test_noise_rows_carry_no_signal(self, two_channel_model):
        alphabet = build_qam(4)
        symbols = SymbolSequence.from_indices(np.arange(4).repeat(25), alphabet)
        block = synthesize(two_channel_model, symbols, 1)
        noise_only = sample_noise(two_channel_model.sigma, 100, 1)
        np.testing.assert_allclose(block.y_n, noise_only[1:], atol=1e-15)
        np.testing.assert_allclose(block.y_s - symbols.values, noise_only[:1], atol=1e-12)

    def test_noiseless_limit(self):
        alphabet = build_qam(16)
        model = ChannelModel(n_s=1, n_n=0, h_s=[2.0], sigma=[[1e-20]])
        symbols = SymbolSequence.from_indices(np.arange(16), alphabet)
        block = synthesize(model, symbols, 0)
        np.testing.assert_allclose(block.y_s[0], 2.0 * alphabet.points, atol=1e-8)

    def test_moment_matching_recovers_gains(self):
        alphabet = build_qam(4)
        model = ChannelModel(n_s=2, n_n=0, h_s=[1.0, 0.5], sigma=build_covariance([0.1, 0.1], np.zeros((2, 2))))
        rng = np.random.default_rng(SEED_MOMENTS)
        symbols = SymbolSequence.from_indices(rng.integers(0, 4, size=10_000), alphabet)
        block = synthesize(model, symbols, 11)
        estimate = np.mean(block.y_s * symbols.values.conj(), axis=1) / alphabet.avg_power
        np.testing.assert_allclose(estimate, model.h_s, rtol=0.02)

    def test_noise_rows_are_uncorrelated_with_symbols(self):
        alphabet = build_qam(16)
        sigma = build_covariance([1.0, 2.0, 0.5], [[0, 0.6, 0.3], [0, 0, -0.4j], [0, 0, 0]])
        model = ChannelModel(n_s=1, n_n=2, h_s=[1 - 1j], sigma=sigma)
        t_len = 10_000
        rng = np.random.default_rng(SEED_MOMENTS + 1)
        symbols = SymbolSequence.from_indices(rng.integers(0, 16, size=t_len), alphabet)
        block = synthesize(model, symbols, 12)
        s = symbols.values
        for row in block.y_n:
            correlation = abs(np.mean(row * s.conj())) / np.sqrt(np.mean(np.abs(row) ** 2) * np.mean(np.abs(s) ** 2))
            assert correlation < 4 / np.sqrt(t_len)

    def test_snr_scale(self):
        assert noise_scale_for_snr(10.0, 1.0, 10.0) == pytest.approx(1.0)
        assert noise_scale_for_snr(0.0, 2.0, 1.0) == pytest.approx(2.0)
        with pytest.raises(ValueError):
            noise_scale_for_snr(0.0, 0.0, 1.0)


class TestIqCsv:

    @pytest.fixture
    def block(self, rng):
        y = rng.standard_normal((3, 20)) + 1j * rng.standard_normal((3, 20))
        return ObservationBlock.from_stacked(y * 1e3 / 7, 2)

    def test_round_trip_is_bit_exact(self, block, tmp_path):
        filepath = tmp_path / 'iq.csv'
        write_iq_csv(block, str(filepath))
        loaded = read_iq_csv(str(filepath), 2, 1)
        np.testing.assert_array_equal(loaded.stacked(), block.stacked())

    def test_header(self, block, tmp_path):
        filepath = tmp_path / 'iq.csv'
        write_iq_csv(block, str(filepath))
        assert filepath.read_text().splitlines()[0] == 't,ch0_re,ch0_im,ch1_re,ch1_im,ch2_re,ch2_im'

    def test_layout_mismatch(self, block, tmp_path):
        filepath = tmp_path / 'iq.csv'
        write_iq_csv(block, str(filepath))
        with pytest.raises(DimensionMismatch):
            read_iq_csv(str(filepath), 2, 2)

    @pytest.mark.parametrize('content', [
        '',
        't,ch0_re,ch0_im\n',
        't,ch0_re\n0,1.0\n',
        't,ch0_im,ch0_re\n0,1.0,2.0\n',
        't,ch0_re,ch0_im\n0,1.0,abc\n',
        't,ch0_re,ch0_im\n0,1.0\n',
        't,ch0_re,ch0_im\n0,1.0,2.0,3.0\n',
        't,ch0_re,ch0_im\n1,1.0,2.0\n',
    ])
    def test_malformed_files(self, tmp_path, content):
        filepath = tmp_path / 'bad.csv'
        filepath.write_text(content)
        with pytest.raises(MalformedInput):
            read_iq_csv(str(filepath), 1, 0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_iq_csv(str(tmp_path / 'absent.csv'), 1, 0)

    def test_symbol_indices_round_trip(self, tmp_path):
        filepath = tmp_path / 'symbols.csv'
        write_symbol_indices([3, 0, 15], str(filepath))
        assert filepath.read_text() == 't,symbol_index\n0,3\n1,0\n2,15\n'
        np.testing.assert_array_equal(read_symbol_indices(str(filepath)), [3, 0, 15])
