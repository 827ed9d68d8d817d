import numpy as np
import pytest

from tests.conftest import random_master_model, random_pd_matrix
from whsim.channel_sim import ChannelModel, build_covariance, synthesize
from whsim.combiner import (apply_weights, architecture_result, architecture_table, b_vs_c_inequality,
                            closed_form_gain_db, closed_form_variance, compare_b_vs_c, compute_weights,
                            estimation_variance)
from whsim.constellation import SymbolSequence, build_qam
from whsim.data_models import Architecture, Ordering
from whsim.errors import NotPositiveDefinite, ZeroGain

SEED_ORDERING = 2024
ORDERING_MODELS = 1000
ORDERING_SLACK = 1e-9
SEED_EMPIRICAL = 99


def master_model(h1=1.0, h2=0.3, sigmas=(1.0, 2.0, 1.0, 2.0), r12=0.1, r13=0.9, r24=0.9, r14=0.0, r23=0.0, r34=0.0):
    r = np.zeros((4, 4), dtype=complex)
    r[0, 1], r[0, 2], r[0, 3], r[1, 2], r[1, 3], r[2, 3] = r12, r13, r14, r23, r24, r34
    return ChannelModel(n_s=2, n_n=2, h_s=[h1, h2], sigma=build_covariance(sigmas, r))


class TestComputeWeights:

    def test_two_channel_example(self):
        w = compute_weights([1, 0], [[1, 0.8], [0.8, 1]])
        np.testing.assert_allclose(w, [1.0, -0.8], atol=1e-12)
        assert estimation_variance([1, 0], [[1, 0.8], [0.8, 1]]) == pytest.approx(0.36)

    def test_unbiased_and_optimal(self, rng):
        sigma = random_pd_matrix(rng, 4)
        h = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        w = compute_weights(h, sigma)
        assert np.vdot(w, h) == pytest.approx(1.0)
        variance = estimation_variance(h, sigma)
        assert np.real(np.vdot(w, sigma @ w)) == pytest.approx(variance)
        # any other unbiased combiner is worse
        other = w + 0.1 * (rng.standard_normal(4) + 1j * rng.standard_normal(4))
        other = other / np.conj(np.vdot(other, h))
        assert np.real(np.vdot(other, sigma @ other)) > variance

    def test_single_channel(self):
        np.testing.assert_allclose(compute_weights([2j], [[4.0]]), [0.5j])
        assert estimation_variance([2j], [[4.0]]) == pytest.approx(1.0)

    def test_zero_gain(self):
        with pytest.raises(ZeroGain):
            compute_weights([0, 0], np.eye(2))

    def test_near_singular_correlation(self):
        rho = 1 - 1e-10
        with pytest.raises(NotPositiveDefinite):
            compute_weights([1, 0], [[1, rho], [rho, 1]])

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            compute_weights([1, 0, 0], np.eye(2))

    def test_apply_weights_on_noiseless_block(self):
        alphabet = build_qam(16)
        model = ChannelModel(n_s=1, n_n=1, h_s=[0.5 - 0.5j], sigma=[[1e-20, 0], [0, 1e-20]])
        symbols = SymbolSequence.from_indices(np.arange(16), alphabet)
        block = synthesize(model, symbols, 3)
        w = compute_weights(model.h, model.sigma)
        np.testing.assert_allclose(apply_weights(w, block), alphabet.points, atol=1e-6)
        np.testing.assert_allclose(apply_weights(w, block.stacked()), apply_weights(w, block))

    def test_empirical_variance(self):
        alphabet = build_qam(4)
        rng = np.random.default_rng(SEED_EMPIRICAL)
        model = random_master_model(rng)
        symbols = SymbolSequence.from_indices(rng.integers(0, 4, size=100_000), alphabet)
        block = synthesize(model, symbols, rng.integers(2 ** 32))
        error = apply_weights(compute_weights(model.h, model.sigma), block) - symbols.values
        expected = estimation_variance(model.h, model.sigma)
        assert np.mean(np.abs(error) ** 2) == pytest.approx(expected, rel=0.03)


class TestArchitectures:

    def test_default_scenario_gains(self):
        model = master_model()
        results = {r.architecture: r for r in architecture_table(model)}
        assert results[Architecture.WH_A].snr_gain_db == 0.0
        assert results[Architecture.WH_B].snr_gain_db == pytest.approx(10 * np.log10(1 / (1 - 0.81)), abs=1e-9)
        assert results[Architecture.WH_B].channel_indices == (1, 3)
        assert results[Architecture.WH_D].channel_indices == (1, 2, 3, 4)
        assert results[Architecture.WH_D].variance <= results[Architecture.WH_B].variance
        assert results[Architecture.WH_D].variance <= results[Architecture.WH_C].variance

    @pytest.mark.parametrize('r13,expected_db', [(0.5, 1.249), (0.8, 4.437), (0.9, 7.212)])
    def test_wh_b_gain(self, r13, expected_db):
        model = master_model(r12=0.0, r13=r13, r24=0.0)
        assert architecture_result(Architecture.WH_B, model).snr_gain_db == pytest.approx(expected_db, abs=1e-3)
        assert closed_form_gain_db(Architecture.WH_B, model) == pytest.approx(expected_db, abs=1e-3)

    def test_uncorrelated_reference_gives_no_gain(self):
        model = master_model(r13=0.0, r24=0.0, r12=0.0, h2=0.0)
        assert architecture_result(Architecture.WH_B, model).snr_gain_db == pytest.approx(0.0, abs=1e-12)

    def test_wh_a_weight_is_inverse_gain(self):
        result = architecture_result(Architecture.WH_A, master_model(h1=2j))
        np.testing.assert_allclose(result.weights, [0.5j])
        assert result.variance == pytest.approx(0.25)

    def test_min_single_channel_rule(self):
        model = master_model(h1=1.0, h2=3.0, sigmas=(1.0, 1.0, 1.0, 1.0), r13=0.0, r24=0.0, r12=0.0)
        primary = architecture_result(Architecture.WH_A, model)
        better = architecture_result(Architecture.WH_A, model, min_single_channel=True)
        assert primary.channel_indices == (1,)
        assert better.channel_indices == (2,)
        assert better.variance == pytest.approx(1 / 9)
        assert closed_form_variance(Architecture.WH_A, model, min_single_channel=True) == pytest.approx(1 / 9)

    def test_requires_master_model(self, two_channel_model):
        with pytest.raises(ValueError, match='four-channel'):
            architecture_result(Architecture.WH_B, two_channel_model)

    def test_variance_ordering_on_random_models(self):
        rng = np.random.default_rng(SEED_ORDERING)
        for _ in range(ORDERING_MODELS):
            model = random_master_model(rng)
            var = {r.architecture: r.variance for r in architecture_table(model)}
            slack = ORDERING_SLACK * var[Architecture.WH_A]
            assert var[Architecture.WH_D] <= var[Architecture.WH_B] + slack
            assert var[Architecture.WH_B] <= var[Architecture.WH_A] + slack
            assert var[Architecture.WH_D] <= var[Architecture.WH_C] + slack
            assert var[Architecture.WH_C] <= var[Architecture.WH_A] + slack

    @pytest.mark.parametrize('scale', [1e-3, 0.5, 7.5, 1e4])
    def test_scaling_sigma_keeps_gains(self, rng, scale):
        for _ in range(20):
            model = random_master_model(rng)
            scaled = ChannelModel(n_s=2, n_n=2, h_s=model.h_s, sigma=scale * model.sigma)
            for base, result in zip(architecture_table(model), architecture_table(scaled)):
                assert result.snr_gain_db == pytest.approx(base.snr_gain_db, abs=1e-10)
                assert result.variance == pytest.approx(scale * base.variance, rel=1e-10)

    @pytest.mark.parametrize('arch', list(Architecture))
    def test_closed_forms_match_generic_solve(self, rng, arch):
        for _ in range(50):
            model = random_master_model(rng)
            generic = architecture_result(arch, model).variance
            assert closed_form_variance(arch, model) == pytest.approx(generic, rel=1e-10)


class TestBvsC:

    def test_reference_channel_wins_with_strong_correlation(self):
        assert compare_b_vs_c(master_model(r13=0.99, r12=0.0, h2=0.1)) is Ordering.B_BETTER

    def test_signal_channel_wins_without_reference_correlation(self):
        assert compare_b_vs_c(master_model(r13=0.0, r12=0.0, h2=1.0)) is Ordering.C_BETTER

    def test_tie(self):
        # WH-C with h2 = 0 and r12 = r13 gives WH-B's variance
        model = master_model(h2=0.0, r12=0.6, r13=0.6, r24=0.0, sigmas=(1.0, 1.0, 1.0, 1.0))
        assert compare_b_vs_c(model) is Ordering.TIE
        assert b_vs_c_inequality(model) is Ordering.TIE

    def test_inequality_agrees_with_variances(self, rng):
        for _ in range(200):
            model = random_master_model(rng)
            assert b_vs_c_inequality(model) is compare_b_vs_c(model)
