import numpy as np
import pandas as pd
import pytest

from whsim.app import build_parser, load_services, run
from whsim.channel_sim import ObservationBlock, write_iq_csv
from whsim.data_models import DetectionMode
from whsim.em_estimator import EmConfig
from whsim.harness import awgn_scenario, default_scenario, format_scenario
from whsim.services.service_utils import em_config_from_defaults, resolve_scenario
from whsim.whsim_utils import load_defaults

SER_HEADER = 'arch,estimator,M,T,snr_db,ser,symbol_errors,symbols_total,trials,mean_em_iters,seed'


def sweep_args(out, *extra):
    return ['sweep', '--arch', 'whB', '--mod-order', '4', '--block-len', '200', '--snr-db', '0:5:10',
            '--seed', '3', '--out', str(out), *extra]


class TestParser:

    def test_services_are_registered(self):
        names = [service['name'] for service in load_services()]
        assert names == ['sweep', 'decode', 'simulate', 'gains', 'plot']

    def test_sweep_defaults(self, tmp_path):
        args = build_parser().parse_args(sweep_args(tmp_path / 'ser.csv'))
        assert args.snr_db == [0.0, 5.0, 10.0]
        assert args.trials == 1
        assert args.estimator == 'known'
        assert args.rotation == 'likelihood'
        assert args.workers == 1

    @pytest.mark.parametrize('argv', [
        ['sweep', '--arch', 'whE', '--mod-order', '4', '--block-len', '10', '--snr-db', '10', '--out', 'x.csv'],
        ['sweep', '--mod-order', '4', '--block-len', '10', '--snr-db', '10', '--out', 'x.csv'],
        ['decode', '--input', 'a.csv', '--channels', '2by2', '--mod-order', '4', '--out', 'b.csv'],
        ['sweep', '--bogus'],
        ['unknown-service'],
        [],
    ])
    def test_usage_errors_exit_with_one(self, argv):
        with pytest.raises(SystemExit) as excinfo:
            run(argv)
        assert excinfo.value.code == 1

    def test_help(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            run(['sweep', '--help'])
        assert excinfo.value.code == 0
        assert '--min-single-channel' in capsys.readouterr().out


class TestServices:

    def test_sweep_writes_csv(self, tmp_path):
        out = tmp_path / 'ser.csv'
        assert run(sweep_args(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == SER_HEADER
        assert len(lines) == 4

    def test_sweep_is_reproducible_across_workers(self, tmp_path):
        assert run(sweep_args(tmp_path / 'a.csv', '--trials', '3')) == 0
        assert run(sweep_args(tmp_path / 'b.csv', '--trials', '3', '--workers', '2')) == 0
        assert (tmp_path / 'a.csv').read_bytes() == (tmp_path / 'b.csv').read_bytes()

    def test_invalid_order_is_a_data_error(self, tmp_path, capsys):
        argv = sweep_args(tmp_path / 'ser.csv')
        argv[argv.index('--mod-order') + 1] = '15'
        assert run(argv) == 2
        assert 'InvalidOrder' in capsys.readouterr().err

    def test_missing_scenario_file(self, tmp_path):
        assert run(sweep_args(tmp_path / 'ser.csv', '--scenario', str(tmp_path / 'none.txt'))) == 2

    def test_sweep_awgn_scenario(self, tmp_path):
        out = tmp_path / 'ser.csv'
        assert run(sweep_args(out, '--scenario', 'awgn')) == 0
        assert len(out.read_text().splitlines()) == 4

    def test_invalid_sweep_values_are_usage_errors(self, tmp_path):
        assert run(sweep_args(tmp_path / 'ser.csv', '--trials', '0')) == 1

    def test_simulate_then_decode(self, tmp_path, capsys):
        recording = tmp_path / 'rx.csv'
        assert run(['simulate', '--arch', 'whD', '--mod-order', '4', '--block-len', '1000', '--snr-db', '15',
                    '--seed', '2024', '--out', str(recording)]) == 0
        decoded = tmp_path / 'decoded.csv'
        assert run(['decode', '--input', str(recording), '--channels', '2x2', '--mod-order', '4',
                    '--out', str(decoded)]) == 0
        detected = pd.read_csv(decoded)['symbol_index'].to_numpy()
        truth = pd.read_csv(tmp_path / 'rx.truth.csv')['symbol_index'].to_numpy()
        assert np.mean(detected != truth) <= 0.01
        assert (tmp_path / 'decoded.params.yaml').is_file()
        assert (tmp_path / 'rx.scenario.txt').is_file()

        capsys.readouterr()
        assert run(['decode', '--input', str(recording), '--channels', '2x2', '--mod-order', '4',
                    '--out', str(decoded), '--truth', str(tmp_path / 'rx.truth.csv')]) == 0
        errors = int(np.count_nonzero(detected != truth))
        assert f"symbol errors: {errors}/1000" in capsys.readouterr().out

    def test_decode_layout_mismatch(self, tmp_path):
        recording = tmp_path / 'rx.csv'
        assert run(['simulate', '--arch', 'whB', '--mod-order', '4', '--block-len', '100', '--snr-db', '15',
                    '--out', str(recording)]) == 0
        assert run(['decode', '--input', str(recording), '--channels', '2x2', '--mod-order', '4',
                    '--out', str(tmp_path / 'decoded.csv')]) == 2

    def test_singular_noise_reference_is_a_numerical_error(self, tmp_path, rng):
        noise = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        signal = rng.standard_normal(50) + 1j * rng.standard_normal(50)
        recording = tmp_path / 'rx.csv'
        write_iq_csv(ObservationBlock(y_s=signal[None, :], y_n=np.vstack([noise, noise])), str(recording))
        assert run(['decode', '--input', str(recording), '--channels', '1x2', '--mod-order', '4',
                    '--out', str(tmp_path / 'decoded.csv')]) == 3

    def test_gains(self, capsys):
        assert run(['gains', '--snr-db', '10']) == 0
        out = capsys.readouterr().out
        for tag in ('whA', 'whB', 'whC', 'whD'):
            assert tag in out
        assert 'WH-B vs WH-C: B_better' in out

    def test_plot(self, tmp_path):
        ser = tmp_path / 'ser.csv'
        assert run(sweep_args(ser)) == 0
        figure = tmp_path / 'ser.png'
        assert run(['plot', '--input', str(ser), '--out', str(figure)]) == 0
        assert figure.stat().st_size > 0

    def test_plot_missing_input(self, tmp_path):
        assert run(['plot', '--input', str(tmp_path / 'none.csv'), '--out', str(tmp_path / 'f.png')]) == 2


class TestServiceSettings:

    def test_em_config_follows_defaults(self):
        config = em_config_from_defaults(load_defaults(), max_iters=None, detection=DetectionMode.MAX_POSTERIOR)
        assert config == EmConfig(detection=DetectionMode.MAX_POSTERIOR)

    def test_em_config_overrides(self):
        assert em_config_from_defaults(load_defaults(), max_iters=7).max_iters == 7
        assert em_config_from_defaults({}).init_phase == 'eigen'

    def test_resolve_scenario(self, tmp_path, correlated_scenario):
        assert resolve_scenario(None) == default_scenario()
        assert resolve_scenario('awgn') == awgn_scenario()
        filepath = tmp_path / 'scenario.txt'
        filepath.write_text(format_scenario(correlated_scenario))
        assert resolve_scenario(str(filepath)) == correlated_scenario
