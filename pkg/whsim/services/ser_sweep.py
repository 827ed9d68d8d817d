"""`whsim sweep`: Monte Carlo SER of one architecture and estimator over an SNR grid."""
import logging

from whsim.data_models import Architecture, DetectionMode, Estimator, RotationMode
from whsim.harness import SweepConfig, run_ser_sweep, write_csv
from whsim.services.service_utils import em_config_from_defaults, resolve_scenario
from whsim.whsim_utils import load_defaults, parse_snr_grid

logger = logging.getLogger(__name__)


def add_arguments(parser):
    defaults = load_defaults()['SWEEP']
    parser.add_argument('--arch', required=True, choices=[a.value for a in Architecture],
                        help='channels combined: whA={1}, whB={1,3}, whC={1,2}, whD={1,2,3,4}')
    parser.add_argument('--mod-order', required=True, type=int, help='square QAM order M (4, 16, 64, ...)')
    parser.add_argument('--block-len', required=True, type=int, help='symbols per trial T')
    parser.add_argument('--snr-db', required=True, type=parse_snr_grid,
                        help='probe channel SNR grid start:step:stop (stop included) or a single value')
    parser.add_argument('--trials', type=int, default=defaults['TRIALS'], help='blocks per SNR point')
    parser.add_argument('--estimator', choices=[e.value for e in Estimator], default=Estimator.KNOWN.value,
                        help='known: combine with the true parameters; em: blind EM estimation')
    parser.add_argument('--seed', type=int, default=0, help='master seed in [0, 2^64)')
    parser.add_argument('--out', required=True, help='SER CSV output path')
    parser.add_argument('--scenario', default=None,
                        help='scenario file or awgn; the bundled correlated-noise scenario if omitted')
    parser.add_argument('--rotation', choices=[r.value for r in RotationMode], default=defaults['ROTATION'],
                        help='EM rotation handling: likelihood choice or best of four against the ground truth')
    parser.add_argument('--detection', choices=[d.value for d in DetectionMode], default=defaults['DETECTION'],
                        help='EM symbol detector')
    parser.add_argument('--max-iters', type=int, default=None, help='EM iteration cap (defaults.toml when omitted)')
    parser.add_argument('--workers', type=int, default=defaults['WORKERS'],
                        help='worker processes; results do not depend on it')
    parser.add_argument('--min-single-channel', action='store_true',
                        help='WH-A uses the better of the two signal channels instead of the probe channel')


def build_config(args) -> SweepConfig:
    em_config = em_config_from_defaults(load_defaults(), max_iters=args.max_iters,
                                        detection=DetectionMode(args.detection))
    return SweepConfig(
        arch=Architecture.from_tag(args.arch),
        mod_order=args.mod_order,
        block_len=args.block_len,
        snr_grid_db=args.snr_db,
        trials=args.trials,
        estimator=Estimator(args.estimator),
        scenario=resolve_scenario(args.scenario),
        seed=args.seed,
        rotation_mode=RotationMode(args.rotation),
        em_config=em_config,
        workers=args.workers,
        min_single_channel=args.min_single_channel,
    )


def main(args):
    config = build_config(args)
    records = run_ser_sweep(config)
    write_csv(records, args.out)
    logger.info(f"Wrote {len(records)} SER records to {args.out}")
