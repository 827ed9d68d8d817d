"""`whsim simulate`: seeded IQ recording through one architecture, with its ground truth."""
import logging

from whsim.data_models import Architecture
from whsim.harness import simulate_iq_file
from whsim.services.service_utils import resolve_scenario
from whsim.whsim_utils import sidecar_filepath

logger = logging.getLogger(__name__)


def add_arguments(parser):
    parser.add_argument('--arch', required=True, choices=[a.value for a in Architecture], help='channels recorded')
    parser.add_argument('--mod-order', required=True, type=int, help='square QAM order M')
    parser.add_argument('--block-len', required=True, type=int, help='symbols T')
    parser.add_argument('--snr-db', required=True, type=float, help='probe channel SNR in dB')
    parser.add_argument('--seed', type=int, default=0, help='master seed in [0, 2^64)')
    parser.add_argument('--out', required=True, help='IQ CSV output; ground truth goes to <out>.truth.csv')
    parser.add_argument('--scenario', default=None, help='scenario file or awgn; the bundled scenario if omitted')


def main(args):
    scenario = resolve_scenario(args.scenario)
    simulate_iq_file(Architecture.from_tag(args.arch), args.mod_order, args.block_len, args.snr_db,
                     args.seed, args.out, scenario=scenario)
    logger.info(f"Wrote {args.out}, {sidecar_filepath(args.out, '.truth.csv')} and "
                f"{sidecar_filepath(args.out, '.scenario.txt')}")
