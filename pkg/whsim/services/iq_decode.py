"""`whsim decode`: blind EM decoding of a recorded IQ file."""
import logging

from whsim.constellation import build_qam
from whsim.data_models import DetectionMode
from whsim.harness import decode_iq_file, truth_symbol_errors
from whsim.services.service_utils import em_config_from_defaults
from whsim.whsim_utils import load_defaults, parse_channels, sidecar_filepath

logger = logging.getLogger(__name__)


def add_arguments(parser):
    parser.add_argument('--input', required=True, help='IQ CSV with header t,ch0_re,ch0_im,...')
    parser.add_argument('--channels', required=True, type=parse_channels,
                        help='channel layout NsxNn, signal channels first (e.g. 2x2)')
    parser.add_argument('--mod-order', required=True, type=int, help='square QAM order M')
    parser.add_argument('--out', required=True,
                        help='detected indices CSV (t,symbol_index); parameters go to <out>.params.yaml')
    parser.add_argument('--detection', choices=[d.value for d in DetectionMode],
                        default=load_defaults()['SWEEP']['DETECTION'], help='symbol detector')
    parser.add_argument('--max-iters', type=int, default=None, help='EM iteration cap (defaults.toml when omitted)')
    parser.add_argument('--truth', default=None,
                        help='ground-truth indices CSV (t,symbol_index), e.g. written by `whsim simulate`; '
                             'prints the symbol error rate of the decode')


def main(args):
    n_s, n_n = args.channels
    config = em_config_from_defaults(load_defaults(), max_iters=args.max_iters,
                                     detection=DetectionMode(args.detection))
    result = decode_iq_file(args.input, n_s, n_n, args.mod_order, config, out_filepath=args.out)
    if not result.state.converged:
        logger.warning(f"EM stopped at the iteration cap ({result.state.iter}) without converging.")
    logger.info(f"Wrote {args.out} and {sidecar_filepath(args.out, '.params.yaml')}")
    if args.truth:
        errors = truth_symbol_errors(result.detected.indices, args.truth, build_qam(args.mod_order))
        total = len(result.detected)
        print(f"symbol errors: {errors}/{total} (SER {errors / total:.6g})")
