"""`whsim gains`: known-parameter analysis of the WH architectures for one scenario."""
import numpy as np
import pandas as pd

from whsim.combiner import architecture_table, compare_b_vs_c
from whsim.constellation import build_qam
from whsim.services.service_utils import resolve_scenario
from whsim.whsim_utils import format_complex


def add_arguments(parser):
    parser.add_argument('--scenario', default=None, help='scenario file or awgn; the bundled scenario if omitted')
    parser.add_argument('--snr-db', type=float, default=10.0, help='probe channel SNR in dB')
    parser.add_argument('--mod-order', type=int, default=16, help='QAM order fixing the symbol power P_s')
    parser.add_argument('--min-single-channel', action='store_true',
                        help='WH-A uses the better of the two signal channels')


def gains_dataframe(results) -> pd.DataFrame:
    return pd.DataFrame({
        'arch': [r.architecture.value for r in results],
        'channels': [','.join(str(i) for i in r.channel_indices) for r in results],
        'variance': [r.variance for r in results],
        'snr_gain_db': [r.snr_gain_db for r in results],
        'weights': [' '.join(format_complex(np.round(w, 6)) for w in r.weights) for r in results],
    })


def main(args):
    scenario = resolve_scenario(args.scenario)
    model = scenario.master_model(args.snr_db, build_qam(args.mod_order).avg_power)
    df = gains_dataframe(architecture_table(model, args.min_single_channel))
    print(df.to_string(index=False))
    print(f"WH-B vs WH-C: {compare_b_vs_c(model).value}")
