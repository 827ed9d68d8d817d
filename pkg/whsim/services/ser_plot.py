"""`whsim plot`: SER versus SNR curves from a sweep CSV, exported as an image."""
import logging
import os

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from whsim.whsim_utils import ensure_parent_directory, load_columns_dtypes  # noqa: E402

logger = logging.getLogger(__name__)

CURVE_KEYS = ['arch', 'estimator', 'M', 'T']


def add_arguments(parser):
    parser.add_argument('--input', required=True, help='SER CSV written by `whsim sweep` (several may be concatenated)')
    parser.add_argument('--out', required=True, help='figure path; the format follows the extension')
    parser.add_argument('--title', default=None, help='figure title')


def load_ser_records(filepath: str) -> pd.DataFrame:
    if not os.path.isfile(filepath):
        raise FileNotFoundError(f"The file `{filepath}` does not exist.")
    dtype_mapping = load_columns_dtypes('SER_RECORD_COLUMNS')
    try:
        return pd.read_csv(filepath, dtype=dtype_mapping)
    except (ValueError, KeyError) as e:
        raise ValueError(f"Failed to load SER records from {filepath}: {str(e)}")


def plot_ser_curves(df: pd.DataFrame, title: str | None = None):
    """One semilog SER curve per (arch, estimator, M, T). Zero SER points are left out."""
    fig, ax = plt.subplots(figsize=(7, 5))
    for (arch, estimator, order, t_len), curve in df.groupby(CURVE_KEYS, sort=True):
        curve = curve.sort_values('snr_db')
        curve = curve[curve['ser'] > 0]
        if curve.empty:
            continue
        ax.semilogy(curve['snr_db'], curve['ser'], marker='o', label=f"{arch} {estimator} M={order} T={t_len}")
    ax.set_xlabel('SNR (dB)')
    ax.set_ylabel('SER')
    ax.grid(True, which='both', alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend()
    if title:
        ax.set_title(title)
    return fig


def main(args):
    df = load_ser_records(args.input)
    fig = plot_ser_curves(df, args.title)
    ensure_parent_directory(args.out)
    try:
        fig.savefig(args.out, dpi=150, bbox_inches='tight')
    finally:
        plt.close(fig)
    logger.info(f"Wrote {args.out}")
