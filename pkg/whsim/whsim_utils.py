import os
import re

import yaml
from bgsio import create_new_directory, load_toml_variables, load_yaml
from bgstools.utils import colnames_dtype_mapping

from whsim.errors import DataError, MalformedInput

_COMPLEX_CHARS = set('0123456789.+-eEi')


def get_script_path():
    """
    Retrieves the directory path of the whsim package.

    Returns:
    str: The absolute directory path of this module.
    """
    return os.path.dirname(os.path.realpath(__file__))


def get_config_dirpath():
    return os.path.join(get_script_path(), 'config')


def load_defaults(filename: str = 'defaults.toml') -> dict:
    """
    Loads the application defaults from the config subdirectory.

    Parameters:
    - filename (str, optional): TOML file within `whsim/config`. Defaults to 'defaults.toml'.

    Returns:
    - dict: sections `EM`, `SWEEP` and `FILES` with upper-case keys.

    Raises:
    - DataError: if the file does not exist or cannot be parsed.
    """
    FILEPATH = os.path.join(get_config_dirpath(), filename)
    if not os.path.isfile(FILEPATH):
        raise DataError(f"The file `{FILEPATH}` does not exist.")
    filedict = load_toml_variables(FILEPATH)
    if filedict:
        return filedict
    raise DataError(f"`{FILEPATH}` is not readable.")


def get_config_filepath(key: str, defaults: dict | None = None) -> str:
    """Absolute path of the config file registered under `[FILES] key`."""
    defaults = defaults or load_defaults()
    try:
        FILENAME = defaults['FILES'][key]
    except KeyError:
        raise DataError(f"No `{key}` entry in the [FILES] section of the defaults.")
    return os.path.join(get_config_dirpath(), FILENAME)


def load_columns_dtypes(key: str = 'SER_RECORD_COLUMNS') -> dict:
    """Ordered column -> dtype mapping of an output table described in the config."""
    FILEPATH = get_config_filepath(key)
    if not os.path.isfile(FILEPATH):
        raise DataError(f"The file `{FILEPATH}` does not exist.")
    columns_dtypes = load_yaml(FILEPATH)
    if not columns_dtypes:
        raise DataError(f"Failed to load column descriptions from {FILEPATH}.")
    return colnames_dtype_mapping(columns_dtypes)


def parse_complex(text: str) -> complex:
    """
    Parses a complex value written `a+bi` (also `a`, `bi`, `a-bi`, exponents allowed).

    Raises:
    - MalformedInput: if `text` is not such a value.

    Example Usage:
    >>> parse_complex('0.3-2e-1i')
    (0.3-0.2j)
    """
    compact = text.replace(' ', '')
    if not compact or not set(compact) <= _COMPLEX_CHARS or 'i' in compact[:-1]:
        raise MalformedInput(f"`{text}` is not a complex value of the form a+bi.")
    try:
        return complex(compact[:-1] + 'j' if compact.endswith('i') else compact)
    except ValueError:
        raise MalformedInput(f"`{text}` is not a complex value of the form a+bi.")


def format_complex(value: complex) -> str:
    value = complex(value)
    return f"{value.real!r}{'+' if value.imag >= 0 else '-'}{abs(value.imag)!r}i"


def parse_snr_grid(text: str) -> list[float]:
    """
    Expands `start:step:stop` (stop included) or a single value into a list of SNRs in dB.

    Raises:
    - ValueError: on malformed text, a non-positive step or stop < start.
    """
    parts = text.split(':')
    try:
        values = [float(p) for p in parts]
    except ValueError:
        raise ValueError(f"SNR grid `{text}` must be `start:step:stop` or a single value.")
    if len(values) == 1:
        return values
    if len(values) != 3:
        raise ValueError(f"SNR grid `{text}` must be `start:step:stop` or a single value.")
    start, step, stop = values
    if step <= 0 or stop < start:
        raise ValueError(f"SNR grid `{text}` needs a positive step and stop >= start.")
    count = int((stop - start) / step + 1e-9) + 1
    return [start + k * step for k in range(count)]


def parse_channels(text: str) -> tuple[int, int]:
    """Parses a channel layout `NsxNn`, e.g. `2x2`."""
    match = re.fullmatch(r'(\d+)[xX](\d+)', text.strip())
    if not match or int(match.group(1)) < 1:
        raise ValueError(f"Channel layout `{text}` must be NsxNn with Ns >= 1, e.g. 2x2.")
    return int(match.group(1)), int(match.group(2))


def sidecar_filepath(filepath: str, suffix: str) -> str:
    """`out.csv` -> `out<suffix>`, e.g. `out.truth.csv`."""
    return os.path.splitext(filepath)[0] + suffix


def ensure_parent_directory(filepath: str):
    DIRPATH = os.path.dirname(os.path.abspath(filepath))
    if not os.path.isdir(DIRPATH):
        create_new_directory(DIRPATH)


def save_yaml(data: dict, filepath: str):
    """Writes `data` as YAML."""
    try:
        with open(filepath, 'w', encoding='utf-8') as f:
            yaml.safe_dump(data, f, allow_unicode=True, sort_keys=False)
    except OSError as e:
        raise OSError(f"Failed to write {filepath}: {str(e)}")
