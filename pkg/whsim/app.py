import argparse
import importlib
import logging
import os
import sys

from bgsio import load_yaml

from whsim.errors import WhsimError
from whsim.version import __version__
from whsim.whsim_utils import get_script_path

logger = logging.getLogger(__name__)

USAGE_EXIT_CODE = 1
IO_EXIT_CODE = 2


class UsageErrorParser(argparse.ArgumentParser):
    """ArgumentParser reporting usage errors with exit status 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(USAGE_EXIT_CODE, f"{self.prog}: error: {message}\n")


def load_services(filename: str = 'app_services.yaml') -> list:
    """
    Loads the list of services (subcommands) the app exposes.

    Returns:
    - list[dict]: entries with `name`, `description` and `module`.
    """
    FILEPATH = os.path.join(get_script_path(), filename)
    services = load_yaml(FILEPATH)
    if not services:
        raise FileNotFoundError(f"The file `{FILEPATH}` does not exist or lists no services.")
    return services


def build_parser() -> argparse.ArgumentParser:
    parser = UsageErrorParser(
        prog='whsim',
        description='Weight-hybrid multi-channel receiver: SER benchmarks and blind EM decoding.',
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument('--version', action='version', version=f"%(prog)s {__version__}")
    parser.add_argument('-v', '--verbose', action='count', default=0,
                        help='-v for progress messages, -vv for debugging output')
    subparsers = parser.add_subparsers(dest='service', required=True, parser_class=UsageErrorParser)

    for service in load_services():
        module = importlib.import_module(service['module'])
        subparser = subparsers.add_parser(
            service['name'],
            help=service['description'],
            description=service['description'],
            formatter_class=argparse.ArgumentDefaultsHelpFormatter,
        )
        module.add_arguments(subparser)
        subparser.set_defaults(handler=module.main)
    return parser


def configure_logging(verbosity: int):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr, format='%(levelname)s %(name)s: %(message)s')


def run(argv=None) -> int:
    """
    Entry point of the `whsim` command.

    Exit status: 0 on success, 1 for usage errors, 2 for data and file errors,
    3 for numerical failures.
    """
    try:
        args = build_parser().parse_args(argv)
        configure_logging(args.verbose)
        args.handler(args)
    except WhsimError as e:
        print(f"whsim: {type(e).__name__}: {str(e)}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"whsim: error: {str(e)}", file=sys.stderr)
        return USAGE_EXIT_CODE
    except OSError as e:
        print(f"whsim: {str(e)}", file=sys.stderr)
        return IO_EXIT_CODE
    return 0


if __name__ == '__main__':
    sys.exit(run())
