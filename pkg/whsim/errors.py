"""
Exception hierarchy for whsim.

Every exception raised on purpose by the library derives from `WhsimError` and
carries the process exit status the command-line app reports for it:

- `DataError` (exit status 2): the input is wrong (files, orders, dimensions).
- `NumericalError` (exit status 3): the arithmetic cannot proceed
  (non positive-definite covariances, vanishing gains or estimates).

Usage errors (exit status 1) are reported by the argument parser, not here.
"""


class WhsimError(Exception):
    """Base class for all whsim errors."""
    exit_code = 1


class DataError(WhsimError):
    """The input data or configuration cannot be used as given."""
    exit_code = 2


class NumericalError(WhsimError):
    """A numerical precondition failed while computing a result."""
    exit_code = 3


class InvalidOrder(DataError):
    """The QAM order is not a perfect square of at least 4."""


class MalformedInput(DataError):
    """A text input (IQ recording, scenario file) does not follow its format."""


class DimensionMismatch(DataError):
    """Array dimensions do not agree with the declared channel layout."""


class ScenarioError(DataError):
    """A noise scenario is incomplete or holds values outside their range."""


class NotPositiveDefinite(NumericalError):
    """A covariance matrix is not Hermitian positive definite."""


class RankDeficient(NumericalError):
    """
    A sample covariance estimate is singular.

    Attributes:
    - estimate (numpy.ndarray | None): the offending estimate, kept for inspection.
    """

    def __init__(self, message: str, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ZeroGain(NumericalError):
    """All channel gains are zero, so nothing can be combined."""


class DegenerateBlock(NumericalError):
    """An observation block yields non-finite statistics."""


class ZeroPosteriorMass(NumericalError):
    """The posterior second moments sum to zero; the gain update is undefined."""


class ZeroEstimate(NumericalError):
    """All symbol estimates are zero; calibration has no scale to fix."""
