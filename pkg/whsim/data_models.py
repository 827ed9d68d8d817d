from enum import Enum


class Architecture(Enum):
    """
    Weight-hybrid receiver architectures.

    Each architecture combines a subset of the four physical channels, numbered
    from 1 in the order of the master covariance:

    1. probe signal channel
    2. coupling signal channel
    3. probe noise reference
    4. coupling noise reference

    The enum value is the tag used on the command line and in CSV output.

    Example Usage:
    >>> Architecture.from_tag('whB').channel_indices
    (1, 3)
    """
    WH_A = 'whA'
    WH_B = 'whB'
    WH_C = 'whC'
    WH_D = 'whD'

    @property
    def channel_indices(self) -> tuple[int, ...]:
        return _ARCHITECTURE_CHANNELS[self]

    @classmethod
    def from_tag(cls, tag: str) -> 'Architecture':
        for arch in cls:
            if arch.value.lower() == tag.lower() or arch.name.lower() == tag.lower():
                return arch
        raise ValueError(f"Unknown architecture `{tag}`; expected one of {[a.value for a in cls]}.")


_ARCHITECTURE_CHANNELS = {
    Architecture.WH_A: (1,),
    Architecture.WH_B: (1, 3),
    Architecture.WH_C: (1, 2),
    Architecture.WH_D: (1, 2, 3, 4),
}


class Estimator(Enum):
    KNOWN = 'known'  # combiner with the true gains and covariance
    EM = 'em'  # blind EM estimation


class RotationMode(Enum):
    LIKELIHOOD = 'likelihood'
    GENIE = 'genie'  # best of the four rotations against ground truth


class DetectionMode(Enum):
    MIN_DISTANCE = 'min_distance'
    MAX_POSTERIOR = 'max_posterior'


class Ordering(Enum):
    B_BETTER = 'B_better'
    C_BETTER = 'C_better'
    TIE = 'tie'
