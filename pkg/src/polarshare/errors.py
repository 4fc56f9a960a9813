"""Exception types raised across the package."""


class PolarShareError(Exception):
    """Base class for all package errors."""


class EmptyQualifiedError(PolarShareError):
    """The qualified family of an access structure is empty."""


class OverlapError(PolarShareError):
    """A participant subset was declared both qualified and unqualified."""


class ParamRangeError(PolarShareError):
    """A numeric parameter is outside its admissible range."""


class UnknownExpressionError(PolarShareError):
    """An information expression string could not be parsed or is unsupported."""


class LengthNotPow2Error(PolarShareError):
    """A block length is not a power of two."""


class IndexRangeError(PolarShareError):
    """A polar index is outside [0, N)."""


class TooLargeForExactError(PolarShareError):
    """Exact enumeration was requested beyond its feasible size."""


class InclusionUnrepairableError(PolarShareError):
    """Index-set inclusion repair would empty the encoder dither set."""


class BudgetMismatchError(PolarShareError):
    """Supplied randomness does not match the index-set sizes."""


class InclusionViolationError(PolarShareError):
    """A required index-set inclusion does not hold."""


class LengthMismatchError(PolarShareError):
    """Message / side-information lengths are inconsistent."""


class FrozenSetMismatchError(PolarShareError):
    """Frozen bits do not cover exactly the required index set."""


class InfeasibleDeltaError(PolarShareError):
    """No block count satisfies the rate-overhead inequality."""


class PlanMismatchError(PolarShareError):
    """Input blocks do not match the block plan."""


class ZeroSeedError(PolarShareError):
    """The hash seed must be a nonzero field element."""


class ConfigError(PolarShareError):
    """An experiment configuration is invalid or incomplete."""
