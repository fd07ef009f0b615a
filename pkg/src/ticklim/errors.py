"""Exception hierarchy shared by all ticklim modules.

The CLI maps these onto exit codes: validation problems exit with 2,
numerical failures with 3 and bound violations with 4.
"""


class TicklimError(Exception):
    exit_code = 3


class ValidationError(TicklimError, ValueError):
    exit_code = 2


class NumericalError(TicklimError, ArithmeticError):
    exit_code = 3


# numerics
class NotHermitian(ValidationError):
    pass


class NotPsd(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NoConvergence(NumericalError):
    pass


# generator
class StepTooLarge(ValidationError):
    pass


class CompletionFailed(NumericalError):
    pass


class InvalidInstrument(ValidationError):
    pass


class NonSingleton(NumericalError):
    pass


class TailTooHeavy(NumericalError):
    pass


class DegenerateDistribution(NumericalError):
    pass


class IndexOutOfRange(ValidationError, IndexError):
    pass


class BadParameter(ValidationError):
    pass


# infotheory
class NegativeProbability(ValidationError):
    pass


class NotDensity(ValidationError):
    pass


class SigmaTooSmall(ValidationError):
    pass


# bound pipeline
class DeltaBelowStep(NumericalError):
    pass


class CaseOne(TicklimError):
    """R < d^(3/2): the sharpness bound holds without running the chain."""

    exit_code = 0


class RTooSmall(ValidationError):
    pass


class NotIncoherent(ValidationError):
    pass


class BoundViolation(TicklimError):
    exit_code = 4


# optimize
class DegenerateObjective(NumericalError):
    pass
