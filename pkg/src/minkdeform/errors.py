"""Exception hierarchy shared by all modules."""


class MinkDeformError(Exception):
    """Base class for every error raised by the package."""


class NumericError(MinkDeformError):
    """A numeric evaluation failed (domain edge, singular matrix, root finder)."""


class DomainError(NumericError, ValueError):
    """Function argument outside its domain, e.g. sqrt of a negative jet."""


class DivisionByNearZero(NumericError, ZeroDivisionError):
    """Denominator with constant term below the 1e-14 guard."""


class OutsideDomain(NumericError):
    """Point lies outside the conic domain of a norm."""


class ZeroVector(MinkDeformError, ValueError):
    pass


class SingularMetric(NumericError):
    pass


class InputError(MinkDeformError, ValueError):
    """Malformed user input (expressions, parameters, configs)."""


class PhiSyntaxError(InputError):
    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownVariable(InputError):
    pass


class UnknownFunction(InputError):
    pass


class UnknownBuiltin(InputError):
    pass


class InvalidParam(InputError):
    pass


class RankDeficientBetas(InputError):
    pass


class EpsilonNearZero(NumericError):
    pass


class NoBracket(NumericError):
    pass


class MonotonicityViolation(NumericError):
    pass


class StepDomainError(DomainError):
    def __init__(self, step, cause):
        super().__init__(f"iteration step {step}: {cause}")
        self.step = step


class SignChange(NumericError):
    pass


class DegenerateDifference(NumericError):
    pass


class SingularBase(NumericError):
    pass


class IllConditionedEigen(NumericError):
    pass


class VanishingMeanCartan(NumericError):
    pass


class InsufficientSamples(InputError):
    pass


class EmptySample(InputError):
    pass
