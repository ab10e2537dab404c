"""Exception hierarchy.

Everything the caller can fix by changing input derives from
:class:`ValidationError`; the CLI maps those to exit code 2.
"""


class ValidationError(ValueError):
    pass


class EmptySupport(ValidationError):
    pass


class NegativeWeight(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidExponent(ValidationError):
    pass


class InfiniteExponent(ValidationError):
    pass


class EmptyDomain(ValidationError):
    pass


class InfeasibleMarginals(ValidationError):
    pass


class NonOptimalPlan(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class BoundaryIndex(ValidationError):
    pass


class ZeroStep(ValidationError):
    pass


class MisalignedSamples(ValidationError):
    pass


class NotAbsolutelyContinuous(ValidationError):
    pass


class DiameterViolated(ValidationError):
    pass


class DegenerateBox(ValidationError):
    pass


class OutOfDomain(ValidationError):
    pass


class MassMismatch(ValidationError):
    pass


class DisconnectedSupport(ValidationError):
    pass


class DegenerateDensity(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class SchemaViolation(ParseError):
    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class UnknownSubcommand(ValidationError):
    pass
