"""Exception types shared across the pipeline."""


class HypcodeError(Exception):
    """Base class for all pipeline errors."""


class CheckFailure(HypcodeError):
    """A hard verification failure; the CLI maps it to exit code 1."""


class ConfigError(HypcodeError):
    """Invalid configuration; the CLI maps it to exit code 2."""


class WitnessedError(CheckFailure):
    """Failure carrying a witness payload for reports."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class CoverageFailure(WitnessedError):
    pass


class NoReturnWithinRho(WitnessedError):
    pass


class OutOfBox(HypcodeError):
    pass


class DivergentIntegral(HypcodeError):
    pass


class DiagonalizationResidual(WitnessedError):
    pass


class HorizonTooShort(HypcodeError):
    def __init__(self, message, required):
        super().__init__(message)
        self.required = required


class SpacingViolation(WitnessedError):
    pass


class DomainExceeded(HypcodeError):
    pass


class BoundViolation(WitnessedError):
    pass


class GraphReparamFailure(HypcodeError):
    pass


class NoIntersection(HypcodeError):
    pass


class NetOverflow(WitnessedError):
    pass


class SurgeryFailure(WitnessedError):
    pass


class EmptyRectangle(WitnessedError):
    pass


class BracketFailure(WitnessedError):
    pass


class CylinderEmpty(WitnessedError):
    pass


class BoundViolated(WitnessedError):
    pass


class NotTransitive(WitnessedError):
    pass


class ConvergenceFailure(HypcodeError):
    pass
