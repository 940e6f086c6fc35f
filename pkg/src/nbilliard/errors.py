"""Exception hierarchy shared by all modules."""


class BilliardError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for it."""

    exit_code = 3


class ValidationError(BilliardError, ValueError):
    exit_code = 2


class CollisionPoint(BilliardError, ValueError):
    pass


class NotFound(BilliardError):
    pass


class DegenerateFoot(BilliardError, ValueError):
    pass


class StepLimitExceeded(BilliardError):
    pass


class NonfiniteState(BilliardError):
    pass


class TangentialImpact(BilliardError, ValueError):
    pass


class AmbiguousClass(BilliardError):
    pass


class ClassCollapse(BilliardError):
    pass


class NoConvergence(BilliardError):
    pass


class WallTooClose(BilliardError):
    # the construction's hypothesis (wall far enough) is violated
    exit_code = 4


class InvalidWall(BilliardError, ValueError):
    exit_code = 4


class DegenerateCoordinates(BilliardError, ValueError):
    pass


class EnergyMismatch(BilliardError):
    pass


class DomainError(BilliardError, ValueError):
    pass


class ModulusOutOfRange(BilliardError, ValueError):
    exit_code = 2


class PoleProximity(BilliardError, ValueError):
    pass


class ParseError(BilliardError, ValueError):
    exit_code = 2

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
