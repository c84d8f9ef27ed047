"""Exception hierarchy shared by all modules."""


class HJSelectError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(HJSelectError):
    pass


class SchemaError(ConfigError):
    """Config failed validation. ``pointer`` is a JSON pointer to the offending key."""

    def __init__(self, message, pointer=""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer or "/"


class NumericalGateError(HJSelectError):
    """A numerical acceptance gate failed (maps to CLI exit code 3)."""


# geometry
class ScaleExceedsAmbient(HJSelectError):
    pass


class SeparationViolated(NumericalGateError):
    def __init__(self, message, witnesses=()):
        super().__init__(message)
        self.witnesses = list(witnesses)


class GridTooCoarse(HJSelectError):
    pass


# hamiltonians
class OutOfEvaluationBox(HJSelectError):
    pass


class LegendreUnbounded(HJSelectError):
    pass


class DerivativeUnstable(NumericalGateError):
    pass


# linprog
class IterationCapExceeded(HJSelectError):
    pass


class NumericallySingularBasis(HJSelectError):
    pass


# hjsolver
class NoFeasibleControl(HJSelectError):
    pass


class NonConvergence(NumericalGateError):
    pass


class EmptyTrajectory(HJSelectError):
    pass


# ergodic / mather / selection / sweep
class CrossCheckFailed(NumericalGateError):
    pass


class BracketFailure(NumericalGateError):
    pass


class InfeasibleDiscretization(HJSelectError):
    pass


class SelectionInfeasible(NumericalGateError):
    pass


class DominanceViolated(NumericalGateError):
    pass


class ScheduleTooShort(NumericalGateError):
    pass
