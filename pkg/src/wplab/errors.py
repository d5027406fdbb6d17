"""Exception types raised across the package."""


class WplabError(Exception):
    """Base class for all errors raised by wplab."""


class InvalidArgument(WplabError, ValueError):
    """An argument is outside the documented domain of an operation."""


class MeshError(WplabError):
    """A triangulation is degenerate (zero-area or inverted face)."""


class DegenerateDifferential(WplabError):
    """A Poincare series vanished numerically on every sample point."""


class OutOfRange(WplabError, ValueError):
    """A deformation parameter lies outside the admissible window."""


class MapOutOfRange(WplabError):
    """A mapped point left the open unit disk."""


class IllResolvedDegree(WplabError):
    """The degree integral is too far from an integer to be trusted."""


class SolverError(WplabError):
    """A linear solve failed to reach its residual target.

    Attributes
    ----------
    residual : float
        Relative residual reached before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (relative residual {residual:.3e})")
        self.residual = residual


class NonConvergence(WplabError):
    """An iterative minimisation hit its iteration cap.

    Attributes
    ----------
    report : EnergyReport
        State of the last accepted iterate.
    map : EquivariantMap
        The last accepted iterate.
    """

    def __init__(self, message, report=None, map=None):
        super().__init__(message)
        self.report = report
        self.map = map


class CurveError(WplabError):
    """A sample of an energy curve failed to converge."""

    def __init__(self, t, cause):
        super().__init__(f"energy sample at t={t!r} did not converge: {cause}")
        self.t = t
        self.cause = cause


class ConfigError(WplabError, ValueError):
    """A scenario configuration could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
