"""Exception types raised by the simulator."""


class SimulationError(Exception):
    """Base class for all simulator errors."""


class ValidationError(SimulationError, ValueError):
    """An input violates a documented precondition."""


class ParseError(ValidationError):
    """A channel or config file could not be parsed.

    ``line`` is the 1-based line number of the offending line, or ``None``
    when the problem is not tied to a single line.
    """

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f"{':' if where else ''}line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class BoundsError(SimulationError, IndexError):
    """An index lies outside the valid range."""


class SingularityError(SimulationError, ZeroDivisionError):
    """A quantity would require division by zero."""


class InconsistencyError(SimulationError):
    """A Monte-Carlo estimate is implausible for the inputs it came from."""
