"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HioasecError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(HioasecError, ValueError):
    """Input data violates a structural or numeric invariant."""


# attack graph -----------------------------------------------------------

class GraphError(ValidationError):
    pass


class CycleDetected(GraphError):
    pass


class DanglingEndpoint(GraphError):
    pass


class InvalidProbability(GraphError):
    pass


class DuplicateEdge(GraphError):
    pass


class UnknownNode(GraphError):
    pass


class PathLimitExceeded(GraphError):
    pass


# security game ----------------------------------------------------------

class GameError(ValidationError):
    pass


class UnknownDefender(GameError):
    pass


class NegativeInvestment(GameError):
    pass


class DimensionMismatch(GameError):
    pass


class GridTooLarge(GameError):
    pass


class DidNotConverge(HioasecError):
    """Raised only when a caller asks for strict convergence."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


# automata ---------------------------------------------------------------

class AutomatonError(ValidationError):
    pass


class UnknownMode(AutomatonError):
    pass


class Incompatible(AutomatonError):
    def __init__(self, message: str, failures: list[str] | None = None):
        super().__init__(message)
        self.failures = list(failures or [])


class UndefinedUpdate(AutomatonError):
    pass


class ValuationTypeError(AutomatonError, TypeError):
    pass


class WrongMode(AutomatonError):
    pass


# engine / scenario ------------------------------------------------------

class ScheduleError(ValidationError):
    pass


class NonDeterministic(HioasecError):
    def __init__(self, message: str, first_divergence=None):
        super().__init__(message)
        self.first_divergence = first_divergence


class ParseError(HioasecError):
    """Scenario file could not be read as JSON of the expected shape."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.line = line
        self.field = field


class ScenarioValidationError(ValidationError):
    """Scenario parsed but references or values are invalid."""

    def __init__(self, message: str, *, entity: str | None = None, kind: str | None = None):
        super().__init__(message)
        self.entity = entity
        self.kind = kind
