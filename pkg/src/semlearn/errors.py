"""Exception hierarchy.

Every error raised by the package derives from :class:`SemLearnError` so the
CLI can map whole families onto exit codes.
"""


class SemLearnError(Exception):
    """Base class for all package errors."""


# -- graph / model construction -------------------------------------------------


class InvalidVertex(SemLearnError, ValueError):
    pass


class CycleDetected(SemLearnError, ValueError):
    def __init__(self, cycle):
        self.cycle = list(cycle)
        super().__init__(f"directed cycle: {' -> '.join(str(v + 1) for v in self.cycle)}")


class InvalidParams(SemLearnError, ValueError):
    pass


class DegenerateRange(SemLearnError, ValueError):
    pass


class NotTerminal(SemLearnError, ValueError):
    pass


class TooLarge(SemLearnError):
    def __init__(self, p, limit):
        self.p = p
        self.limit = limit
        super().__init__(f"p={p} exceeds the enumeration limit {limit}")


class InvalidInputs(SemLearnError, ValueError):
    pass


# -- numerics ---------------------------------------------------------------------


class NumericError(SemLearnError):
    """Failures of the learners or solvers on numeric grounds."""


class SingularSystem(NumericError):
    pass


class NotSymmetric(NumericError):
    pass


class NotPositiveDefinite(NumericError):
    pass


class NonPositiveDiagonal(NumericError):
    def __init__(self, vertex, value, diagnostics=None):
        self.vertex = vertex
        self.value = value
        self.diagnostics = diagnostics
        super().__init__(f"diagonal entry of vertex {vertex + 1} is {value!r} <= 0")


class EmptyActiveSet(NumericError):
    pass


class NotTerminalEstimate(NumericError):
    pass


class Infeasible(NumericError):
    def __init__(self, message, column=None, iteration=None):
        self.column = column
        self.iteration = iteration
        super().__init__(message)


class IterationLimit(NumericError):
    def __init__(self, message, best=None, column=None, iteration=None):
        self.best = best
        self.column = column
        self.iteration = iteration
        super().__init__(message)


class BoundDiverges(NumericError):
    pass


# -- I/O ------------------------------------------------------------------------


class ParseError(SemLearnError, ValueError):
    pass
