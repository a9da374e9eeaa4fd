from typing import Any, Optional


class EquitraceError(Exception):
    def __init__(self, message: str):
        self.message = message
        self.formatted_message = f"ERROR: {self.message}"
        super().__init__(self.formatted_message)


class EquitraceNotImplementedError(EquitraceError):
    pass


class UnsupportedGroupOperation(EquitraceError):
    pass


class CoverageFailure(EquitraceError):
    pass


class StepFailure(EquitraceError):
    def __init__(self, message: str, state: Optional[Any] = None):
        self.state = state
        super().__init__(f"{message} [state: {state}]" if state is not None else message)


class HypothesisViolation(EquitraceError):
    def __init__(self, message: str, worst: Optional[Any] = None):
        self.worst = worst
        super().__init__(message)


class NoConvergence(EquitraceError):
    pass


class SingularJacobian(EquitraceError):
    pass


class SupportEscape(EquitraceError):
    pass


class TIndependenceViolation(EquitraceError):
    pass


class DegenerateOrbit(EquitraceError):
    pass


class QuadratureBudgetExceeded(EquitraceError):
    pass


class NonConvergentLadder(EquitraceError):
    pass


class ParseError(EquitraceError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(EquitraceError):
    def __init__(self, key: str, reason: str):
        self.key = key
        self.reason = reason
        super().__init__(f"{key}: {reason}")


class TruncationWarning(UserWarning):
    pass
