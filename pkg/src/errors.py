"""Exception types raised across the simulator.

Each error also derives from the closest builtin so callers that only know
about ``ValueError`` / ``RuntimeError`` keep working.
"""


class FeelSimError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(FeelSimError, ValueError):
    pass


class IdxFormatError(FeelSimError, ValueError):
    """Malformed IDX container. ``field`` names the offending header field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"IDX format error in '{field}': {message}")
        self.field = field


class PartitionInfeasibleError(FeelSimError, RuntimeError):
    pass


class DomainError(FeelSimError, ValueError):
    pass


class InvalidDecisionError(FeelSimError, ValueError):
    pass


class EmptySelectionError(InvalidDecisionError, ZeroDivisionError):
    pass


class InfeasibleProblemError(FeelSimError, RuntimeError):
    """No feasible decision exists. ``binding_constraint`` is 'energy' or 'delay'."""

    def __init__(self, message: str, binding_constraint: str):
        super().__init__(f"{message} (binding constraint: {binding_constraint})")
        self.binding_constraint = binding_constraint


class InfeasibleSubproblemError(FeelSimError, RuntimeError):
    pass


class NumericError(FeelSimError, ArithmeticError):
    pass


class ConfigError(FeelSimError, ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if field is not None:
            location.append(f"field '{field}'")
        prefix = f"[{', '.join(location)}] " if location else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.field = field
