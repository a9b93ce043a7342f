"""Exception types raised across the package."""


class FieldnetError(Exception):
    """Base class for all package errors."""


class InvalidArgument(FieldnetError, ValueError):
    pass


class OutOfDomain(FieldnetError, ValueError):
    pass


class ConditioningError(FieldnetError, ArithmeticError):
    """A dense solve was attempted on a matrix that is numerically singular."""

    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


class InvalidScenario(FieldnetError, ValueError):
    pass


class ConfigError(FieldnetError, ValueError):
    """Bad configuration. ``problems`` holds ``(path, message)`` pairs."""

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))


class ExcitationTimeout(FieldnetError, RuntimeError):
    """Excitation was not reached before the configured timeout."""

    def __init__(self, message: str, deficient: dict):
        super().__init__(message)
        self.deficient = deficient
