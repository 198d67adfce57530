"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid solver, oracle or experiment configuration."""

    def __init__(self, message, *, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class InvalidDimensionError(ValueError):
    pass


class NumericInputError(ValueError):
    pass


class NoNegativeCurvatureError(ValueError):
    pass


class InfeasibleParametersError(ValueError):
    """A closed-form step-size threshold came out nonpositive."""


class DivergenceError(RuntimeError):
    """Iterates blew up; ``partial`` holds the RunResult up to the failure."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
