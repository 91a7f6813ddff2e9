"""Exception hierarchy shared across the engine."""


class LinflowError(Exception):
    """Base class for all engine errors."""


class ExprError(LinflowError):
    """Base class for expression parsing/evaluation errors."""


class ParseError(ExprError):
    """Syntax error with byte offset and the tokens that would have been accepted."""

    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        self.offset = offset
        self.expected = expected
        detail = f"{message} at offset {offset}"
        if expected:
            detail += f" (expected one of: {', '.join(expected)})"
        super().__init__(detail)


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        self.name = name
        self.offset = offset
        super().__init__(f"unknown identifier '{name}' at offset {offset}")


class ArityError(ExprError):
    def __init__(self, name: str, got: int, want: int, offset: int):
        self.offset = offset
        super().__init__(
            f"function '{name}' takes {want} argument(s), got {got} (at offset {offset})"
        )


class EvalDomainError(ExprError):
    """Evaluation hit a singularity (log/sqrt of nonpositive, division by zero)."""

    def __init__(self, message: str, node: str):
        self.node = node
        super().__init__(f"{message} in node '{node}'")


class DimensionError(LinflowError):
    """Shape or dimension mismatch between specs."""


class DomainEscape(LinflowError):
    """Trajectory left the open domain before the requested time."""

    def __init__(self, escape_time: float):
        self.escape_time = escape_time
        super().__init__(f"trajectory escaped the domain at t ~ {escape_time:.12g}")


class IntegrationError(LinflowError):
    """Integrator failure: step underflow (stiffness) or step budget exhausted."""


class ConditioningError(LinflowError):
    """A matrix needed in inverted form is numerically singular."""


class PreconditionError(LinflowError):
    """A gated operation was invoked with failing preconditions."""


class SceneError(LinflowError):
    """Scene file cannot be loaded or validated."""

    def __init__(self, message: str, section: str | None = None, key: str | None = None):
        self.section = section
        self.key = key
        where = ""
        if section:
            where = f" [section '{section}'" + (f", key '{key}'" if key else "") + "]"
        super().__init__(message + where)
