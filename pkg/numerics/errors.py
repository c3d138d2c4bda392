"""Errors raised by the differentiable core."""


class ShapeError(ValueError):
    """Operand extents do not agree with what an operation requires."""


class ExhaustedQuestionsError(ValueError):
    """Every entry of a masked distribution is disallowed."""


class NonFiniteError(ValueError):
    """A gradient or value that must be finite is not."""

    def __init__(self, name: str, message: str = ""):
        self.name = name
        super().__init__(message or f"non-finite values in '{name}'")
