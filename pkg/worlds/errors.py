"""Errors raised by environments and data ingestion."""


class QuestionError(ValueError):
    """A question id is out of range or was already asked."""


class IdxFormatError(ValueError):
    """Bad magic number, unsupported type code or truncated IDX payload."""


class CorpusError(ValueError):
    pass


class CsvFormatError(ValueError):
    """A CSV row could not be parsed; ``row`` is 1-based after the header."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class PlacementError(RuntimeError):
    """Rejection sampling could not place every object."""


__all__ = ["QuestionError", "IdxFormatError", "CorpusError", "CsvFormatError", "PlacementError"]
