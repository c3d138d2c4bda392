"""Errors raised by the experiment driver."""
from typing import Optional


class ConfigError(ValueError):
    """Invalid or unknown configuration key/value."""


class CheckpointError(ValueError):
    pass


class CheckpointFormatError(CheckpointError):
    """Wrong magic bytes or unsupported format version."""


class ConfigDigestError(CheckpointError):
    """Checkpoint was written under a different configuration."""


class CheckpointCorruptError(CheckpointError):
    """A section failed its checksum or was truncated."""

    def __init__(self, section: str, message: str):
        super().__init__(f"section {section}: {message}")
        self.section = section


class NonFiniteLossError(RuntimeError):
    """Training produced a non-finite loss; traces were dumped for inspection."""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        suffix = f" (traces dumped to {dump_path})" if dump_path else ""
        super().__init__(message + suffix)
        self.dump_path = dump_path
