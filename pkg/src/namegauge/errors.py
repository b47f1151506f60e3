"""Exception types shared across the toolkit.

Every error raised on a user-input path derives from ToolkitError so the
CLI can map it to a single-line diagnostic and exit code 1.
"""


class ToolkitError(Exception):
    """Base class for all toolkit validation and format errors."""


class ManifestError(ToolkitError):
    """Malformed or invariant-violating manifest content."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmbeddingFormatError(ToolkitError):
    """Bad magic, version, or truncated payload in an embedding file."""


class AudioError(ToolkitError):
    """Unsupported or malformed audio input."""


class MetricError(ToolkitError):
    """Undefined metric computation (e.g. WER with an empty reference)."""


class SplitError(ToolkitError):
    """Invalid partitioning or balancing request."""


class ProbeError(ToolkitError):
    """Invalid probe configuration, data, or training state."""


class StatsError(ToolkitError):
    """Statistical test preconditions not met."""
