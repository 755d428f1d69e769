"""Exception types shared across the package."""


class DemoforgeError(Exception):
    """Base class for package errors."""


class TaskConfigError(DemoforgeError):
    """Invalid task configuration (unknown references, degenerate shapes, bad schema)."""


class OffsetTooLargeError(DemoforgeError):
    """apply_offset called with an offset beyond the allowed magnitude."""


class NoCandidatesError(DemoforgeError):
    """select_best called with an empty candidate list (retryable sub-task failure)."""


class DslSyntaxError(DemoforgeError):
    """Action-DSL parse failure with source location."""

    def __init__(self, message: str, line: int, col: int, expected: tuple[str, ...] = ()):
        self.line = line
        self.col = col
        self.expected = expected
        suffix = f" (expected {', '.join(expected)})" if expected else ""
        super().__init__(f"line {line}, col {col}: {message}{suffix}")


class OracleError(DemoforgeError):
    """Base class for oracle failures; the engine converts these into failed attempts."""


class OracleTransportError(OracleError):
    """Remote endpoint unreachable or retries exhausted."""


class OracleMalformedError(OracleError):
    """Remote/human response failed strict decoding."""


class OracleAbandonedError(OracleError):
    """Human operator abandoned the query (or it timed out)."""


class OracleDecisionError(OracleError):
    """Backend could not produce a decision (unknown object, part not visible, ...)."""


class EpisodeReadError(DemoforgeError):
    """Base class for persistence read failures."""


class VersionMismatchError(EpisodeReadError):
    pass


class ChecksumError(EpisodeReadError):
    pass


class TruncatedFileError(EpisodeReadError):
    pass


class GenerationExhaustedError(DemoforgeError):
    """Dataset generation hit the episode cap before reaching the success target."""
