"""Exception hierarchy shared across the engine.

Exit codes mirror the CLI contract: 0 success, 1 validation failure,
2 runtime/stage failure, 3 scorer transport failure.
"""

from __future__ import annotations


class PriorcaseError(Exception):
    """Base class for all engine errors."""

    exit_code = 2


class ValidationError(PriorcaseError):
    """Bad input: malformed files, invalid configs, violated preconditions."""

    exit_code = 1


class StageError(PriorcaseError):
    """A pipeline stage failed at runtime (index missing, I/O, model error)."""

    exit_code = 2


class ScorerTransportError(PriorcaseError):
    """Transport-level failure talking to the scoring sidecar; retryable."""

    exit_code = 3


class SidecarRequestError(StageError):
    """The sidecar answered with a structured error response (not transport)."""
