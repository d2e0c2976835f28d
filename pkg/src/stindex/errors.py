"""Exception hierarchy shared by all pipeline stages."""

from __future__ import annotations


class StindexError(Exception):
    """Base class for every error raised by this package."""


# -- schema configuration ------------------------------------------------


class SchemaSyntaxError(StindexError):
    """Schema config text is not well-formed JSON/YAML."""


class SchemaViolation(StindexError):
    """A schema invariant failed; the message names the offending dimension."""


# -- ingestion ------------------------------------------------------------


class FetchError(StindexError):
    """Locator could not be fetched (network failure, timeout, missing file)."""


class UnsupportedFormat(StindexError):
    """Document format is not one of txt/html/htm/md."""


class EmptyDocument(StindexError):
    """Document body is empty after whitespace normalization."""


class InvalidChunkParams(StindexError):
    """Chunk size/overlap combination is unusable (overlap >= size)."""


# -- LLM gateway ----------------------------------------------------------


class ContextOverflow(StindexError):
    """Assembled prompt exceeds the model budget even after memory truncation."""


class BackendUnavailable(StindexError):
    """Backend could not serve the request after retries."""


class AuthError(StindexError):
    """Backend rejected credentials; never retried."""


class ReplayMiss(StindexError):
    """Replay backend has no recorded response for this request key."""


class PayloadUnparseable(StindexError):
    """No JSON object recoverable from the model response."""


# -- temporal normalization -----------------------------------------------


class BadIso(StindexError):
    """Text is not a valid ISO 8601 value; ``pos`` is the failing offset."""

    def __init__(self, message: str, pos: int = 0):
        super().__init__(message)
        self.pos = pos


class UnresolvableExpression(StindexError):
    """Relative expression is outside the supported pattern inventory."""


# -- analytics ------------------------------------------------------------


class EmptyInput(StindexError):
    """Operation needs at least one datable event."""


# -- evaluation -----------------------------------------------------------


class NoMeasurablePairs(StindexError):
    """No matched spatial pair carries coordinates on both sides."""


class KeyMismatch(StindexError):
    """Prediction references a (doc_id, chunk_index) absent from the gold set."""


# -- persistence ----------------------------------------------------------


class FormatError(StindexError):
    """A persisted run file has a malformed line; ``line`` is 1-based."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line
