"""Exception types shared across the gateway."""

from __future__ import annotations


class M3Error(Exception):
    """Base class for all errors raised by this package."""

    code = "m3_error"


class SchemaError(M3Error):
    """A configuration document or record violates its schema."""

    code = "schema_error"


class DuplicateKeywordError(SchemaError):
    """Two model cards in one registry share a trigger keyword."""

    code = "duplicate_keyword"


class UnknownKeywordError(M3Error):
    """A trigger keyword does not match any registered model card."""

    code = "unknown_keyword"


class InvalidArgumentError(M3Error):
    """A trigger argument is not valid for the resolved model card.

    Carries the card's valid argument list so callers can compose a
    corrective feedback turn.
    """

    code = "invalid_argument"

    def __init__(self, message: str, keyword: str, valid_args: list[str]):
        super().__init__(message)
        self.keyword = keyword
        self.valid_args = list(valid_args)


class SpanMismatchError(M3Error):
    """Trigger events do not belong to the text they are applied to."""

    code = "span_mismatch"


class BackendError(M3Error):
    """An expert or VLM backend failed (transport, timeout, bad status)."""

    code = "backend_error"

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class MalformedPayloadError(BackendError):
    """A backend returned a payload that does not match its contract."""

    code = "malformed_payload"

    def __init__(self, message: str):
        super().__init__(message, retryable=False)


class StructureNotFoundError(M3Error):
    """No voxel of the requested target labels exists in the volume."""

    code = "structure_not_found"


class FixtureExhaustedError(M3Error):
    """A scripted backend was called more times than it has replies."""

    code = "fixture_exhausted"


class RegistryVersionMismatchError(M3Error):
    """A session was created against a different registry version."""

    code = "registry_version_mismatch"


class MissingStoreError(M3Error):
    """A dataset spec references a record store that does not exist."""

    code = "missing_store"


class SessionNotFoundError(M3Error):
    """The requested session id is not in the session store."""

    code = "session_not_found"


class UnextractablePredictionError(M3Error):
    """A prediction could not be parsed into per-condition yes/no labels."""

    code = "unextractable_prediction"

    def __init__(self, message: str, record_ids: list[str]):
        super().__init__(message)
        self.record_ids = list(record_ids)
