"""Exception hierarchy shared across the engine."""

from __future__ import annotations


class PersonamemError(Exception):
    """Base class for all engine errors."""


class BackendUnavailable(PersonamemError):
    """Live generation/embedding endpoint could not be reached. Retryable."""


class SchemaViolation(PersonamemError):
    """Structured agent output failed to parse or validate after one reprompt."""


class BudgetExceeded(PersonamemError):
    """Per-turn generation call cap was hit."""


class EmptyInput(PersonamemError):
    """Text to embed was empty (or contained no tokenizable content)."""


class DuplicateFixture(PersonamemError):
    """A mock fixture was registered twice for the same (role, digest) key."""


class OutOfOrderTurn(PersonamemError):
    """Turn id not strictly increasing, or speaker alternation broken."""


class DuplicateId(PersonamemError):
    """Memory record id already present in the store."""


class StorageCorrupt(PersonamemError):
    """Persisted state failed checksum or structural validation."""


class StorageUnavailable(PersonamemError):
    """Storage root is missing or not writable."""


class StaleDelta(PersonamemError):
    """Profile version advanced between propose and apply."""


class ToolFailure(PersonamemError):
    """A retrieval tool failed at execution time (recorded, not fatal)."""


class FormatError(PersonamemError):
    """Dataset file did not match the adapter's expected layout."""


class RaggedMatrix(PersonamemError):
    """Agreement label matrix rows have differing lengths."""


class SessionBusy(PersonamemError):
    """Another turn is in flight for this user (single-writer lock held)."""
