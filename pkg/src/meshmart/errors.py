"""Platform exception hierarchy.

Every error the REST layer can surface maps to exactly one class here;
the API translates classes to HTTP status codes in one place.
"""

from __future__ import annotations


class MeshError(Exception):
    """Base class for all platform errors."""

    http_status = 500

    def __init__(self, message: str = ""):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": self.message}


# -- naming / addressing -------------------------------------------------

class InvalidIdentifier(MeshError):
    http_status = 400


class MalformedAddress(MeshError):
    http_status = 400


class NotFound(MeshError):
    http_status = 404


class DuplicateTenant(MeshError):
    http_status = 409


class DuplicateObject(MeshError):
    http_status = 409


# -- metadata store -------------------------------------------------------

class StorageFailure(MeshError):
    http_status = 500


class CorruptJournal(MeshError):
    http_status = 500


# -- variant / table store ------------------------------------------------

class TypeMismatch(MeshError):
    http_status = 400


class PayloadTooDeep(MeshError):
    http_status = 400


class NoSuchTable(MeshError):
    http_status = 404


class UnknownPath(MeshError):
    http_status = 400


# -- ingestion -------------------------------------------------------------

class DuplicateStream(MeshError):
    http_status = 409


class UnknownStream(MeshError):
    http_status = 404


class MalformedPayload(MeshError):
    http_status = 400


class PayloadTooLarge(MeshError):
    http_status = 413


class KeyNotConfigured(MeshError):
    http_status = 400


# -- schema inference -------------------------------------------------------

class NotAnObject(MeshError):
    http_status = 400


class DepthLimitExceeded(MeshError):
    http_status = 400


class UnsupportedType(MeshError):
    http_status = 400


class NameCollision(MeshError):
    http_status = 409


# -- SQL frontend ------------------------------------------------------------

class SqlSyntaxError(MeshError):
    """Syntax error with 1-based line/column and the expectation that failed."""

    http_status = 400

    def __init__(self, message: str, line: int = 0, column: int = 0):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["line"] = self.line
        d["column"] = self.column
        return d


class UnknownObject(MeshError):
    http_status = 404


class ViewCycle(MeshError):
    http_status = 400


class PlanError(MeshError):
    http_status = 400


class ExecutionError(MeshError):
    http_status = 400


# -- access / sharing ----------------------------------------------------------

class AccessDenied(MeshError):
    http_status = 403


class UnknownResource(MeshError):
    http_status = 404


class UnknownShare(MeshError):
    http_status = 404


class BreakingChange(MeshError):
    """Raised when a gated change on a shared object is attempted without force."""

    http_status = 409


# -- marketplace -------------------------------------------------------------

class EmptyResources(MeshError):
    http_status = 400


class RatingOutOfRange(MeshError):
    http_status = 400


# -- advisor / pii -------------------------------------------------------------

class NotPending(MeshError):
    http_status = 409


class NotFlagged(MeshError):
    http_status = 409


# -- service ---------------------------------------------------------------------

class BindFailure(MeshError):
    http_status = 500


class ConfigError(MeshError):
    http_status = 500


class Unauthenticated(MeshError):
    http_status = 401
