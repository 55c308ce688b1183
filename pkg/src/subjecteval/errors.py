"""Error taxonomy shared by the library, the service and the CLI.

Every exception maps to one process exit code / HTTP status so that the CLI
(thin client) and the service report failures identically.
"""

from __future__ import annotations


class SubjectEvalError(Exception):
    """Base class for all toolkit errors."""

    kind = "internal"
    exit_code = 1
    http_status = 500


class UsageError(SubjectEvalError):
    """Caller misuse: bad flags, invalid argument combinations."""

    kind = "usage"
    exit_code = 1
    http_status = 400


class DataError(SubjectEvalError):
    """Malformed or inconsistent input data (manifests, fixtures, votes...)."""

    kind = "data"
    exit_code = 2
    http_status = 422


class BackendError(SubjectEvalError):
    """A model backend failed: decode errors, missing backends, bad results."""

    kind = "backend"
    exit_code = 3
    http_status = 502


EXIT_CODES = {cls.kind: cls.exit_code for cls in (UsageError, DataError, BackendError)}
