"""Centralised error handling and custom exceptions.

This module defines the exception hierarchy used by the services and
the functions that turn those exceptions into error payloads and
process exit codes. Services raise these exceptions without knowing
anything about the command line; the application registers handlers
for them during factory initialisation.
"""
from __future__ import annotations

from marshmallow import ValidationError as SchemaValidationError


class ScatlineError(Exception):
    """Base class for every error raised by the package."""

    code = "SCATLINE_ERROR"
    exit_code = 1

    def __init__(self, message: str, fields: dict | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.fields = fields or {}

    def to_response(self, exit_code: int | None = None) -> tuple[dict, int]:
        response = {
            "error": {
                "code": self.code,
                "message": self.message,
                "fields": self.fields,
            }
        }
        return response, self.exit_code if exit_code is None else exit_code


class ValidationError(ScatlineError):
    """Raised when an input file or option fails to parse or validate."""

    code = "VALIDATION_ERROR"
    exit_code = 1


class DomainError(ScatlineError):
    """Raised when a call violates a mathematical precondition.

    Examples are a transfer matrix whose determinant is not one, a
    spectral parameter in the lower half-plane or an integration
    interval that straddles the origin.
    """

    code = "DOMAIN_ERROR"
    exit_code = 2


class NumericalError(ScatlineError):
    """Raised when a numerical procedure fails or is inconclusive."""

    code = "NUMERICAL_ERROR"
    exit_code = 3


class SuiteFailure(ScatlineError):
    """Raised when a validation suite finishes with failing entries."""

    code = "SUITE_FAILURE"
    exit_code = 4


def register_error_handlers(app) -> None:
    """Register custom error handlers on the given application.

    Handlers return ``(payload, exit_code)``; the command group prints the
    payload and exits with the code.
    """
    def handle_scatline_error(err: ScatlineError):
        return err.to_response()

    def handle_schema_error(err: SchemaValidationError):
        messages = err.messages if isinstance(err.messages, dict) else {"_schema": err.messages}
        return ValidationError("Input failed validation.", fields=messages).to_response()

    app.register_error_handler(ScatlineError, handle_scatline_error)
    app.register_error_handler(SchemaValidationError, handle_schema_error)
