"""Exception hierarchy shared across the toolkit.

ValidationError maps to CLI exit code 1, OrchestrationError and plain
IO/runtime failures map to exit code 2.
"""


class MtforgeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(MtforgeError):
    """Bad input: unknown language tag, schema violation, invalid parameter."""


class SchemaError(ValidationError):
    """A corpus or config record violates its schema.

    Carries the (1-based) line number when raised while parsing a file.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class OrchestrationError(MtforgeError):
    """A multi-request operation (generation, fusion) could not complete."""
