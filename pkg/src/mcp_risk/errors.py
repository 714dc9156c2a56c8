"""Exception hierarchy. Each family maps onto one CLI exit code."""

from __future__ import annotations


class MCPRiskError(Exception):
    exit_code = 1


class ConfigError(MCPRiskError):
    """Invalid configuration, missing input file, bad override table or usage."""

    exit_code = 2


class UsageError(ConfigError):
    pass


class ParseError(MCPRiskError):
    """Input document could not be parsed.

    ``line`` and ``column`` are filled in when the underlying parser reports a
    position (1-based line, 0-based column as reported by expat).
    """

    exit_code = 3

    def __init__(self, message: str, *, source: str | None = None,
                 line: int | None = None, column: int | None = None):
        self.source = source
        self.line = line
        self.column = column
        where = []
        if source:
            where.append(source)
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class IntegrityError(ParseError):
    """Structurally valid document with inconsistent content (e.g. duplicate ids)."""


class ScoringError(MCPRiskError):
    exit_code = 4


class HarvestError(MCPRiskError):
    pass


class AuthError(HarvestError):
    pass


class RateLimitError(HarvestError):
    pass


class ResponseError(HarvestError):
    pass


class SnapshotError(HarvestError):
    pass


class SnapshotSchemaError(SnapshotError):
    pass
