"""Risk scoring of static-analysis findings in MCP server repositories."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    HarvestError,
    MCPRiskError,
    ParseError,
    ScoringError,
    UsageError,
)

__all__ = ["__version__", "ConfigError", "HarvestError", "MCPRiskError",
           "ParseError", "ScoringError", "UsageError"]
