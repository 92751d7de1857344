"""Exception taxonomy.

Input/contract violations derive from ValueError so callers can treat them
uniformly; numeric failures (non-convergence, inconsistent detections)
derive from RuntimeError. The CLI maps these onto exit codes.
"""

from __future__ import annotations


class GridFenceError(Exception):
    """Base class for all package errors."""


class NetworkError(GridFenceError, ValueError):
    """Invalid network construction or query (bad ids, self-loops, ...)."""


class DisconnectedNetworkError(NetworkError):
    """Operation requires a connected network."""


class BridgeOutageError(NetworkError):
    """Outage distribution factor requested for a bridge line."""


class SameLineError(NetworkError):
    """Monitored and tripped line coincide."""


class IslandingError(NetworkError):
    """A multi-line outage disconnects the network."""


class ParseError(GridFenceError, ValueError):
    """Malformed case file; carries a line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(GridFenceError, ValueError):
    """Experiment configuration inconsistent with the case."""


class NumericError(GridFenceError, RuntimeError):
    """Numeric computation failed or produced inconsistent results."""


class PowerFlowError(NumericError):
    """AC power flow did not converge."""


class BridgeDetectionError(NumericError):
    """Numeric and structural bridge detection disagree."""


class FitResidualError(NumericError):
    """Rational susceptance-response fit exceeded its residual tolerance."""
