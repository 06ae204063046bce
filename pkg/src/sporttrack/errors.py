"""Exception types shared across the package.

Two families matter to callers: input-format errors (bad files or config,
CLI exit code 2) and contract violations (valid files driven through an
invalid sequence of operations, CLI exit code 3).
"""

from __future__ import annotations


class SportTrackError(Exception):
    """Base class for all package-specific errors."""


class InputFormatError(SportTrackError):
    """A file or config value could not be parsed as documented."""


class ContractViolationError(SportTrackError):
    """An operation was invoked outside its documented preconditions."""


class ParseError(InputFormatError):
    """A line of an input file is malformed. Carries the 1-based line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InvalidBoxError(ParseError):
    """A detection or result line encodes a degenerate box (w or h not positive)."""


class MissingHeaderError(InputFormatError):
    """An embedding file does not start with its dimension header."""


class DimensionMismatchError(InputFormatError):
    """Two embeddings (or an embedding line and the declared dim) disagree in length."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class UnknownKeyError(InputFormatError):
    """A config or sequence-info file contains a key that is not recognised."""


class ConfigTypeError(InputFormatError):
    """A config or sequence-info value has the wrong type for its key."""


class ZeroDisplacementError(ContractViolationError):
    """Direction of travel is undefined for two identical points."""


class ZeroVectorError(ContractViolationError):
    """Cosine similarity is undefined when either vector has zero norm."""


class InvalidGapError(ContractViolationError):
    """Trajectory re-update needs at least one whole missing frame between observations."""


class NonMonotonicFrameError(ContractViolationError):
    """Tracker frames must strictly increase; an older or repeated frame was fed."""


class OverlappingFramesError(ContractViolationError):
    """Two tracklets cannot merge while they hold boxes in the same frame."""


class NoEmbeddingsError(ContractViolationError):
    """Appearance distance is undefined for a tracklet with no embeddings at all."""


class InfeasibleSpecError(ContractViolationError):
    """A synthetic scenario sends a player out of the field with no scripted exit."""
