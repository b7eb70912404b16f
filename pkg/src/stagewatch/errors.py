"""Shared exception types."""


class GeometryError(ValueError):
    """Degenerate or out-of-bounds workspace geometry."""


class FormatError(ValueError):
    """A plan, scenario, timeline, or report document failed to parse."""


class InputError(ValueError):
    """Structurally invalid inputs to an operation: camera-role mismatch,
    out-of-order frames, non-increasing stage starts, mismatched stage counts."""
