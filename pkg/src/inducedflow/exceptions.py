"""Exception hierarchy.

Every error carries enough context for the CLI to pick an exit code; see
``inducedflow.cli.EXIT_CODES``.
"""


class InducedFlowError(Exception):
    """Base class for all library errors."""


class ModelError(InducedFlowError, ValueError):
    """Invalid model definition or model file."""


class DomainError(InducedFlowError, ValueError):
    """A coordinate lies outside the base interval or a branch index is unknown."""


class BranchBoundaryError(InducedFlowError):
    """The forward base map is undefined at a shared branch endpoint."""

    def __init__(self, x, message=None):
        self.x = x
        super().__init__(message or f"forward map undefined at branch boundary x={x!r}")


class SingularInputError(InducedFlowError):
    """The point sits on the cusp, where the roof is infinite."""


class TailError(InducedFlowError):
    """A countable sum diverges or its truncation exceeds the allowed mass.

    Parameters
    ----------
    message : str
    required : float or int, optional
        The minimal admissible parameter (``Z`` or a branch cutoff ``N``).
    """

    def __init__(self, message, required=None):
        self.required = required
        super().__init__(message)


class ConvergenceError(InducedFlowError):
    """An iterative solver ran out of budget or produced an invalid iterate."""


class GridResolutionError(InducedFlowError):
    """A cylinder is thinner than the node spacing of the grid."""

    def __init__(self, message, max_depth=None):
        self.max_depth = max_depth
        super().__init__(message)
