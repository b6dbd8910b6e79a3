class KfbiError(Exception):
    """Base class for solver errors."""

    reason = "solver-error"


class InvalidParameterError(KfbiError):
    """Shape or solver parameter outside its admissible range."""

    reason = "invalid-parameter"


class TooCoarseError(KfbiError):
    """Boundary discretization has too few control points."""

    reason = "too-coarse"


class AnisotropicGridError(KfbiError):
    """Grid spacing differs between the x and y directions."""

    reason = "anisotropic-spacing"


class BoundaryEscapesBoxError(KfbiError):
    """Part of the boundary curve lies outside the bounding box."""

    reason = "boundary-escapes-box"


class ResolutionError(KfbiError):
    """Grid does not resolve the boundary (an edge is crossed more than once)."""

    reason = "under-resolved"


class RootNotFoundError(KfbiError):
    """No bracketed root on an edge whose endpoints lie on different sides."""

    reason = "root-not-found"


class LengthMismatchError(KfbiError):
    """Value array does not match the number of control points."""

    reason = "length-mismatch"


class SingularSystemError(KfbiError):
    """Jump system is singular (corrupted boundary frame)."""

    reason = "singular-system"


class MissingJumpError(KfbiError):
    """An intersection has no jump data attached."""

    reason = "missing-jump"


class TransformSizeError(KfbiError):
    """Sine transform requested on an empty mode set."""

    reason = "transform-size"


class ZeroPivotError(KfbiError):
    """Tridiagonal elimination met a zero pivot."""

    reason = "zero-pivot"


class TooSmallSystemError(KfbiError):
    """System too small for the requested number of blocks."""

    reason = "too-small"


class NearBoxError(KfbiError):
    """Control point too close to the box boundary for a stencil."""

    reason = "near-box"


class SingularStencilError(KfbiError):
    """Interpolation stencil is singular even after reselection."""

    reason = "singular-stencil"


class ConvergenceError(KfbiError):
    """Iterative solver did not reach the tolerance."""

    reason = "no-convergence"

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class IncompatibleDataError(KfbiError):
    """Neumann data violates the compatibility condition."""

    reason = "incompatible-data"


class UnsupportedProblemError(KfbiError):
    """Problem class the solver deliberately does not handle."""

    reason = "unsupported-problem"


class TooManyWorkersError(KfbiError):
    """Slab decomposition would leave a worker with too few columns."""

    reason = "too-many-workers"


class BlowUpError(KfbiError):
    """Time integration produced values beyond the blow-up threshold."""

    reason = "blow-up"
