"""Exception types raised across the package.

Two broad families matter to callers: problems with the input data or
configuration (:class:`InputError`) and numerical failures encountered
while solving (:class:`NumericalError`). The command line tool maps the
former to exit code 2 and the latter to exit code 3.
"""


class SmfpcaError(Exception):
    """Base class for all errors raised by this package."""


class InputError(SmfpcaError):
    """Invalid input data, file content, or configuration."""


class NumericalError(SmfpcaError):
    """A numerical procedure failed or produced an unusable result."""


class ParseError(InputError):
    """A file could not be parsed.

    Parameters
    ----------
    message : str
        Description of the problem.
    line : int, optional
        One-based line number at which parsing failed.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TopologyError(InputError):
    """The mesh violates a required topological property.

    Carries the index of the offending element when known.
    """

    def __init__(self, message, element_index=None):
        if element_index is not None:
            message = f"{message} (element {element_index})"
        super().__init__(message)
        self.element_index = element_index


class DegenerateTriangle(TopologyError):
    """A triangle has (numerically) zero area."""


class DimensionMismatch(InputError):
    """Array shapes are inconsistent with the mesh or with each other."""


class InvalidFoldCount(InputError):
    """Cross validation fold count outside the usable range."""


class ResourceLimit(InputError):
    """A requested size exceeds a hard built-in limit."""


class NotASphere(InputError):
    """A unit sphere mesh was required but vertex radii deviate from 1."""


class SingularSystem(NumericalError):
    """A sparse factorization failed because the matrix is singular."""


class ConvergenceFailure(NumericalError):
    """An iterative procedure did not reach its tolerance."""


class DegenerateData(NumericalError):
    """Data degenerate for the requested operation (e.g. identically zero)."""


class DegenerateSmoother(NumericalError):
    """No smoothing candidate produced a finite selection score."""


class RankDeficient(NumericalError):
    """A matrix expected to have full column rank does not."""


class NonMonotoneObjective(NumericalError):
    """Internal consistency check: the alternating objective increased.

    The function update solves its subproblem exactly, so the objective
    can only increase through a solver defect. This should never fire.
    """
