"""Exception hierarchy for cage validation, evaluation and solving."""


class MVCageError(Exception):
    """Base class for all package errors."""


class CageValidationError(MVCageError):
    """Base class for errors raised while validating a cage mesh."""


class NotClosed(CageValidationError):
    """A boundary edge was found; the cage is not a closed surface."""


class NonManifoldEdge(CageValidationError):
    """An edge is shared by more than two triangles."""


class DegenerateTriangle(CageValidationError):
    """A triangle has (near-)zero area."""


class InconsistentOrientation(CageValidationError):
    """Triangle windings disagree and no global flip can fix them."""


class VertexCoincidence(MVCageError):
    """The query point coincides with a cage vertex.

    Callers are expected to fall back to interpolation at that vertex.
    """

    def __init__(self, vertex, message=None):
        self.vertex = int(vertex)
        super().__init__(message or f"query point coincides with cage vertex {vertex}")


class WrongClassification(MVCageError):
    """A per-triangle operation was called with a frame of the wrong kind."""


class OnSurface(MVCageError):
    """Derivatives were requested on the cage surface, where they do not exist."""


class NormalizationSingular(MVCageError):
    """The weight sum is too close to zero to normalize safely."""


class DomainError(MVCageError):
    """Kernel argument outside [0, pi)."""


class EmptySystem(MVCageError):
    """The variational system has no rows."""


class RankDeficientUnconstrained(MVCageError):
    """The variational system leaves non-gauge directions unconstrained.

    Raised only when the caller asks for strict checking; by default the
    condition is reported on the solve result instead.
    """


class ParseError(MVCageError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = int(line_no)
        super().__init__(f"{path}:{line_no}: {message}")


class NotConverged(MVCageError):
    """Quadrature failed to reach the requested tolerance."""


class EvaluatorFailed(MVCageError):
    """A field evaluator raised at a finite-difference stencil point."""

    def __init__(self, point, cause):
        self.point = point
        self.cause = cause
        super().__init__(f"evaluator failed at stencil point {point}: {cause}")
