"""Exception types raised across the package."""


class TDCError(Exception):
    """Base class for all package errors."""


class SingularMetric(TDCError):
    """First fundamental form is (numerically) singular."""


class DegenerateDeformation(TDCError):
    """Deformed metric collapsed or inverted.

    ``element`` carries the element id when raised during assembly.
    """

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class SingularDeformation(TDCError):
    """Classical deformation gradient not invertible."""


class ZeroGradient(TDCError):
    """Level-set gradient vanishes where a normal is needed."""


class ParallelGradients(TDCError):
    """The two level-set gradients of a codimension-2 manifold are parallel."""


class UnsupportedOrder(TDCError):
    """Operation needs a higher element order."""


class NoIntersection(TDCError):
    """An element flagged active is not cut by the zero level set."""


class DegenerateCut(TDCError):
    """Zero level set could not be isolated by recursive subdivision."""


class EmptyTrace(TDCError):
    """No background element is cut by the manifold."""


class NonConvergedCut(TDCError):
    """Newton projection onto the interpolated zero level set failed."""


class DanglingInterface(TDCError):
    """A declared shared node has no partner in the other mesh."""


class NoConvergence(TDCError):
    """Newton iteration did not reach the tolerance.

    Attributes
    ----------
    best : ndarray
        Iterate with the smallest residual seen.
    history : list
        Per-iteration records ``(step, iteration, residual_inf, energy)``.
    """

    def __init__(self, message, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history or []


class SingularTangent(TDCError):
    """Sparse factorization of the tangent failed."""


class MissingReference(TDCError):
    """No reference energy available for an error measure."""


class InvalidTraction(TDCError):
    """Traction data leaves the tangent space of the deformed manifold."""
