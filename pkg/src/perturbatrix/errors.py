"""Exception hierarchy.

Every failure raised on purpose by the library derives from
:class:`PerturbatrixError`; the CLI maps the three families below onto its
exit codes.
"""


class PerturbatrixError(Exception):
    """Base class for all library errors."""


class InputError(PerturbatrixError, ValueError):
    """Malformed or inadmissible input (CLI exit code 1)."""


class HypothesisError(PerturbatrixError):
    """A structural hypothesis on (A, B, gamma) fails (CLI exit code 2)."""


class NumericalError(PerturbatrixError, ArithmeticError):
    """An algorithm could not deliver a trustworthy answer (CLI exit code 3)."""


# -- input ------------------------------------------------------------------

class InvalidMatrix(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class NotHermitian(InputError):
    pass


class NotPSD(InputError):
    pass


class NotUnitVector(InputError):
    pass


class DegenerateLeadingCoefficient(InputError):
    pass


class EmptyInterval(InputError):
    pass


class PoleProximity(InputError):
    pass


class SpectrumCollision(InputError):
    pass


class OutOfSector(InputError):
    pass


class NotInUpperHalfPlane(InputError):
    pass


# -- hypotheses -------------------------------------------------------------

class NotSectorial(HypothesisError):
    pass


class NotInCone(HypothesisError):
    pass


class HypothesisViolated(HypothesisError):
    pass


class HypothesisUnverifiable(HypothesisError):
    """A Rouche precondition could not be verified on the sampling grid."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


# -- numerics ---------------------------------------------------------------

class NoConvergence(NumericalError):
    pass


class MatrixExpOverflow(NumericalError, OverflowError):
    pass


class UnstablePolynomialPath(NumericalError):
    """Characteristic-polynomial coefficients requested above the safe size."""


class ZeroDenominator(NumericalError, ZeroDivisionError):
    pass


class CollisionDetected(NumericalError):
    """Two traced curves became indistinguishable; carries the partial trace."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class MaxStepsExceeded(NumericalError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class AuditFailure(NumericalError):
    pass


class AmbiguousMatch(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class UnboundedDerivative(NumericalError):
    pass
