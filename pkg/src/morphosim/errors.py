"""Exception hierarchy shared by all morphosim modules."""


class MorphosimError(Exception):
    """Base class for all errors raised by this package."""


class SingularMatrix(MorphosimError):
    """A matrix operation required invertibility and the determinant is
    (numerically) zero or negative where positivity is required."""


class OutsideAdmissibleBall(MorphosimError):
    """An elastic state left the matrix ball around the identity on which
    the energy model is defined."""

    def __init__(self, message, worst_cell=None, deviation=None):
        super().__init__(message)
        self.worst_cell = worst_cell
        self.deviation = deviation


class InvalidTagRule(MorphosimError):
    """A boundary classifier produced tags that do not partition the
    boundary (or referenced unknown boundary parts)."""


class AssemblyError(MorphosimError):
    """Non-finite coefficient or load encountered during assembly."""


class EllipticityViolation(MorphosimError):
    """A sampled coefficient matrix fell below the required ellipticity
    constant."""


class SingularSystem(MorphosimError):
    """A linear system is singular or indefinite on its free degrees of
    freedom (non-positive pivot, CG breakdown)."""


class NoConvergence(MorphosimError):
    """An iterative process hit its iteration budget."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ContractionLost(MorphosimError):
    """The frozen-linearization iteration stopped contracting (increment
    ratio >= 1 for several consecutive steps)."""


class SingularJacobian(MorphosimError):
    """Newton's method produced a singular tangent system."""


class LiftDegenerate(MorphosimError):
    """The interior extension of Dirichlet data has a non-positive
    Jacobian determinant on some cell."""


class GuardViolation(MorphosimError):
    """A growth-field guard fired (determinant too small, norm too large,
    or a non-finite right-hand side)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ParseError(MorphosimError):
    """Malformed scenario file, expression, or mesh file."""


class ValidationError(MorphosimError):
    """A scenario or problem violates a model assumption."""

    def __init__(self, message, reports=None):
        super().__init__(message)
        self.reports = reports or []


class IoError(MorphosimError):
    """Failed to read or write an output artifact."""


class NegativeSolutionWarning(UserWarning):
    """Nutrient solution dipped below the discrete non-negativity
    tolerance on a mesh where the maximum principle is expected."""
