"""Exception types shared across the package."""


class QuasilabError(Exception):
    """Base class for all library errors."""


class SingularGradient(QuasilabError):
    """Phi' or Phi'' is undefined at the requested squared gradient."""


class MissingAntiderivative(QuasilabError):
    """An operation needs the potential of H but none was supplied."""


class NonConvergence(QuasilabError):
    def __init__(self, iterations, residual, message=None):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            message
            or f"Newton did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )


class SingularJacobian(QuasilabError):
    """The Newton linear system could not be solved."""


class DegenerateGradient(QuasilabError):
    """u' vanishes at an interior node of a singular p-Laplacian (p < 2, eps = 0)."""


class DomainTooSmall(QuasilabError):
    """A box projects outside the domain of the profile it is built from."""


class NotScalar(QuasilabError):
    """The pointwise gradient bound is only established for m = 1 (open for systems)."""


class HypothesisViolated(QuasilabError):
    """A standing hypothesis of a check does not hold on the input."""


class NotMonotone(QuasilabError):
    """A component's derivative along the chosen axis changes sign (or vanishes)."""


class NegativeCouplingProduct(QuasilabError):
    """d_j H_i * d_i H_j < 0 somewhere on the sampled range."""


class GradientFloorViolation(QuasilabError):
    """No evaluation node has a gradient above the floor."""


class CouplingSignIndeterminate(QuasilabError):
    """The sign of d_j H_i changes on the sampled range."""


class LinearAlgebraFailure(QuasilabError):
    """The eigen-solver failed."""


class InsufficientRange(QuasilabError):
    """Fit radii span less than one decade."""


class DegenerateDerivative(QuasilabError):
    """sum_i |u_i'|^p vanishes on a subinterval."""


class ScenarioParseError(QuasilabError):
    """A scenario file or query expression could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = "" if line is None else f" (line {line}" + ("" if column is None else f", column {column}") + ")"
        super().__init__(message + where)


class ScenarioValidationError(QuasilabError):
    """A scenario parses but a named field is invalid or incompatible."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
