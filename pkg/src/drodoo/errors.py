"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input violates a documented precondition."""


class ConfigError(ValidationError):
    """A run configuration file is missing, malformed, or inconsistent."""


class SolverError(RuntimeError):
    """A solve did not reach its convergence target."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = dict(diagnostics)


class InnerUnboundedError(SolverError):
    """The inner reweighting problem has no finite stationary point.

    Raised by the generic dual solve when the scalar equation cannot be
    bracketed inside the conjugate's domain (possible for divergences with
    bounded conjugate domain and adversarially large rewards)."""


class NonConcaveError(SolverError):
    """Mean Hessian is not negative definite where strict concavity is required."""


class UnsupportedModelError(TypeError):
    """Operation not available for this model/population combination."""
