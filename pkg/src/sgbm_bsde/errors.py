"""Exception types raised by the solver library."""


class SGBMError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SGBMError, ValueError):
    """Inconsistent or unsupported problem/scheme configuration."""


class DecompositionError(SGBMError, ValueError):
    """Cholesky factorisation failed because the matrix is not positive definite."""

    def __init__(self, pivot, value):
        self.pivot = pivot
        self.value = value
        super().__init__(
            f"matrix is not positive definite: pivot {pivot} has value {value!r}"
        )


class SimulationOverflowError(SGBMError, ArithmeticError):
    """A simulated forward state became non-finite."""

    def __init__(self, path, step):
        self.path = path
        self.step = step
        super().__init__(f"non-finite forward state at path {path}, step {step}")


class DomainError(SGBMError, ValueError):
    """Basis evaluated outside its domain (e.g. geometric mean of non-positive states)."""


class DataError(SGBMError, ValueError):
    """Non-finite regression input."""

    def __init__(self, path, what="value"):
        self.path = path
        super().__init__(f"non-finite {what} at path {path}")


class StepFailureError(SGBMError, ArithmeticError):
    """A backward step produced a non-finite intermediate value."""

    def __init__(self, step, bundle, path):
        self.step = step
        self.bundle = bundle
        self.path = path
        super().__init__(
            f"non-finite value in backward step {step}, bundle {bundle}, path {path}"
        )
