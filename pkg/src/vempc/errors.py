"""Exception hierarchy shared across the package."""


class VempcError(Exception):
    """Base class for all package errors."""


class ConfigurationError(VempcError, ValueError):
    """Invalid model, problem, or run configuration."""


class NumericalError(VempcError, ArithmeticError):
    """A numerical routine failed (factorization, convergence, ...)."""


class NoInformativeSamples(NumericalError):
    """Every sample in a batch received zero weight."""


class QpNotConverged(NumericalError):
    def __init__(self, message, iterations, primal_residual, dual_residual, solution=None):
        super().__init__(message)
        self.iterations = iterations
        self.primal_residual = primal_residual
        self.dual_residual = dual_residual
        self.solution = solution


class QpInfeasible(NumericalError):
    """The reference QP detected a primal infeasibility certificate."""


class CryptoError(VempcError):
    """Base class for homomorphic-encryption failures."""


class LevelUnderflow(CryptoError):
    """No modulus level left for a rescale or multiplication."""


class ScaleMismatch(CryptoError):
    """Operands carry incompatible scales or levels."""


class MissingKey(CryptoError):
    """A required evaluation key (e.g. a Galois key) is absent."""


class SerializationError(CryptoError):
    """A serialized blob or frame cannot be parsed."""
