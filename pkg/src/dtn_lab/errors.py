"""Exception hierarchy shared by the solvers, reconstructions and the CLI."""


class DtnLabError(Exception):
    """Base class for every error raised by dtn_lab."""


class DomainError(DtnLabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NumericError(DtnLabError, ArithmeticError):
    """A computation failed numerically (divergence, vanishing denominator)."""


class ConvergenceError(NumericError):
    """An iteration did not converge within its budget."""


class OracleError(NumericError):
    """The ODE oracle failed to converge under grid refinement."""


class ConfigurationError(DtnLabError, ValueError):
    """A solver was configured in a way that cannot meet its accuracy contract."""

    def __init__(self, message, suggestion=None):
        super().__init__(message)
        self.suggestion = suggestion


class ReconstructionError(DtnLabError):
    """A reconstruction stage failed.

    ``stage`` names the step that failed (e.g. ``"alpha0"``, ``"interface"``).
    """

    def __init__(self, message, stage=None):
        if stage is not None:
            message = f"[{stage}] {message}"
        super().__init__(message)
        self.stage = stage


class IllPosedInputError(ReconstructionError):
    """Residuals do not decay the way an admissible spectrum must."""


class UnidentifiableError(ReconstructionError):
    """The requested parameter is invisible in the data (below the noise floor)."""


class InconsistentSpectrumError(ReconstructionError):
    """An extrapolated limit lands outside the range admissible conductivities produce."""


class InsufficientModesError(ReconstructionError):
    """The spectrum is too short for the requested reconstruction."""
