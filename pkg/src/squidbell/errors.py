"""Exception taxonomy. CLI exit codes: config 1, numerics 2, format 3."""


class SquidBellError(Exception):
    """Base class for all package errors."""


class ConfigError(SquidBellError):
    """Invalid configuration or precondition violation."""

    exit_code = 1


class NumericsError(SquidBellError):
    """Numerical failure during a computation."""

    exit_code = 2


class EigensolverError(NumericsError):
    """Eigensolve failed or produced a non-converged state."""

    def __init__(self, message, state_index=None):
        super().__init__(message)
        self.state_index = state_index


class DegenerateDoubletError(NumericsError):
    """Lowest doublet splitting below resolvable precision."""


class BasisTruncationError(NumericsError):
    """Projection lost more norm than the truncation budget allows."""


class ImpossibleOutcomeError(NumericsError):
    """Measurement filter annihilated the state."""


class DegenerateDensityError(NumericsError):
    """Outcome density carries no mass on the outcome grid."""


class ScanPointError(NumericsError):
    """A scan cell failed; carries the offending quiescent times."""

    def __init__(self, message, t_ab, t_bc):
        super().__init__(message)
        self.t_ab = t_ab
        self.t_bc = t_bc


class FormatError(SquidBellError):
    """Malformed input artifact (CSV/JSON)."""

    exit_code = 3
