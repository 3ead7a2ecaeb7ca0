"""Exception types and warning categories shared across the package."""


class CqnlsError(RuntimeError):
    pass


class GridMismatchError(CqnlsError):
    """Two fields living on different grids were combined."""


class NonFiniteFieldError(CqnlsError):
    """A field or operator output contains NaN/Inf."""


class FeasibilityError(CqnlsError):
    """Constraint projection failed to converge."""


class BracketError(CqnlsError):
    """A root bracket could not be established (shooting, h(l) roots, tau ladder)."""


class SolverError(CqnlsError):
    """A solver stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


class FileFormatError(CqnlsError):
    """Corrupt or truncated field file."""


class ResolutionWarning(UserWarning):
    """Spectral or boundary resolution degraded beyond the configured guard."""


class AliasingError(CqnlsError):
    """Spectral tail mass exceeded the propagation threshold; step must be retried."""

    def __init__(self, tail_fraction: float):
        super().__init__(f"spectral tail fraction {tail_fraction:.3e} over threshold")
        self.tail_fraction = tail_fraction
