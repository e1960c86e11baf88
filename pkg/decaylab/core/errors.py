from typing import Optional


class DecayLabError(Exception):
    """Base failure. `exit_code` is what the CLI returns for it."""

    exit_code: int = 3

    def __init__(self, detail: str, exit_code: Optional[int] = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(DecayLabError):
    exit_code = 2

    def __init__(self, detail: str, field: Optional[str] = None):
        if field:
            detail = f"{field}: {detail}"
        super().__init__(detail)
        self.field = field


class DomainError(DecayLabError, ValueError):
    pass


class RangeError(DecayLabError, ValueError):
    pass


class InvalidGrowthError(DecayLabError):
    pass


class SingularityError(DecayLabError):
    pass


class UnsupportedEnvelopeError(DecayLabError):
    pass


class ShapeError(DecayLabError, ValueError):
    pass


class SizeError(DecayLabError, ValueError):
    pass


class ModelAssemblyError(DecayLabError):
    def __init__(self, detail: str, invariant: str):
        super().__init__(f"{invariant}: {detail}")
        self.invariant = invariant


class SolverError(DecayLabError):
    pass


class StepFailure(DecayLabError):
    def __init__(self, detail: str, residual: float, step_index: int = -1):
        super().__init__(detail)
        self.residual = residual
        self.step_index = step_index


class InsufficientDataError(DecayLabError, ValueError):
    pass


class AuditError(DecayLabError):
    exit_code = 2


class AcceptanceError(DecayLabError):
    exit_code = 4
