class AepError(Exception):
    pass


class DomainError(AepError, ValueError):
    pass


class UnsupportedEnsembleError(DomainError):
    pass


class ModGaussDomainError(DomainError):
    pass


class ConfigError(DomainError):
    pass


class SumOverflowError(AepError, OverflowError):
    pass


class ConvergenceError(AepError):
    pass


class QuadratureBudgetError(AepError):
    pass


class FitFailureError(AepError):
    pass


class SamplerError(AepError):
    def __init__(self, message: str, replica: int | None = None):
        if replica is not None:
            message = f"реплика {replica}: {message}"
        super().__init__(message)
        self.replica = replica
