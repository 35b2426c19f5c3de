"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Array dimensions do not match a layer or operation contract."""


class ConfigError(ValueError):
    """Bad configuration value or unknown option."""


class DomainError(ValueError):
    """Argument outside its valid domain."""


class ContractError(RuntimeError):
    """An internal calling contract was violated."""


class DegenerateSignalError(ValueError):
    """Signal has (numerically) zero power and cannot be normalized."""


class DatasetError(ValueError):
    """Channel dataset file is missing, empty, or malformed."""


class TrainingAbort(RuntimeError):
    """Training hit a non-finite loss; carries the run context."""

    def __init__(self, message, *, scheme=None, epoch=None, iteration=None, step=None):
        super().__init__(message)
        self.scheme = scheme
        self.epoch = epoch
        self.iteration = iteration
        self.step = step
