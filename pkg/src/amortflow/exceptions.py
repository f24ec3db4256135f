"""Exception types raised across the package."""


class AmortflowError(Exception):
    """Base class for all package errors."""


class ConfigurationError(AmortflowError, ValueError):
    """Invalid network, training or run configuration."""


class DimensionError(AmortflowError, ValueError):
    """Operand shapes are incompatible."""


class ParameterError(AmortflowError, ValueError):
    """A distribution or model parameter lies outside its valid domain."""


class ContractError(AmortflowError, ValueError):
    """An input violates the documented contract of a network or model."""


class DegenerateInputError(AmortflowError, ValueError):
    """A metric received input for which it is undefined (e.g. zero variance)."""


class NumericError(AmortflowError, FloatingPointError):
    """A computation produced non-finite values."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class CheckpointError(AmortflowError, ValueError):
    """A checkpoint file is malformed or incompatible with its configuration."""


class TrainingAborted(NumericError):
    """Training stopped after repeated numeric failures; ``trace`` holds the loss trace so far."""

    def __init__(self, message, trace=None, where=None):
        super().__init__(message, where=where)
        self.trace = trace if trace is not None else []
