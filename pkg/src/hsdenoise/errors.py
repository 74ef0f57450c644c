"""Exception types shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat
and the categories coarse: configuration/parsing problems, shape
mismatches, and solver divergence.
"""


class ConfigError(ValueError):
    """Bad configuration file, unknown key, or unparsable value."""


class ShapeMismatchError(ValueError):
    """Operands with incompatible dimensions."""


class DivergenceError(RuntimeError):
    """Raised when the solver loss becomes non-finite or blows up.

    Carries the partial loss trace accumulated before the abort so the
    caller can inspect what happened.
    """

    def __init__(self, message, loss_trace=None, iteration=None):
        super().__init__(message)
        self.loss_trace = list(loss_trace) if loss_trace is not None else []
        self.iteration = iteration
