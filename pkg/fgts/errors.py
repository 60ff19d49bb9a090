"""Exception hierarchy.

Every library failure is an ``FgtsError`` carrying a human-readable ``detail``
and the process ``exit_code`` the CLI maps it to.
"""


class FgtsError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidInputError(FgtsError, ValueError):
    """Bad index, dimension, action or size. The message names the axis."""


class ConfigError(FgtsError, ValueError):
    """Experiment config failed validation."""


class UnsupportedOperationError(FgtsError, TypeError):
    """Operation is not defined for this model kind."""


class EmptyPosteriorError(FgtsError, RuntimeError):
    """Every parameter was removed by the Omega_t filter."""


class InvalidEnvError(FgtsError, ValueError):
    """Environment lookup failed (unknown stage/state, no valid actions)."""


class ContradictionError(FgtsError, ArithmeticError):
    """A diagnostic found an impossible combination of quantities."""


class CheckFailedError(FgtsError):
    exit_code = 2
