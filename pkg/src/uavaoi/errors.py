"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its documented domain."""


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""


class NonFiniteError(FloatingPointError):
    """A NaN or inf appeared in a forward or backward pass.

    ``where`` names the layer or op that produced it.
    """

    def __init__(self, where, detail=""):
        self.where = where
        msg = f"non-finite value in {where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class TrainingDiverged(RuntimeError):
    """Raised by the training loops when the loss stops being finite."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
