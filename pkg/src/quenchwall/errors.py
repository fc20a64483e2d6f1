"""Exception hierarchy.  All input errors derive from ValueError."""


class QuenchwallError(Exception):
    pass


class InvalidInput(QuenchwallError, ValueError):
    pass


class OutOfRange(InvalidInput):
    pass


class InvalidModel(InvalidInput):
    pass


class InvalidSpec(InvalidInput):
    pass


class InvalidEvent(InvalidInput):
    pass


class InvalidTilt(InvalidInput):
    pass


class SizeLimitError(InvalidInput):
    pass


class ParameterDomainError(InvalidInput):
    pass


class ConvergenceError(QuenchwallError, RuntimeError):
    """Iteration did not converge; ``last`` carries the final iterate."""

    def __init__(self, msg, last=None):
        super().__init__(msg)
        self.last = last
