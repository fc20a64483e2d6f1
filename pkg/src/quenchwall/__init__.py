"""Quenched persistence of random walks and diffusions above random walls."""
from .errors import (ConvergenceError, InvalidEvent, InvalidInput, InvalidModel, InvalidSpec,
                     InvalidTilt, OutOfRange, ParameterDomainError, QuenchwallError, SizeLimitError)
from .rng import RngStream, task_stream

__version__ = "0.1.0"

__all__ = ["ConvergenceError", "InvalidEvent", "InvalidInput", "InvalidModel", "InvalidSpec", "InvalidTilt",
           "OutOfRange", "ParameterDomainError", "QuenchwallError", "SizeLimitError", "RngStream",
           "task_stream", "__version__"]
