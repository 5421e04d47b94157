"""Exception hierarchy."""


class HBVMError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HBVMError, ValueError):
    """Invalid arguments or inconsistent inputs."""


class DomainError(HBVMError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class CollisionError(DomainError):
    """Kepler state too close to the origin singularity."""


class StageDivergenceError(HBVMError, ArithmeticError):
    """Non-finite values appeared while solving the stage equations."""


class StageConvergenceError(HBVMError, RuntimeError):
    """Stage iteration hit its iteration limit; raised by drivers, not by ``solve_stages``."""

    def __init__(self, message, step_index=None, partial=None):
        super().__init__(message)
        self.step_index = step_index
        self.partial = partial


class StepsizeUnderflowError(HBVMError, RuntimeError):
    """Adaptive controller asked for a step below ``h_min``."""

    def __init__(self, message, t=None, h=None, partial=None):
        super().__init__(message)
        self.t = t
        self.h = h
        self.partial = partial
