"""Exception hierarchy shared across the package."""


class RealignError(Exception):
    """Base class for every error raised by realignlab."""


class ConfigurationError(RealignError, ValueError):
    """Invalid parameters, labels or configuration files."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ScheduleError(RealignError, ValueError):
    pass


class ShapeError(RealignError, ValueError):
    pass


class NonNormalizableTilt(RealignError, ValueError):
    """Quadratic tilt whose curvature overwhelms a component's precision."""


class NonPositiveDefinite(RealignError, ValueError):
    """Interpolated precision is not strictly positive."""

    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class NumericFailure(RealignError, FloatingPointError):
    def __init__(self, message, step=None):
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)
        self.step = step


class OracleCoverageError(RealignError, ValueError):
    """Integration grid leaves non-negligible mass outside its span."""


class IllConditionedKernel(RealignError, ArithmeticError):
    pass


class InsufficientData(RealignError, ValueError):
    pass


class ObjectiveError(RealignError, RuntimeError):
    def __init__(self, message, lam=None):
        if lam is not None:
            message = f"objective failed at lambda={lam!r}: {message}"
        super().__init__(message)
        self.lam = lam
