"""Exception hierarchy shared by the library and the CLI."""


class JumpEulerError(Exception):
    """Base class for all library errors."""


class InvalidParameter(JumpEulerError, ValueError):
    def __init__(self, field, message=""):
        self.field = field
        super().__init__(f"invalid parameter {field!r}" + (f": {message}" if message else ""))


class DimensionMismatch(JumpEulerError, ValueError):
    pass


class NonFiniteCoefficient(JumpEulerError, ValueError):
    def __init__(self, coefficient, point):
        self.coefficient = coefficient
        self.point = point
        super().__init__(f"coefficient {coefficient!r} is not finite at {point}")


class NonFiniteState(JumpEulerError, ArithmeticError):
    def __init__(self, step, value=None):
        self.step = step
        self.value = value
        msg = f"scheme state became non-finite at step {step}"
        super().__init__(msg if value is None else f"{msg} (state {value})")


class MissingReference(JumpEulerError):
    pass


class TrajectoryFailure(JumpEulerError):
    def __init__(self, index, cause):
        self.index = index
        self.cause = cause
        super().__init__(f"trajectory {index} failed: {cause}")


class ConfigError(JumpEulerError):
    pass
