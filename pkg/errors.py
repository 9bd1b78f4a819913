# errors.py


class DoDError(Exception):
    """Base class for every error raised by the DoD pipeline."""


class ParameterError(DoDError, ValueError):
    pass


class SizeError(DoDError, ValueError):
    pass


class DomainError(DoDError, ValueError):
    pass


class EmptyModelError(DoDError, ValueError):
    """A coordinate file parsed fine but held no usable atoms."""


class NumericError(DoDError, ArithmeticError):
    pass


class DivergenceError(NumericError):
    pass
