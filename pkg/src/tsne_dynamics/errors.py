"""Exception types raised by the library."""


class NumericalError(ArithmeticError):
    """A numeric routine failed (non-convergence, degenerate input)."""


class CalibrationError(NumericalError):
    """Perplexity bisection could not reach its target."""


class DegenerateBandwidthError(NumericalError):
    """A conditional affinity row has no usable mass."""


class DivergenceError(NumericalError):
    """The embedding blew up; ``iteration`` is the step that produced it."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class IDXFormatError(ValueError):
    pass


class UnsupportedMagicError(IDXFormatError):
    pass


class TruncatedPayloadError(IDXFormatError):
    pass


class DimensionOverflowError(IDXFormatError):
    pass


class CSVFormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
